#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>

#include "ppdnn/tracker.hpp"

using namespace ppdnn;

namespace {

Detection det(double x, double y, double w, double h, ClassId c = ClassId::vehicle) {
  return Detection{c, BBox(x, y, w, h), 0.9};
}

// Exhaustive search over all partial one-to-one assignments of admissible
// pairs; keeps the assignment whose scores, sorted descending, are
// lexicographically largest.
std::vector<std::pair<std::size_t, std::size_t>> brute_force(const std::vector<double>& s, std::size_t rows,
                                                             std::size_t cols, double thr) {
  std::vector<std::pair<std::size_t, std::size_t>> best, cur;
  std::vector<double> best_key;
  std::vector<bool> used(cols);
  std::function<void(std::size_t)> rec = [&](std::size_t r) {
    if (r == rows) {
      std::vector<double> key;
      for (auto [i, j] : cur) key.push_back(s[i * cols + j]);
      std::sort(key.rbegin(), key.rend());
      if (key > best_key) {
        best_key = key;
        best = cur;
      }
      return;
    }
    rec(r + 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = s[r * cols + c];
      if (used[c] || v < thr || v <= 0) continue;
      used[c] = true;
      cur.emplace_back(r, c);
      rec(r + 1);
      cur.pop_back();
      used[c] = false;
    }
  };
  rec(0);
  std::sort(best.begin(), best.end());
  return best;
}

}  // namespace

TEST(Tracker, ColdStartSpawnsTracks) {
  Tracker t;
  const std::vector<Detection> d = {det(0, 0, 10, 10), det(100, 100, 20, 20)};
  const TrackerOutput out = t.step(d, 0);
  EXPECT_EQ(out.new_count, 2);
  EXPECT_EQ(out.missed_count, 0);
  ASSERT_EQ(out.tracked.size(), 2u);
  for (const Track& tr : out.tracked) EXPECT_EQ(tr.velocity, Velocity{});
}

TEST(Tracker, VelocityIsOneFrameDifference) {
  Tracker t;
  t.step(std::vector<Detection>{det(10, 10, 20, 20)}, 0);
  const TrackerOutput out = t.step(std::vector<Detection>{det(12, 13, 21, 22)}, 1);
  ASSERT_EQ(out.matched_count, 1);
  const Velocity v = out.tracked[0].velocity;
  EXPECT_EQ(v, (Velocity{2, 3, 2, 1}));
}

TEST(Tracker, RejectsNonIncreasingSequence) {
  Tracker t;
  t.step({}, 5);
  EXPECT_THROW(t.step({}, 5), ValidationError);
  EXPECT_THROW(t.step({}, 4), ValidationError);
}

TEST(Tracker, MissesRetireAfterLimit) {
  TrackerConfig cfg;
  cfg.max_misses = 2;
  Tracker t(cfg);
  t.step(std::vector<Detection>{det(10, 10, 20, 20)}, 0);
  EXPECT_EQ(t.step({}, 1).tracked.size(), 1u);
  const auto out2 = t.step({}, 2);
  EXPECT_EQ(out2.tracked.size(), 1u);
  EXPECT_EQ(out2.tracked[0].miss_count, 2);
  EXPECT_EQ(out2.missed_count, 1);
  EXPECT_TRUE(t.step({}, 3).tracked.empty());
}

TEST(Tracker, IdenticalFramesSettle) {
  Tracker t;
  const std::vector<Detection> d = {det(0, 0, 10, 10), det(50, 50, 30, 10), det(300, 200, 40, 80)};
  t.step(d, 0);
  const auto out = t.step(d, 1);
  EXPECT_EQ(out.matched_count, 3);
  EXPECT_DOUBLE_EQ(out.mean_tracked_iou, 1.0);
  for (const Track& tr : out.tracked) EXPECT_EQ(tr.velocity, Velocity{});
}

TEST(Tracker, IdsUniqueAndDetectionsAccountedFor) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 1000), size(10, 120);
  Tracker t;
  std::set<std::int64_t> seen_ids;
  for (int f = 0; f < 200; ++f) {
    std::vector<Detection> d;
    const int n = static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) d.push_back(det(std::floor(pos(rng) * 0.6), std::floor(pos(rng) * 0.3), size(rng), size(rng)));
    const auto out = t.step(d, f);
    EXPECT_EQ(out.matched_count + out.new_count, n);
    std::set<std::int64_t> ids;
    for (const Track& tr : out.tracked) {
      EXPECT_TRUE(ids.insert(tr.id).second);
      if (tr.age == 0) {
        EXPECT_TRUE(seen_ids.insert(tr.id).second) << "id reused";
      }
    }
  }
}

TEST(Predict, ConstantVelocityStep) {
  Track tr;
  tr.box = BBox(10, 10, 20, 20);
  EXPECT_EQ(predict(tr, 1280, 720), tr.box);
  tr.velocity = {2, 3, 2, 1};
  EXPECT_EQ(predict(tr, 1280, 720), BBox(12, 13, 21, 22));
}

TEST(Predict, FloorsDimensionsAndClamps) {
  Track tr;
  tr.box = BBox(0, 0, 10, 10);
  tr.velocity = {-5, 0, -20, 0};
  const BBox p = predict(tr, 1280, 720);
  EXPECT_DOUBLE_EQ(p.h(), 1.0);
  EXPECT_GE(p.x(), 0.0);
  tr.box = BBox(1270, 700, 10, 20);
  tr.velocity = {30, 30, 0, 0};
  const BBox q = predict(tr, 1280, 720);
  EXPECT_LE(q.right(), 1280.0);
  EXPECT_LE(q.bottom(), 720.0);
}

TEST(GreedyMatch, WorkedExample) {
  // rows t1..t3, cols d1..d3
  const std::vector<double> s = {0.9, 0.6, 0.0,  //
                                 0.0, 0.8, 0.0,  //
                                 0.0, 0.0, 0.2};
  const auto m = greedy_match(s, 3, 3, 0.5);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].row, 0u);
  EXPECT_EQ(m[0].col, 0u);
  EXPECT_EQ(m[1].row, 1u);
  EXPECT_EQ(m[1].col, 1u);
}

TEST(GreedyMatch, EqualsExhaustiveOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t rows = rng() % 5, cols = rng() % 5;
    std::vector<double> s(rows * cols);
    for (double& v : s) v = u(rng) < 0.3 ? 0.0 : u(rng);
    const double thr = u(rng) * 0.6;
    auto got = greedy_match(s, rows, cols, thr);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const Match& m : got) pairs.emplace_back(m.row, m.col);
    std::sort(pairs.begin(), pairs.end());
    EXPECT_EQ(pairs, brute_force(s, rows, cols, thr)) << "trial " << trial;
  }
}
