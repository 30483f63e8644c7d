#include <gtest/gtest.h>

#include <random>

#include "ppdnn/eval.hpp"

using namespace ppdnn;

namespace {

Detection det(double x, double y, double w, double h, double score = 0.9) {
  return Detection{ClassId::vehicle, BBox(x, y, w, h), score};
}

// Detected iff the first highest-IoU online box overlaps by more than 0.5
// and is itself confident.
bool oracle_detected(const std::vector<Detection>& online, const Detection& d) {
  double best = 0;
  const Detection* arg = nullptr;
  for (const Detection& o : online) {
    const double v = iou(o.box, d.box);
    if (v > best) {
      best = v;
      arg = &o;
    }
  }
  return arg && best > 0.5 && arg->score > 0.5;
}

std::pair<std::int64_t, std::int64_t> oracle_counts(const CompletenessInput& in, const std::vector<std::size_t>& keys) {
  std::int64_t objects = 0, detected = 0;
  for (std::size_t i = 0; i < in.offline.size(); ++i) {
    const std::vector<Detection> empty;
    const auto& online = in.keyframes.empty() ? empty : in.keyframes[keys[i]].detections;
    for (const Detection& d : in.offline[i].detections) {
      if (d.score <= 0.5) continue;
      ++objects;
      detected += oracle_detected(online, d);
    }
  }
  return {objects, detected};
}

// Catch-up: the first keyframe at or after the offline time, found by
// bisection, or the last keyframe.
std::vector<std::size_t> bisect_keys(const CompletenessInput& in) {
  std::vector<std::size_t> keys;
  const std::size_t n = in.keyframes.size();
  for (const auto& f : in.offline) {
    std::size_t lo = 0, hi = n;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (in.keyframes[mid].t_us < f.t_us) lo = mid + 1;
      else hi = mid;
    }
    keys.push_back(n == 0 ? 0 : std::min(lo, n - 1));
  }
  return keys;
}

// Single step: k_i = k_{i-1} + 1 when the offline time has passed keyframe
// k_{i-1} and another keyframe exists.
std::vector<std::size_t> recurrence_keys(const CompletenessInput& in) {
  std::vector<std::size_t> keys;
  std::size_t k = 0;
  for (const auto& f : in.offline) {
    const bool behind = !in.keyframes.empty() && f.t_us > in.keyframes[k].t_us;
    k += (behind && k + 1 < in.keyframes.size()) ? 1 : 0;
    keys.push_back(k);
  }
  return keys;
}

CompletenessInput random_instance(std::mt19937_64& rng, std::int64_t shift = 0) {
  CompletenessInput in;
  auto rand_det = [&](std::int64_t base_x) {
    const double x = static_cast<double>(base_x + static_cast<std::int64_t>(rng() % 40));
    const double y = static_cast<double>(rng() % 40);
    const double score = static_cast<double>(rng() % 10) / 10.0 + 0.05;
    return det(x + static_cast<double>(shift), y + static_cast<double>(shift), 10 + static_cast<double>(rng() % 20),
               10 + static_cast<double>(rng() % 20), score);
  };
  const int nk = static_cast<int>(rng() % 8), no = 1 + static_cast<int>(rng() % 12);
  std::int64_t t = 0;
  for (int i = 0; i < nk; ++i) {
    t += static_cast<std::int64_t>(rng() % 200'000);
    TimedDetections td{t, {}};
    for (int k = 0; k < static_cast<int>(rng() % 5); ++k) td.detections.push_back(rand_det(static_cast<std::int64_t>(rng() % 3) * 15));
    in.keyframes.push_back(td);
  }
  t = 0;
  for (int i = 0; i < no; ++i) {
    t += static_cast<std::int64_t>(rng() % 150'000);
    TimedDetections td{t, {}};
    for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k) td.detections.push_back(rand_det(static_cast<std::int64_t>(rng() % 3) * 15));
    in.offline.push_back(td);
  }
  return in;
}

}  // namespace

TEST(DetectionCompleteness, IdenticalResultsScoreOne) {
  CompletenessInput in;
  for (int i = 0; i < 10; ++i) {
    TimedDetections f{i * 33'333, {det(10.0 * i, 5, 30, 30), det(400, 200, 50, 60, 0.7)}};
    in.keyframes.push_back(f);
    in.offline.push_back(f);
  }
  EXPECT_DOUBLE_EQ(detection_completeness(in), 1.0);
  EXPECT_DOUBLE_EQ(detection_completeness(in, AdvancePolicy::catch_up), 1.0);
}

TEST(DetectionCompleteness, HalfFound) {
  const Detection a = det(0, 0, 50, 50), b = det(300, 300, 50, 50);
  CompletenessInput in;
  in.offline.push_back({0, {a, b}});
  in.keyframes.push_back({0, {a}});
  EXPECT_DOUBLE_EQ(detection_completeness(in), 0.5);
}

TEST(DetectionCompleteness, LowConfidenceKeyframesFindNothing) {
  const Detection a = det(0, 0, 50, 50), b = det(300, 300, 50, 50);
  CompletenessInput in;
  in.offline.push_back({0, {a, b}});
  in.keyframes.push_back({0, {det(0, 0, 50, 50, 0.4), det(300, 300, 50, 50, 0.4)}});
  EXPECT_DOUBLE_EQ(detection_completeness(in), 0.0);
}

TEST(DetectionCompleteness, Errors) {
  CompletenessInput in;
  in.offline.push_back({0, {det(0, 0, 10, 10, 0.3)}});
  try {
    detection_completeness(in);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no scorable objects");
  }
  in.offline.push_back({-5, {}});
  EXPECT_THROW(detection_completeness(in), ValidationError);
}

TEST(DetectionCompleteness, EmptyKeyframesCountAsMissed) {
  CompletenessInput in;
  in.offline.push_back({0, {det(0, 0, 10, 10)}});
  EXPECT_DOUBLE_EQ(detection_completeness(in), 0.0);
  EXPECT_EQ(max_iou({}, BBox(0, 0, 1, 1)).index, -1);
}

TEST(DetectionCompleteness, SingleStepLagsBehindDenseKeyframes) {
  // Keyframes every 10 ms, offline frames at 25 and 40 ms: one step per
  // offline frame leaves the cursor on keyframes 1 and 2, catching up
  // reaches keyframe 3.
  const Detection stale = det(0, 0, 20, 20), fresh = det(500, 500, 20, 20);
  CompletenessInput in;
  in.keyframes = {{0, {stale}}, {10'000, {stale}}, {20'000, {stale}}, {30'000, {fresh}}};
  in.offline = {{25'000, {fresh}}, {40'000, {fresh}}};
  EXPECT_DOUBLE_EQ(detection_completeness(in, AdvancePolicy::single_step), 0.0);
  EXPECT_DOUBLE_EQ(detection_completeness(in, AdvancePolicy::catch_up), 1.0);
}

TEST(DetectionCompleteness, MatchesOraclesOnRandomInstances) {
  std::mt19937_64 rng(1234);
  int scored = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const CompletenessInput in = random_instance(rng);
    const auto caught = completeness_counts(in, AdvancePolicy::catch_up);
    const auto [objects, detected] = oracle_counts(in, bisect_keys(in));
    EXPECT_EQ(caught.objects, objects) << "trial " << trial;
    EXPECT_EQ(caught.detected, detected) << "trial " << trial;

    const auto literal = completeness_counts(in, AdvancePolicy::single_step);
    const auto [objects2, detected2] = oracle_counts(in, recurrence_keys(in));
    EXPECT_EQ(literal.objects, objects2) << "trial " << trial;
    EXPECT_EQ(literal.detected, detected2) << "trial " << trial;
    scored += objects > 0;
  }
  EXPECT_GT(scored, 150);
}

TEST(DetectionCompleteness, TranslationInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const auto base = completeness_counts(random_instance(a));
    const auto moved = completeness_counts(random_instance(b, 37));
    EXPECT_EQ(base.objects, moved.objects);
    EXPECT_EQ(base.detected, moved.detected);
  }
}

TEST(CostEffectiveness, Examples) {
  EXPECT_DOUBLE_EQ(cost_effectiveness(100, 1.0, 1.0), 100.0);
  const double avg = (0.147 + 0.643 + 0.339) / 3;
  EXPECT_NEAR(avg, 0.3763, 1e-4);
  EXPECT_NEAR(cost_effectiveness(1988.8, 0.086, avg), 61450, 100);
  EXPECT_DOUBLE_EQ(cost_effectiveness(50, 0.4, 0.7), cost_effectiveness(100, 0.4, 0.7) / 2);
  EXPECT_THROW(cost_effectiveness(100, 0.0, 1.0), ValidationError);
  EXPECT_THROW(cost_effectiveness(100, 1.0, 0.0), ValidationError);
}

TEST(CostEffectiveness, Monotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 1.0), lat(1, 5000);
  for (int i = 0; i < 1000; ++i) {
    const double l = lat(rng), r = u(rng), d = u(rng);
    const double base = cost_effectiveness(l, r, d);
    EXPECT_LT(cost_effectiveness(l, r * 1.01, d), base);
    EXPECT_LT(cost_effectiveness(l, r, d * 1.01), base);
    EXPECT_GT(cost_effectiveness(l * 1.01, r, d), base);
  }
}

TEST(DelayStats, Examples) {
  const DelayStats one = delay_stats({100});
  EXPECT_EQ(one.mean, 100);
  EXPECT_EQ(one.p50, 100);
  EXPECT_EQ(one.p99, 100);
  EXPECT_EQ(one.range, 0);

  std::vector<double> hundred;
  for (int i = 100; i >= 1; --i) hundred.push_back(i);
  const DelayStats h = delay_stats(hundred);
  EXPECT_EQ(h.p99, 99);
  EXPECT_EQ(h.p50, 50);
  EXPECT_DOUBLE_EQ(h.mean, 50.5);

  const DelayStats b = delay_stats({900, 432, 1500, 2072, 1100});
  EXPECT_EQ(b.min, 432);
  EXPECT_EQ(b.max, 2072);
  EXPECT_EQ(b.range, 1640);
  EXPECT_THROW(delay_stats({}), ValidationError);
}

TEST(DelayStats, OrderingHolds) {
  std::mt19937_64 rng(10);
  std::exponential_distribution<double> e(0.01);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng() % 300);
    for (double& x : v) x = e(rng);
    const DelayStats s = delay_stats(v);
    EXPECT_GE(s.p99, s.p50);
    EXPECT_GE(s.p50, s.min);
    EXPECT_LE(s.p99, s.max);
    EXPECT_DOUBLE_EQ(s.range, s.max - s.min);
    EXPECT_EQ(s.count, v.size());
  }
}

TEST(Metrics, FromSimulatedRun) {
  const Trace trace = generate(builtin_scenario("crossing", 0), 0);
  SimConfig cfg;
  cfg.mode = Mode::ppdnn;
  const SimReport rep = run(trace, cfg);
  const MetricsSummary m = compute_metrics(run_data(rep), &trace);
  EXPECT_DOUBLE_EQ(m.fusion_percent(), rep.fusion_percent());
  ASSERT_TRUE(m.delay.has_value());
  ASSERT_TRUE(m.avg_dc.has_value());
  for (TaskId t : kAllTasks) {
    ASSERT_TRUE(m.dc[index_of(t)].has_value());
    EXPECT_GE(*m.dc[index_of(t)], 0.0);
    EXPECT_LE(*m.dc[index_of(t)], 1.0);
  }
  ASSERT_TRUE(m.cost_effectiveness.has_value());
  EXPECT_NEAR(*m.cost_effectiveness, m.delay->mean / (m.fusion_ratio * *m.avg_dc), 1e-9);

  const MetricsSummary bare = compute_metrics(run_data(rep), nullptr);
  EXPECT_FALSE(bare.avg_dc.has_value());
  EXPECT_FALSE(bare.cost_effectiveness.has_value());
}

TEST(Metrics, RunDirectoryRoundTrip) {
  const Trace trace = generate(builtin_scenario("highway", 1), 1);
  SimConfig cfg;
  cfg.mode = Mode::fd;
  const SimReport rep = run(trace, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "ppdnn_eval_roundtrip";
  std::filesystem::remove_all(dir);
  write_report(dir, rep);
  const RunData disk = read_run_dir(dir);
  const RunData mem = run_data(rep);
  EXPECT_EQ(disk.mode, mem.mode);
  EXPECT_EQ(disk.trace_hash, mem.trace_hash);
  EXPECT_EQ(disk.frame_count, mem.frame_count);
  EXPECT_EQ(disk.bundles, mem.bundles);
  EXPECT_EQ(disk.processed, mem.processed);
  EXPECT_EQ(disk.published.size(), mem.published.size());
  const auto a = compute_metrics(disk, &trace), b = compute_metrics(mem, &trace);
  EXPECT_NEAR(*a.avg_dc, *b.avg_dc, 1e-12);
  EXPECT_NEAR(a.delay->mean, b.delay->mean, 1e-3);
  write_metrics(dir, a, disk);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cdf_fusion_delay.csv"));
  std::filesystem::remove_all(dir);
}
