#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "ppdnn/predictor.hpp"

using namespace ppdnn;

namespace {

DetectionCache cache_with(Payload p, std::int64_t seq = 0) {
  DetectionCache c;
  c.insert(CacheEntry{seq, 0.0, std::move(p)});
  return c;
}

TrackerOutput tracks(std::vector<BBox> boxes, ClassId c = ClassId::vehicle) {
  TrackerOutput out;
  for (const BBox& b : boxes) {
    Track t;
    t.box = b;
    t.class_id = c;
    t.score = 0.8;
    out.tracked.push_back(t);
  }
  return out;
}

}  // namespace

TEST(PredictBoxes, HighOverlapTakesTrackedBox) {
  const Detection cached{ClassId::pedestrian, BBox(100, 100, 40, 80), 0.93};
  const auto cache = cache_with({cached});
  const Payload same = predict_boxes(cache, tracks({cached.box}));
  ASSERT_EQ(same.size(), 1u);
  EXPECT_EQ(same[0], cached);

  const Payload moved = predict_boxes(cache, tracks({BBox(104, 102, 40, 80)}));
  ASSERT_EQ(moved.size(), 1u);
  EXPECT_EQ(moved[0].box, BBox(104, 102, 40, 80));
  EXPECT_EQ(moved[0].class_id, ClassId::pedestrian);
  EXPECT_DOUBLE_EQ(moved[0].score, 0.93);
}

TEST(PredictBoxes, DisjointTrackIsAppended) {
  const Detection cached{ClassId::vehicle, BBox(0, 0, 50, 50), 0.9};
  const Payload out = predict_boxes(cache_with({cached}), tracks({BBox(500, 500, 30, 30)}, ClassId::bicycle));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], cached);
  EXPECT_EQ(out[1].box, BBox(500, 500, 30, 30));
  EXPECT_EQ(out[1].class_id, ClassId::bicycle);
  EXPECT_DOUBLE_EQ(out[1].score, PredictorConfig{}.predicted_score);
}

TEST(PredictBoxes, MiddleBandKeepsCachedBox) {
  const Detection cached{ClassId::vehicle, BBox(0, 0, 100, 100), 0.9};
  // 30x100 overlap over a 170x100 union: IoU ~0.18.
  const BBox tb(70, 0, 100, 100);
  const double v = iou(tb, cached.box);
  ASSERT_GE(v, 0.1);
  ASSERT_LE(v, 0.5);
  const auto cache = cache_with({cached});
  const Payload kept = predict_boxes(cache, tracks({tb}));
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], cached);

  PredictorConfig cfg;
  cfg.replace_in_middle_band = true;
  const Payload replaced = predict_boxes(cache, tracks({tb}), cfg);
  ASSERT_EQ(replaced.size(), 1u);
  EXPECT_EQ(replaced[0].box, tb);
}

TEST(PredictBoxes, MissedTracksAreIgnored) {
  const Detection cached{ClassId::vehicle, BBox(0, 0, 50, 50), 0.9};
  auto tr = tracks({BBox(600, 600, 30, 30)});
  tr.tracked[0].miss_count = 1;
  EXPECT_EQ(predict_boxes(cache_with({cached}), tr).size(), 1u);
}

TEST(PredictBoxes, NeverDropsCachedDetections) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 1000), sz(5, 200);
  for (int i = 0; i < 500; ++i) {
    Payload cached;
    for (int k = 0; k < static_cast<int>(rng() % 6); ++k)
      cached.push_back(Detection{ClassId::vehicle, BBox(pos(rng), pos(rng), sz(rng), sz(rng)), 0.9});
    std::vector<BBox> tb;
    for (int k = 0; k < static_cast<int>(rng() % 6); ++k) tb.emplace_back(pos(rng), pos(rng), sz(rng), sz(rng));
    const Payload out = predict_boxes(cache_with(cached), tracks(tb));
    ASSERT_GE(out.size(), cached.size());
    for (std::size_t k = 0; k < cached.size(); ++k) {
      EXPECT_EQ(out[k].class_id, cached[k].class_id);
      EXPECT_EQ(out[k].score, cached[k].score);
    }
  }
}

TEST(PredictSegmentation, MatchedExtentsMoveWithTrack) {
  const auto cache = cache_with(from_seg_boxes(std::vector<SegBox>{{ClassId::vehicle, BBox(10, 10, 20, 20)},
                                                                    {ClassId::other, BBox(600, 400, 100, 50)}}));
  auto tr = tracks({BBox(10, 10, 20, 20)});
  tr.tracked[0].velocity = {2, 3, 2, 1};
  const auto out = predict_segmentation(cache, tr, 1280, 720);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].box, BBox(12, 13, 21, 22));
  EXPECT_EQ(out[1].box, BBox(600, 400, 100, 50));

  tr.tracked[0].velocity = {};
  EXPECT_EQ(predict_segmentation(cache, tr, 1280, 720)[0].box, BBox(10, 10, 20, 20));
}

TEST(PredictLanes, NewestEntryAndEviction) {
  DetectionCache c;
  const auto lane = [](double x) { return Payload{Detection{ClassId::other, BBox(x, 400, 20, 300), 1.0}}; };
  c.insert({0, 0.0, lane(1)});
  EXPECT_EQ(predict_lanes(c), lane(1));
  c.insert({1, 33.0, lane(2)});
  EXPECT_EQ(predict_lanes(c), lane(2));
  for (int i = 2; i < 10; ++i) c.insert({i, i * 33.0, lane(i + 1)});
  ASSERT_EQ(c.size(), 10u);
  EXPECT_EQ(c.entries().front().frame_seq, 0);
  c.insert({10, 330.0, lane(3)});
  EXPECT_EQ(c.size(), 10u);
  EXPECT_EQ(c.entries().front().frame_seq, 1);
  EXPECT_EQ(predict_lanes(c), lane(3));
}

TEST(DetectionCache, Errors) {
  DetectionCache c;
  try {
    predict_lanes(c);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no critical detection cached");
  }
  EXPECT_THROW(predict_boxes(c, {}), ValidationError);
  EXPECT_THROW(predict_segmentation(c, {}, 1280, 720), ValidationError);
  EXPECT_THROW(DetectionCache{0}, ValidationError);
  c.insert({5, 0.0, {}});
  EXPECT_THROW(c.insert({5, 0.0, {}}), ValidationError);
}

TEST(SharedDetectionCache, SnapshotsAreStable) {
  SharedDetectionCache shared(4);
  shared.insert({0, 0.0, {}});
  const auto before = shared.snapshot();
  shared.insert({1, 33.0, {}});
  EXPECT_EQ(before->size(), 1u);
  EXPECT_EQ(shared.snapshot()->size(), 2u);

  std::thread writer([&] {
    for (int i = 2; i < 2000; ++i) shared.insert({i, i * 33.0, {}});
  });
  for (int i = 0; i < 2000; ++i) {
    const auto snap = shared.snapshot();
    const auto& e = snap->entries();
    for (std::size_t k = 1; k < e.size(); ++k) ASSERT_EQ(e[k].frame_seq, e[k - 1].frame_seq + 1);
  }
  writer.join();
  EXPECT_EQ(shared.snapshot()->newest().frame_seq, 1999);
}
