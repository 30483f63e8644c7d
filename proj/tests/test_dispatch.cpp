#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "ppdnn/dispatch.hpp"

using namespace ppdnn;

namespace {

PerTask<RoiSet> full_rois() {
  PerTask<RoiSet> r;
  for (auto& s : r) s = RoiSet::full(1280, 720);
  return r;
}

PerTask<TaskProgress> busy_state(std::int64_t seq, std::array<std::int64_t, 3> delays, std::int64_t threshold) {
  PerTask<TaskProgress> s;
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    s[i].last_output_seq = seq - delays[i];
    s[i].last_dispatch_seq = seq - 1;
    s[i].outstanding = 1;
    s[i].delay_threshold_frames = threshold;
  }
  return s;
}

ScenarioSnapshot safety(bool on) {
  ScenarioSnapshot s;
  s.safety_critical = on;
  return s;
}

}  // namespace

TEST(ComputeThreshold, Examples) {
  EXPECT_EQ(compute_threshold(200, 30), 6);
  EXPECT_EQ(compute_threshold(1000, 30), 30);
  EXPECT_EQ(compute_threshold(10, 30), 1);
  EXPECT_EQ(compute_threshold(500, 30), 15);
  EXPECT_THROW(compute_threshold(0, 30), ValidationError);
  EXPECT_THROW(compute_threshold(200, 0), ValidationError);
}

TEST(Dispatcher, MissedDeadlineGetsFrameExclusively) {
  auto s = busy_state(100, {1, 1, 1}, 6);
  s[index_of(TaskId::object_detection)].deadline_missed = true;
  Dispatcher disp(s);
  const auto d = disp.dispatch(100, full_rois(), safety(true));
  EXPECT_EQ(d.rule, DispatchRule::deadline_missed);
  EXPECT_TRUE(d.per_task[0].dispatch);
  EXPECT_FALSE(d.per_task[1].dispatch);
  EXPECT_FALSE(d.per_task[2].dispatch);
}

TEST(Dispatcher, SafetyBroadcast) {
  Dispatcher disp(busy_state(100, {50, 50, 50}, 6));
  const auto d = disp.dispatch(100, full_rois(), safety(true));
  EXPECT_EQ(d.rule, DispatchRule::safety_broadcast);
  for (const auto& a : d.per_task) EXPECT_TRUE(a.dispatch);
}

TEST(Dispatcher, DelayThresholdIsStrict) {
  Dispatcher disp(busy_state(100, {7, 2, 6}, 6));
  const auto d = disp.dispatch(100, full_rois(), safety(false));
  EXPECT_EQ(d.rule, DispatchRule::delay_threshold);
  EXPECT_FALSE(d.per_task[0].dispatch);
  EXPECT_TRUE(d.per_task[1].dispatch);
  EXPECT_TRUE(d.per_task[2].dispatch);
  EXPECT_EQ(d.per_task[0].delay, 7);
  EXPECT_EQ(disp.progress(TaskId::lane_detection).last_dispatch_seq, 100);
  EXPECT_EQ(disp.progress(TaskId::object_detection).last_dispatch_seq, 99);
}

TEST(Dispatcher, IdleTaskAlwaysReceives) {
  auto s = busy_state(100, {90, 90, 90}, 6);
  for (auto& p : s) p.outstanding = 0;
  Dispatcher disp(s);
  const auto d = disp.dispatch(100, full_rois(), safety(false));
  for (const auto& a : d.per_task) {
    EXPECT_TRUE(a.dispatch);
    EXPECT_EQ(a.delay, 1);
  }
}

TEST(Dispatcher, DoubleDispatchIsAnInvariantViolation) {
  auto disp = Dispatcher::uniform(500, 30);
  disp.dispatch(0, full_rois(), safety(true));
  EXPECT_THROW(disp.dispatch(0, full_rois(), safety(true)), InvariantError);
}

TEST(Dispatcher, ConstructorRejectsBadState) {
  PerTask<TaskProgress> s;
  s[1].delay_threshold_frames = 0;
  EXPECT_THROW(Dispatcher{s}, ValidationError);
  s = {};
  s[2].last_output_seq = 5;
  EXPECT_THROW(Dispatcher{s}, ValidationError);
}

TEST(RecordCompletion, DeadlineFlagFollowsLatestCompletion) {
  auto disp = Dispatcher::uniform(200, 30);
  disp.dispatch(0, full_rois(), safety(true));
  disp.record_completion(TaskId::segmentation, 0, 0.0, 150.0);
  EXPECT_FALSE(disp.progress(TaskId::segmentation).deadline_missed);

  disp.dispatch(1, full_rois(), safety(true));
  disp.record_completion(TaskId::segmentation, 1, 33.0, 283.0);
  EXPECT_TRUE(disp.progress(TaskId::segmentation).deadline_missed);

  disp.dispatch(2, full_rois(), safety(false));
  disp.record_completion(TaskId::segmentation, 2, 66.0, 100.0);
  EXPECT_FALSE(disp.progress(TaskId::segmentation).deadline_missed);
  EXPECT_EQ(disp.progress(TaskId::segmentation).last_output_seq, 2);
  EXPECT_THROW(disp.record_completion(TaskId::segmentation, 1, 33.0, 300.0), ValidationError);
}

TEST(RecordAbandoned, ReleasesOutstandingWork) {
  auto disp = Dispatcher::uniform(500, 30);
  disp.dispatch(0, full_rois(), safety(true));
  EXPECT_EQ(disp.progress(TaskId::lane_detection).outstanding, 1);
  disp.record_abandoned(TaskId::lane_detection);
  EXPECT_EQ(disp.progress(TaskId::lane_detection).outstanding, 0);
  disp.record_abandoned(TaskId::lane_detection);
  EXPECT_EQ(disp.progress(TaskId::lane_detection).outstanding, 0);
}

// Independent restatement of the routing rules.
TEST(Dispatcher, RandomStatesMatchRuleOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> coin(0, 3);
  for (int trial = 0; trial < 10000; ++trial) {
    PerTask<TaskProgress> s;
    const std::int64_t seq = 50 + static_cast<std::int64_t>(rng() % 1000);
    for (auto& p : s) {
      p.outstanding = static_cast<int>(rng() % 3);
      p.last_output_seq = seq - 1 - static_cast<std::int64_t>(rng() % 40);
      p.last_dispatch_seq = p.last_output_seq + static_cast<std::int64_t>(rng() % (seq - p.last_output_seq));
      p.deadline_missed = coin(rng) == 0;
      p.delay_threshold_frames = 1 + static_cast<std::int64_t>(rng() % 20);
    }
    const bool crit = coin(rng) == 0;
    Dispatcher disp(s);
    const auto d = disp.dispatch(seq, full_rois(), safety(crit));

    const bool any_missed = s[0].deadline_missed || s[1].deadline_missed || s[2].deadline_missed;
    const DispatchRule want_rule =
        any_missed ? DispatchRule::deadline_missed : crit ? DispatchRule::safety_broadcast : DispatchRule::delay_threshold;
    ASSERT_EQ(d.rule, want_rule) << "trial " << trial;
    for (std::size_t i = 0; i < kTaskCount; ++i) {
      const std::int64_t gap = s[i].outstanding > 0 ? seq - s[i].last_output_seq : 1;
      bool want = false;
      if (want_rule == DispatchRule::deadline_missed) want = s[i].deadline_missed;
      else if (want_rule == DispatchRule::safety_broadcast) want = true;
      else want = gap <= s[i].delay_threshold_frames;
      EXPECT_EQ(d.per_task[i].dispatch, want) << "trial " << trial << " task " << i;
      EXPECT_EQ(d.per_task[i].delay, gap);
      if (want_rule == DispatchRule::delay_threshold && d.per_task[i].dispatch) {
        EXPECT_LE(d.per_task[i].delay, s[i].delay_threshold_frames);
      }
      const auto after = disp.progress(kAllTasks[i]);
      EXPECT_EQ(after.last_dispatch_seq, want ? seq : s[i].last_dispatch_seq);
      EXPECT_EQ(after.outstanding, s[i].outstanding + (want ? 1 : 0));
    }
  }
}

TEST(Dispatcher, ConcurrentCallersSeeConsistentState) {
  auto disp = Dispatcher::uniform(500, 30);
  constexpr int kFrames = 2000;
  std::thread producer([&] {
    for (int f = 0; f < kFrames; ++f) disp.dispatch(f, full_rois(), safety(true));
  });
  std::thread consumer([&] {
    for (int i = 0; i < kFrames; ++i) disp.record_abandoned(TaskId::object_detection);
  });
  producer.join();
  consumer.join();
  EXPECT_EQ(disp.progress(TaskId::object_detection).last_dispatch_seq, kFrames - 1);
  EXPECT_GE(disp.progress(TaskId::object_detection).outstanding, 0);
  EXPECT_EQ(disp.progress(TaskId::lane_detection).outstanding, kFrames);
}
