#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <vector>

#include "ppdnn/core.hpp"
#include "ppdnn/predictor.hpp"

namespace ppdnn {

struct SyncConfig {
  std::size_t queue_size = 1000;
  std::int64_t slop_us = 300'000;

  void validate() const {
    if (queue_size < 1) throw ValidationError("fusion.queue_size must be >= 1");
    if (slop_us < 0) throw ValidationError("fusion.slop_ms must be >= 0");
  }
};

// One task output as seen by the synchronizer. `payload_id` is an opaque
// handle owned by the publisher.
struct FusionMessage {
  TaskId task = TaskId::object_detection;
  std::int64_t frame_seq = 0;
  std::int64_t stamp_us = 0;  // capture time of the source frame
  Provenance provenance = Provenance::inference;
  std::uint64_t payload_id = 0;
};

struct FusionBundle {
  std::uint64_t id = 0;
  PerTask<FusionMessage> messages;
  std::int64_t fused_at_us = 0;

  std::int64_t min_stamp_us() const {
    std::int64_t m = messages[0].stamp_us;
    for (const auto& msg : messages) m = std::min(m, msg.stamp_us);
    return m;
  }
  std::int64_t max_stamp_us() const {
    std::int64_t m = messages[0].stamp_us;
    for (const auto& msg : messages) m = std::max(m, msg.stamp_us);
    return m;
  }
  std::int64_t spread_us() const { return max_stamp_us() - min_stamp_us(); }
  std::int64_t seq_spread() const {
    std::int64_t lo = messages[0].frame_seq, hi = lo;
    for (const auto& msg : messages) {
      lo = std::min(lo, msg.frame_seq);
      hi = std::max(hi, msg.frame_seq);
    }
    return hi - lo;
  }
  std::int64_t fusion_delay_us() const { return fused_at_us - min_stamp_us(); }
};

struct SyncCounters {
  std::uint64_t received = 0;
  std::uint64_t bundled = 0;  // messages consumed by bundles
  std::uint64_t dropped_out_of_order = 0;
  std::uint64_t dropped_overflow = 0;
  std::uint64_t dropped_unmatched = 0;
  std::uint64_t dropped_at_flush = 0;

  std::uint64_t dropped() const {
    return dropped_out_of_order + dropped_overflow + dropped_unmatched + dropped_at_flush;
  }
};

/// Approximate-time synchronizer over the three task streams.
///
/// Greedy pivot policy: the oldest queued message is the pivot; the other
/// streams contribute their message closest in time (ties to the earlier
/// one). The triple fuses when its spread is within the slop. A pivot that
/// can no longer fuse (some stream is already past pivot + slop) is
/// dropped. Not thread-safe; callers serialize push().
class ApproximateTimeSync {
 public:
  explicit ApproximateTimeSync(SyncConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    last_stamp_.fill(std::numeric_limits<std::int64_t>::min());
  }

  std::vector<FusionBundle> push(const FusionMessage& msg, std::int64_t now_us) {
    ++counters_.received;
    auto& q = queues_[index_of(msg.task)];
    if (msg.stamp_us < last_stamp_[index_of(msg.task)]) {
      ++counters_.dropped_out_of_order;
      return {};
    }
    last_stamp_[index_of(msg.task)] = msg.stamp_us;
    q.push_back(msg);
    while (q.size() > cfg_.queue_size) {
      q.pop_front();
      ++counters_.dropped_overflow;
    }
    return drain(now_us);
  }

  /// Discards everything still queued (end of stream).
  void flush() {
    for (auto& q : queues_) {
      counters_.dropped_at_flush += q.size();
      q.clear();
    }
  }

  const SyncCounters& counters() const { return counters_; }
  const SyncConfig& config() const { return cfg_; }

 private:
  std::vector<FusionBundle> drain(std::int64_t now_us) {
    std::vector<FusionBundle> out;
    for (;;) {
      for (const auto& q : queues_)
        if (q.empty()) return out;

      std::size_t pivot_q = 0;
      for (std::size_t i = 1; i < kTaskCount; ++i)
        if (queues_[i].front().stamp_us < queues_[pivot_q].front().stamp_us) pivot_q = i;
      const FusionMessage pivot = queues_[pivot_q].front();

      PerTask<std::size_t> pick{};
      bool unmatchable = false;
      std::int64_t lo = pivot.stamp_us, hi = pivot.stamp_us;
      for (std::size_t i = 0; i < kTaskCount; ++i) {
        if (i == pivot_q) continue;
        const auto& q = queues_[i];
        std::size_t best = 0;
        std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
        for (std::size_t k = 0; k < q.size(); ++k) {
          const std::int64_t gap = q[k].stamp_us > pivot.stamp_us ? q[k].stamp_us - pivot.stamp_us
                                                                   : pivot.stamp_us - q[k].stamp_us;
          if (gap < best_gap) {
            best_gap = gap;
            best = k;
          }
        }
        pick[i] = best;
        lo = std::min(lo, q[best].stamp_us);
        hi = std::max(hi, q[best].stamp_us);
        if (q[best].stamp_us > pivot.stamp_us + cfg_.slop_us) unmatchable = true;
      }

      if (hi - lo <= cfg_.slop_us) {
        FusionBundle b;
        b.id = next_bundle_id_++;
        b.fused_at_us = now_us;
        for (std::size_t i = 0; i < kTaskCount; ++i) {
          auto& q = queues_[i];
          const std::size_t k = i == pivot_q ? 0 : pick[i];
          b.messages[i] = q[k];
          counters_.dropped_unmatched += k;
          q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        }
        counters_.bundled += kTaskCount;
        if (b.spread_us() > cfg_.slop_us) throw InvariantError("fusion: bundle spread exceeds slop");
        out.push_back(b);
        continue;
      }
      if (!unmatchable) return out;
      queues_[pivot_q].pop_front();
      ++counters_.dropped_unmatched;
    }
  }

  SyncConfig cfg_;
  PerTask<std::deque<FusionMessage>> queues_;
  PerTask<std::int64_t> last_stamp_{};
  SyncCounters counters_;
  std::uint64_t next_bundle_id_ = 0;
};

inline void write_fusion_csv_header(std::ostream& os) {
  os << "bundle_id,object_detection_seq,lane_detection_seq,segmentation_seq,object_detection_provenance,"
        "lane_detection_provenance,segmentation_provenance,stamp_spread_ms,seq_spread,fusion_delay_ms\n";
}

}  // namespace ppdnn
