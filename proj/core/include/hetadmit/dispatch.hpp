#pragma once

// Queue manager: per-device admission counters, overflow routing from the
// accelerator queue to the CPU queue, and the device detector that decides
// which queues exist.
//
// A queue's "length" counts admitted, not yet completed queries. It is an
// admission bound on in-flight work, not a buffer: a query that does not fit
// anywhere is answered Busy immediately.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "hetadmit/domain.hpp"

namespace hetadmit {

/// Which queues exist and how deep they are, after device detection.
struct QueueLayout {
  std::optional<std::uint64_t> accelerator_depth;
  std::optional<std::uint64_t> cpu_depth;
  bool heterogeneous_enabled = false;

  friend bool operator==(const QueueLayout&, const QueueLayout&) = default;
};

/// Device detector rules:
///  - one device kind present: a single queue, heterogeneous forced off;
///  - both present, heterogeneous not requested: accelerator queue only;
///  - both present and requested: both queues.
QueueLayout detect_and_plan(const Fleet& fleet, const QueuePlan& plan,
                            bool heterogeneous_requested);

class DeviceQueue {
 public:
  DeviceQueue(DeviceKind kind, std::uint64_t depth_limit) noexcept
      : kind_(kind), depth_limit_(depth_limit) {}

  DeviceQueue(const DeviceQueue&) = delete;
  DeviceQueue& operator=(const DeviceQueue&) = delete;

  struct Attempt {
    bool admitted = false;
    /// Length right after the admission, or the (full) length that blocked it.
    std::uint64_t observed = 0;
  };

  /// Compare-and-increment; never lets length exceed depth_limit.
  Attempt try_admit() noexcept;
  /// Throws Error(UnderflowRelease) when nothing is admitted.
  std::uint64_t release();

  DeviceKind kind() const noexcept { return kind_; }
  std::uint64_t depth_limit() const noexcept { return depth_limit_; }
  std::uint64_t length() const noexcept { return length_.load(std::memory_order_acquire); }
  bool full() const noexcept { return length() >= depth_limit_; }

 private:
  DeviceKind kind_;
  std::uint64_t depth_limit_;
  std::atomic<std::uint64_t> length_{0};
};

class QueueSet {
 public:
  explicit QueueSet(const QueueLayout& layout);

  DeviceQueue* accelerator() noexcept { return accelerator_.get(); }
  DeviceQueue* cpu() noexcept { return cpu_.get(); }
  const DeviceQueue* accelerator() const noexcept { return accelerator_.get(); }
  const DeviceQueue* cpu() const noexcept { return cpu_.get(); }

  /// The queue that is tried first: the accelerator when present.
  DeviceQueue* primary() noexcept { return accelerator_ ? accelerator_.get() : cpu_.get(); }
  DeviceQueue* queue_for(Placement placement) noexcept;

  bool heterogeneous_enabled() const noexcept { return heterogeneous_; }
  const QueueLayout& layout() const noexcept { return layout_; }

 private:
  QueueLayout layout_;
  std::unique_ptr<DeviceQueue> accelerator_;
  std::unique_ptr<DeviceQueue> cpu_;
  bool heterogeneous_ = false;
};

struct DispatchOutcome {
  Placement placement = Placement::Busy;
  std::uint64_t acc_len = 0;
  std::uint64_t cpu_len = 0;
};

/// Routing decision with the queue lengths it was based on.
DispatchOutcome dispatch_observed(QueueSet& queues, bool heterogeneous_enabled) noexcept;

inline Placement dispatch(const Query& /*query*/, QueueSet& queues,
                          bool heterogeneous_enabled) noexcept {
  return dispatch_observed(queues, heterogeneous_enabled).placement;
}

/// Completion side of dispatch. Throws Error(UnderflowRelease) for Busy or an
/// empty queue.
void release(Placement placement, QueueSet& queues);

struct DecisionRecord {
  std::uint64_t id = 0;
  Placement placement = Placement::Busy;
  std::uint64_t acc_len = 0;
  std::uint64_t cpu_len = 0;
  double t = 0.0;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

/// Append-only, thread-safe sink of dispatch decisions.
class DispatchDecisionLog {
 public:
  void append(const DecisionRecord& record);
  std::vector<DecisionRecord> snapshot() const;
  std::size_t size() const;
  /// JSON-lines: {"id":..,"placement":"accelerator|cpu|busy","acc_len":..,"cpu_len":..,"t":..}
  void write_jsonl(std::ostream& out) const;

 private:
  mutable std::mutex mutex_;
  std::vector<DecisionRecord> records_;
};

std::string to_jsonl(const DecisionRecord& record);
DecisionRecord decision_from_jsonl(std::string_view line);

/// Queue manager facade used by the gateway and the simulator.
class Dispatcher {
 public:
  explicit Dispatcher(const QueueLayout& layout, DispatchDecisionLog* log = nullptr)
      : queues_(layout), log_(log) {}

  Placement dispatch(const Query& query);
  void release(Placement placement) { hetadmit::release(placement, queues_); }

  QueueSet& queues() noexcept { return queues_; }
  const QueueSet& queues() const noexcept { return queues_; }

 private:
  QueueSet queues_;
  DispatchDecisionLog* log_;
};

}  // namespace hetadmit
