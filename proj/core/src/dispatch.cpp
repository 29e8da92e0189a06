#include "hetadmit/dispatch.hpp"

#include <ostream>

#include <nlohmann/json.hpp>

namespace hetadmit {

QueueLayout detect_and_plan(const Fleet& fleet, const QueuePlan& plan,
                            bool heterogeneous_requested) {
  const bool has_accelerator = fleet.primary_accelerator() != nullptr;
  const bool has_cpu = fleet.offload_cpu() != nullptr;
  if (!has_accelerator && !has_cpu) {
    throw Error(Errc::NoDevices, "device detector found no usable devices");
  }

  QueueLayout layout;
  if (has_accelerator && has_cpu) {
    layout.accelerator_depth = plan.accelerator_depth;
    if (heterogeneous_requested) {
      layout.cpu_depth = plan.cpu_depth;
      layout.heterogeneous_enabled = true;
    }
  } else if (has_accelerator) {
    layout.accelerator_depth = plan.accelerator_depth;
  } else {
    layout.cpu_depth = plan.cpu_depth;
  }
  return layout;
}

DeviceQueue::Attempt DeviceQueue::try_admit() noexcept {
  auto current = length_.load(std::memory_order_acquire);
  while (current < depth_limit_) {
    if (length_.compare_exchange_weak(current, current + 1, std::memory_order_acq_rel,
                                      std::memory_order_acquire)) {
      return {true, current + 1};
    }
  }
  return {false, current};
}

std::uint64_t DeviceQueue::release() {
  auto current = length_.load(std::memory_order_acquire);
  while (true) {
    if (current == 0) {
      throw Error(Errc::UnderflowRelease,
                  std::string("release on empty ") + std::string(to_string(kind_)) + " queue");
    }
    if (length_.compare_exchange_weak(current, current - 1, std::memory_order_acq_rel,
                                      std::memory_order_acquire)) {
      return current - 1;
    }
  }
}

QueueSet::QueueSet(const QueueLayout& layout)
    : layout_(layout), heterogeneous_(layout.heterogeneous_enabled) {
  if (layout.accelerator_depth) {
    accelerator_ = std::make_unique<DeviceQueue>(DeviceKind::Accelerator, *layout.accelerator_depth);
  }
  if (layout.cpu_depth) {
    cpu_ = std::make_unique<DeviceQueue>(DeviceKind::Cpu, *layout.cpu_depth);
  }
  if (!accelerator_ && !cpu_) throw Error(Errc::NoDevices, "queue layout has no queues");
}

DeviceQueue* QueueSet::queue_for(Placement placement) noexcept {
  switch (placement) {
    case Placement::Accelerator: return accelerator_.get();
    case Placement::Cpu: return cpu_.get();
    case Placement::Busy: return nullptr;
  }
  return nullptr;
}

DispatchOutcome dispatch_observed(QueueSet& queues, bool heterogeneous_enabled) noexcept {
  DispatchOutcome out;
  DeviceQueue* primary = queues.primary();
  DeviceQueue* accel = queues.accelerator();
  DeviceQueue* cpu = queues.cpu();

  const auto first = primary->try_admit();
  if (first.admitted) {
    out.placement = placement_for(primary->kind());
    if (primary == accel) {
      out.acc_len = first.observed;
      out.cpu_len = cpu ? cpu->length() : 0;
    } else {
      out.cpu_len = first.observed;
    }
    return out;
  }

  if (primary == cpu) {
    out.cpu_len = first.observed;
    return out;  // lone CPU queue is full
  }

  out.acc_len = first.observed;
  if (heterogeneous_enabled && cpu != nullptr) {
    const auto overflow = cpu->try_admit();
    out.cpu_len = overflow.observed;
    if (overflow.admitted) out.placement = Placement::Cpu;
  } else {
    out.cpu_len = cpu ? cpu->length() : 0;
  }
  return out;
}

void release(Placement placement, QueueSet& queues) {
  DeviceQueue* queue = queues.queue_for(placement);
  if (queue == nullptr) {
    throw Error(Errc::UnderflowRelease,
                std::string("release without a matching admission (") +
                    std::string(to_string(placement)) + ")");
  }
  queue->release();
}

void DispatchDecisionLog::append(const DecisionRecord& record) {
  std::lock_guard lock(mutex_);
  records_.push_back(record);
}

std::vector<DecisionRecord> DispatchDecisionLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t DispatchDecisionLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

void DispatchDecisionLog::write_jsonl(std::ostream& out) const {
  for (const auto& r : snapshot()) out << to_jsonl(r) << '\n';
}

std::string to_jsonl(const DecisionRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["placement"] = to_string(record.placement);
  j["acc_len"] = record.acc_len;
  j["cpu_len"] = record.cpu_len;
  j["t"] = record.t;
  return j.dump();
}

DecisionRecord decision_from_jsonl(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    DecisionRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.placement = parse_placement(j.at("placement").get<std::string>());
    r.acc_len = j.at("acc_len").get<std::uint64_t>();
    r.cpu_len = j.at("cpu_len").get<std::uint64_t>();
    r.t = j.at("t").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("decision record: ") + e.what());
  }
}

Placement Dispatcher::dispatch(const Query& query) {
  const auto outcome = dispatch_observed(queues_, queues_.heterogeneous_enabled());
  if (log_ != nullptr) {
    log_->append({query.id, outcome.placement, outcome.acc_len, outcome.cpu_len,
                  query.arrival_time});
  }
  return outcome.placement;
}

}  // namespace hetadmit
