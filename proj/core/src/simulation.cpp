#include "hetadmit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

namespace hetadmit {

SimulatedDevice::SimulatedDevice(DeviceProfile profile, std::uint64_t rng_seed)
    : profile_(std::move(profile)), rng_seed_(rng_seed), rng_(rng_seed) {
  profile_.validate();
}

double SimulatedDevice::sample_batch_latency(std::uint64_t concurrency) {
  double latency = profile_.latency.predict(static_cast<double>(concurrency));
  if (profile_.noise_stddev > 0.0) {
    std::normal_distribution<double> noise(0.0, profile_.noise_stddev);
    latency = std::max(0.0, latency + noise(rng_));
  }
  if (profile_.outlier_fraction > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng_) < profile_.outlier_fraction) latency *= 3.0;
  }
  return latency;
}

void WorkloadSpec::validate() const {
  if (query_length < 1) throw Error(Errc::InvalidArgument, "query_length must be >= 1");
  if (const auto* closed = std::get_if<ClosedLoop>(&mode)) {
    if (closed->concurrency < 1) {
      throw Error(Errc::InvalidArgument, "closed-loop concurrency must be >= 1");
    }
    return;
  }
  const auto& d = std::get<DiurnalOpenLoop>(mode);
  if (!(d.base_rate >= 0.0) || !(d.peak_rate >= 0.0) || !std::isfinite(d.base_rate) ||
      !std::isfinite(d.peak_rate)) {
    throw Error(Errc::InvalidArgument, "arrival rates must be finite and >= 0");
  }
  if (!(d.duration >= 0.0) || !std::isfinite(d.duration)) {
    throw Error(Errc::InvalidArgument, "duration must be finite and >= 0");
  }
  if (!(d.ramp >= 0.0)) throw Error(Errc::InvalidArgument, "ramp must be >= 0");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  // splitmix64 finaliser over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

namespace {

enum class EventKind : int { Completion = 0, Arrival = 1, BatchStart = 2 };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t seq = 0;
  std::size_t device = 0;       // Completion, BatchStart
  std::uint64_t query = 0;      // Arrival
  std::vector<std::uint64_t> batch;  // Completion

  bool operator>(const Event& other) const noexcept {
    if (time != other.time) return time > other.time;
    if (kind != other.kind) return static_cast<int>(kind) > static_cast<int>(other.kind);
    return seq > other.seq;
  }
};

struct DeviceState {
  SimulatedDevice device;
  DeviceQueue* queue = nullptr;
  Placement placement = Placement::Busy;
  std::deque<std::uint64_t> pending;
  std::uint32_t busy_workers = 0;
  bool start_scheduled = false;
  std::uint64_t max_length = 0;
};

struct QueryState {
  double arrival = 0.0;
};

class Engine {
 public:
  Engine(const Fleet& fleet, const QueuePlan& plan, const WorkloadSpec& workload,
         const Slo& slo, const SimOptions& options)
      : layout_(detect_and_plan(fleet, plan, plan.heterogeneous_enabled)),
        queues_(layout_),
        workload_(workload),
        slo_(slo),
        options_(options) {
    if (queues_.accelerator() != nullptr) {
      add_device(*fleet.primary_accelerator(), queues_.accelerator(), Placement::Accelerator, 0);
    }
    if (queues_.cpu() != nullptr) {
      add_device(*fleet.offload_cpu(), queues_.cpu(), Placement::Cpu, 1);
    }
  }

  SimMetrics run() {
    if (const auto* closed = std::get_if<ClosedLoop>(&workload_.mode)) {
      closed_ = true;
      send_budget_ = closed->concurrency * closed->batches;
      send(0.0, closed->concurrency);
    } else {
      const auto arrivals = generate_diurnal(std::get<DiurnalOpenLoop>(workload_.mode),
                                             derive_seed(workload_.seed, 100));
      for (double t : arrivals) push_arrival(t);
    }

    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::Arrival: on_arrival(ev.query); break;
        case EventKind::BatchStart: on_batch_start(ev.device); break;
        case EventKind::Completion: on_completion(ev.device, ev.batch); break;
      }
    }
    return finish();
  }

 private:
  void add_device(const DeviceProfile& profile, DeviceQueue* queue, Placement placement,
                  std::uint64_t stream) {
    devices_.push_back(DeviceState{SimulatedDevice(profile, derive_seed(workload_.seed, stream)),
                                   queue, placement, {}, 0, false, 0});
  }

  void push(Event ev) {
    ev.seq = next_seq_++;
    events_.push(std::move(ev));
  }

  void push_arrival(double t) {
    const auto id = static_cast<std::uint64_t>(queries_.size());
    queries_.push_back({t});
    Event ev;
    ev.time = t;
    ev.kind = EventKind::Arrival;
    ev.query = id;
    push(std::move(ev));
  }

  void send(double t, std::uint64_t count) {
    const auto n = std::min(count, send_budget_);
    send_budget_ -= n;
    for (std::uint64_t i = 0; i < n; ++i) push_arrival(t);
  }

  std::size_t device_index(Placement placement) const {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (devices_[i].placement == placement) return i;
    }
    return devices_.size();
  }

  double next_start(double t) const {
    if (options_.tick <= 0.0) return t;
    const double k = std::ceil(t / options_.tick - 1e-12);
    return std::max(t, k * options_.tick);
  }

  void schedule_start(std::size_t d) {
    auto& dev = devices_[d];
    if (dev.start_scheduled || dev.pending.empty() ||
        dev.busy_workers >= dev.device.profile().worker_count) {
      return;
    }
    dev.start_scheduled = true;
    Event ev;
    ev.time = next_start(now_);
    ev.kind = EventKind::BatchStart;
    ev.device = d;
    push(std::move(ev));
  }

  void on_arrival(std::uint64_t id) {
    const Query query{id, workload_.query_length, now_};
    const auto outcome = dispatch_observed(queues_, queues_.heterogeneous_enabled());
    if (options_.decisions != nullptr) {
      options_.decisions->append(
          {query.id, outcome.placement, outcome.acc_len, outcome.cpu_len, now_});
    }
    if (outcome.placement == Placement::Busy) {
      ++rejected_;
      if (closed_) ++waiting_slots_;
      return;
    }
    const auto d = device_index(outcome.placement);
    auto& dev = devices_[d];
    dev.pending.push_back(id);
    dev.max_length = std::max(dev.max_length, dev.queue->length());
    schedule_start(d);
  }

  void on_batch_start(std::size_t d) {
    auto& dev = devices_[d];
    dev.start_scheduled = false;
    if (dev.pending.empty() || dev.busy_workers >= dev.device.profile().worker_count) return;

    std::vector<std::uint64_t> batch(dev.pending.begin(), dev.pending.end());
    dev.pending.clear();
    const double latency = dev.device.sample_batch_latency(dev.queue->length());
    ++dev.busy_workers;

    Event ev;
    ev.time = now_ + latency;
    ev.kind = EventKind::Completion;
    ev.device = d;
    ev.batch = std::move(batch);
    push(std::move(ev));
  }

  void on_completion(std::size_t d, const std::vector<std::uint64_t>& batch) {
    auto& dev = devices_[d];
    --dev.busy_workers;
    for (auto id : batch) {
      release(dev.placement, queues_);
      const double latency = now_ - queries_[id].arrival;
      latencies_.push_back(latency);
      if (!slo_.met_by(latency)) ++violations_;
      if (dev.placement == Placement::Accelerator) {
        ++accepted_accelerator_;
      } else {
        ++accepted_cpu_;
      }
    }
    last_completion_ = std::max(last_completion_, now_);
    schedule_start(d);

    if (closed_) {
      const auto slots = batch.size() + waiting_slots_;
      waiting_slots_ = 0;
      send(now_, slots);
    }
  }

  SimMetrics finish() const {
    SimMetrics m;
    m.accepted = accepted_accelerator_ + accepted_cpu_;
    m.accepted_accelerator = accepted_accelerator_;
    m.accepted_cpu = accepted_cpu_;
    m.rejected_busy = rejected_;
    m.slo_violations = violations_;
    for (const auto& dev : devices_) {
      m.max_observed_concurrency[dev.device.profile().name] = dev.max_length;
    }
    m.latency_p50 = percentile(latencies_, 0.50);
    m.latency_p99 = percentile(latencies_, 0.99);
    m.latency_max = latencies_.empty() ? 0.0
                                       : *std::max_element(latencies_.begin(), latencies_.end());
    const double first_arrival = queries_.empty() ? 0.0 : queries_.front().arrival;
    m.duration = m.accepted > 0 ? last_completion_ - first_arrival : 0.0;
    m.throughput = m.duration > 0.0 ? static_cast<double>(m.accepted) / m.duration : 0.0;
    return m;
  }

  QueueLayout layout_;
  QueueSet queues_;
  const WorkloadSpec& workload_;
  Slo slo_;
  SimOptions options_;

  std::vector<DeviceState> devices_;
  std::vector<QueryState> queries_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;

  bool closed_ = false;
  std::uint64_t send_budget_ = 0;
  std::uint64_t waiting_slots_ = 0;

  std::vector<double> latencies_;
  std::uint64_t rejected_ = 0;
  std::uint64_t violations_ = 0;
  std::uint64_t accepted_accelerator_ = 0;
  std::uint64_t accepted_cpu_ = 0;
  double last_completion_ = 0.0;
};

}  // namespace

SimMetrics simulate(const Fleet& fleet, const QueuePlan& plan, const WorkloadSpec& workload,
                    const Slo& slo, const SimOptions& options) {
  workload.validate();
  if (options.tick < 0.0) throw Error(Errc::InvalidArgument, "tick must be >= 0");
  Engine engine(fleet, plan, workload, slo, options);
  return engine.run();
}

std::vector<ProfilingSample> measure_latency_curve(SimulatedDevice& device,
                                                   std::span<const std::uint64_t> concurrencies) {
  std::vector<ProfilingSample> samples;
  samples.reserve(concurrencies.size());
  for (auto c : concurrencies) {
    if (c < 1) throw Error(Errc::InvalidArgument, "profiling concurrency must be >= 1");
    // Every query of the batch shares the batch latency, so it is also the mean.
    samples.push_back({c, device.sample_batch_latency(c)});
  }
  return samples;
}

LatencyModel scale_for_cores(const LatencyModel& reference, std::uint32_t reference_cores,
                             std::uint32_t cores, std::uint32_t knee) {
  if (reference_cores == 0 || cores == 0 || knee == 0) {
    throw Error(Errc::InvalidArgument, "core counts and knee must be >= 1");
  }
  const double effective_ref = std::min(reference_cores, knee);
  const double effective = std::min(cores, knee);
  return LatencyModel(reference.alpha() * effective_ref / effective, reference.beta());
}

}  // namespace hetadmit
