#pragma once

// Deterministic discrete-event simulator of the dispatcher in front of
// synthetic devices that follow the affine latency model.
//
// Semantics:
//  - Admission goes through the real dispatcher (detect_and_plan + dispatch).
//  - Admitted queries are batched greedily: whenever a device worker is free,
//    all pending queries on that device form one batch.
//  - A batch's service latency is alpha * C + beta (+ noise), where C is the
//    device's queue length when the batch starts. It is not re-priced later.
//  - Queries arriving at the same instant join the same batch.

#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "hetadmit/dispatch.hpp"
#include "hetadmit/domain.hpp"

namespace hetadmit {

class SimulatedDevice {
 public:
  SimulatedDevice(DeviceProfile profile, std::uint64_t rng_seed);

  const DeviceProfile& profile() const noexcept { return profile_; }
  std::uint64_t rng_seed() const noexcept { return rng_seed_; }

  /// Latency of one batch executed while `concurrency` queries are in flight.
  /// Exactly the model line when noise_stddev is 0; never negative.
  double sample_batch_latency(std::uint64_t concurrency);

 private:
  DeviceProfile profile_;
  std::uint64_t rng_seed_;
  std::mt19937_64 rng_;
};

/// Holds `concurrency` requests in flight; a new batch is sent only when
/// responses return. `batches` bounds the number of sends to concurrency * batches.
struct ClosedLoop {
  std::uint64_t concurrency = 1;
  std::uint64_t batches = 1;

  friend bool operator==(const ClosedLoop&, const ClosedLoop&) = default;
};

/// Open-loop Poisson arrivals whose rate follows a daily curve: base_rate
/// outside the peak hours, peak_rate inside, raised-cosine ramps of `ramp`
/// seconds on either side of each peak hour.
struct DiurnalOpenLoop {
  double base_rate = 0.0;
  double peak_rate = 0.0;
  std::vector<double> peak_hours;
  double duration = 0.0;
  double ramp = 900.0;

  friend bool operator==(const DiurnalOpenLoop&, const DiurnalOpenLoop&) = default;
};

struct WorkloadSpec {
  std::variant<ClosedLoop, DiurnalOpenLoop> mode = ClosedLoop{};
  std::uint32_t query_length = 75;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

struct SimOptions {
  /// Batches start on multiples of this interval; 0 starts them immediately.
  double tick = 0.0;
  /// Optional sink for every dispatch decision made during the run.
  DispatchDecisionLog* decisions = nullptr;
};

/// Per-device generator seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

SimMetrics simulate(const Fleet& fleet, const QueuePlan& plan, const WorkloadSpec& workload,
                    const Slo& slo, const SimOptions& options = {});

double diurnal_rate(const DiurnalOpenLoop& spec, double t) noexcept;
/// Arrival times in [0, duration), sorted.
std::vector<double> generate_diurnal(const DiurnalOpenLoop& spec, std::uint64_t seed);

/// One closed-loop batch at each concurrency on an idle device.
std::vector<ProfilingSample> measure_latency_curve(SimulatedDevice& device,
                                                   std::span<const std::uint64_t> concurrencies);

/// CPU latency at a different core count: alpha scales with
/// min(reference_cores, knee) / min(cores, knee). Cores beyond the knee add
/// nothing (host memory bandwidth bound).
LatencyModel scale_for_cores(const LatencyModel& reference, std::uint32_t reference_cores,
                             std::uint32_t cores, std::uint32_t knee);

/// Nearest-rank percentile of an unsorted sample; 0 for an empty one.
double percentile(std::vector<double> values, double p);

}  // namespace hetadmit
