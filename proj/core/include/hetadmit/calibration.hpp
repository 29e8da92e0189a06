#pragma once

// Queue-depth calibration: fit t = alpha * C + beta from profiling samples,
// derive the largest SLO-feasible concurrency per device, the incremental
// stress-test alternative, and collaborative fine-tuning in simulation.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hetadmit/domain.hpp"
#include "hetadmit/simulation.hpp"

namespace hetadmit {

inline constexpr std::uint64_t kDefaultConcurrencyCap = 4096;

struct FitResult {
  LatencyModel model;
  double r_squared = 0.0;
  std::size_t sample_count = 0;
  /// Set when the unconstrained fit had a negative alpha or beta.
  bool clamped = false;
  /// Standard errors of the unconstrained OLS coefficients (0 with 2 samples).
  double alpha_stderr = 0.0;
  double beta_stderr = 0.0;
};

/// Ordinary least squares over (concurrency, latency) with alpha, beta >= 0.
/// A negative slope is replaced by the best flat line, a negative intercept by
/// the best line through the origin.
FitResult fit_latency_model(std::span<const ProfilingSample> samples);

struct ConcurrencyEstimate {
  std::uint64_t depth = 0;
  /// True when the depth is the hard cap rather than an SLO bound.
  bool unbounded = false;

  friend bool operator==(const ConcurrencyEstimate&, const ConcurrencyEstimate&) = default;
};

/// Largest C with model(C) <= T and model(C + 1) > T; 0 when C = 1 already
/// misses the SLO.
ConcurrencyEstimate estimate_max_concurrency(const LatencyModel& model, const Slo& slo,
                                             std::uint64_t hard_cap = kDefaultConcurrencyCap);

/// Real-valued concurrency (T - beta) / alpha at which the line reaches T.
double continuous_concurrency(const LatencyModel& model, double slo_seconds);

/// Depths for every dispatch device of the fleet.
QueuePlan estimate_plan(const Fleet& fleet, const Slo& slo, bool heterogeneous,
                        std::uint64_t hard_cap = kDefaultConcurrencyCap);

struct StressProbe {
  std::uint64_t concurrency = 0;
  double latency = 0.0;
  bool passed = false;
};

struct StressResult {
  std::uint64_t depth = 0;
  std::vector<StressProbe> probes;
};

struct StressOptions {
  std::uint64_t hard_cap = kDefaultConcurrencyCap;
  /// Batches per probe; the slowest one decides.
  std::uint32_t repeats = 1;
};

/// Probes step, 2*step, ... until the measured latency exceeds the SLO and
/// returns the last passing probe. Coarse steps under-report: the true
/// maximum may lie anywhere in the last skipped interval.
/// Throws Error(DeviceInfeasible) when the first probe fails.
StressResult run_stress_test(SimulatedDevice& device, const Slo& slo, std::uint64_t step,
                             const StressOptions& options = {});

struct FineTuneOptions {
  /// Latency offsets added to beta while devices run collaboratively; models
  /// contention (positive) or relief (negative) that standalone profiling misses.
  double accelerator_offset = 0.0;
  double cpu_offset = 0.0;
  std::uint64_t batches = 3;
  std::uint64_t seed = 0;
};

/// Grid search over [depth - radius, depth + radius] per device with
/// collaborative closed-loop simulation. Keeps the plan with the largest total
/// depth and zero SLO violations; ties prefer a deeper accelerator queue, then
/// a shallower CPU queue. Throws Error(NoFeasiblePlan).
QueuePlan fine_tune_depths(const QueuePlan& initial, const Fleet& fleet, const Slo& slo,
                           std::uint64_t search_radius, const FineTuneOptions& options = {});

struct ProfilingSchedule {
  std::vector<std::uint64_t> pilot{1, 16};
  std::size_t points = 6;
  std::uint64_t hard_cap = kDefaultConcurrencyCap;
};

/// `points` distinct integers spread geometrically over [1, upper].
std::vector<std::uint64_t> geometric_schedule(std::uint64_t upper, std::size_t points);

struct CalibrationRun {
  std::vector<ProfilingSample> samples;
  FitResult fit;
};

/// Pilot fit, then a geometric schedule up to twice the pilot's estimated
/// SLO crossing; the final fit uses every sample.
CalibrationRun calibrate_device(SimulatedDevice& device, const Slo& slo,
                                const ProfilingSchedule& schedule = {});

/// CSV with header `concurrency,latency_s`, one sample per row.
std::vector<ProfilingSample> read_profile_csv(std::istream& in);

}  // namespace hetadmit
