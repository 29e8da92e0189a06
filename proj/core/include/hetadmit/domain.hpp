#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hetadmit/error.hpp"

namespace hetadmit {

/// Tolerance applied to every "latency <= SLO" comparison, in seconds.
inline constexpr double kSloTolerance = 1e-9;

/// Accelerator (NPU/GPU) always has dispatch priority over Cpu.
enum class DeviceKind { Accelerator, Cpu };

std::string_view to_string(DeviceKind kind) noexcept;
/// Accepts "accelerator", "npu", "gpu" and "cpu" (case-insensitive).
DeviceKind parse_device_kind(std::string_view text);

/// Affine processing latency t(C) = alpha * C + beta for one device.
class LatencyModel {
 public:
  LatencyModel() = default;
  LatencyModel(double alpha, double beta);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

  double predict(double concurrency) const noexcept {
    return alpha_ * concurrency + beta_;
  }

  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;

 private:
  double alpha_ = 0.0;
  double beta_ = 0.0;
};

/// Latency split into per-query compute and IO cost and a fixed model-load cost.
class DecomposedLatency {
 public:
  DecomposedLatency() = default;
  DecomposedLatency(double compute_per_query, double io_per_query,
                    double model_load_fixed);

  double compute_per_query() const noexcept { return compute_; }
  double io_per_query() const noexcept { return io_; }
  double model_load_fixed() const noexcept { return model_load_; }

  friend DecomposedLatency operator+(const DecomposedLatency& a,
                                     const DecomposedLatency& b) {
    return {a.compute_ + b.compute_, a.io_ + b.io_,
            a.model_load_ + b.model_load_};
  }
  friend bool operator==(const DecomposedLatency&,
                         const DecomposedLatency&) = default;

 private:
  double compute_ = 0.0;
  double io_ = 0.0;
  double model_load_ = 0.0;
};

LatencyModel decomposed_to_model(const DecomposedLatency& d) noexcept;

struct DeviceProfile {
  std::string name;
  DeviceKind kind = DeviceKind::Accelerator;
  LatencyModel latency;
  std::uint32_t worker_count = 1;
  double noise_stddev = 0.0;
  /// Fraction of simulated batches whose latency is tripled.
  double outlier_fraction = 0.0;

  void validate() const;
  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

class Slo {
 public:
  explicit Slo(double max_latency);

  double max_latency() const noexcept { return max_latency_; }
  bool met_by(double latency) const noexcept {
    return latency <= max_latency_ + kSloTolerance;
  }

  friend bool operator==(const Slo&, const Slo&) = default;

 private:
  double max_latency_;
};

struct QueuePlan {
  std::uint64_t accelerator_depth = 0;
  std::uint64_t cpu_depth = 0;
  bool heterogeneous_enabled = false;

  friend bool operator==(const QueuePlan&, const QueuePlan&) = default;
};

/// One profiling observation: mean processing latency at a fixed concurrency.
struct ProfilingSample {
  std::uint64_t concurrency = 1;
  double observed_latency = 0.0;

  void validate() const;
  friend bool operator==(const ProfilingSample&, const ProfilingSample&) = default;
};

struct Query {
  std::uint64_t id = 0;
  std::uint32_t token_length = 1;
  double arrival_time = 0.0;
};

enum class Placement { Accelerator, Cpu, Busy };

std::string_view to_string(Placement placement) noexcept;
Placement parse_placement(std::string_view text);
std::optional<DeviceKind> device_of(Placement placement) noexcept;
Placement placement_for(DeviceKind kind) noexcept;

/// A validated device set. At most one accelerator and one CPU pool take part
/// in dispatch; additional pools are kept but idle.
class Fleet {
 public:
  const std::vector<DeviceProfile>& devices() const noexcept { return devices_; }
  bool empty() const noexcept { return devices_.empty(); }

  const DeviceProfile* primary_accelerator() const noexcept;
  /// The CPU pool flagged as offload target.
  const DeviceProfile* offload_cpu() const noexcept;
  const DeviceProfile* find(std::string_view name) const noexcept;

 private:
  friend Fleet validate_fleet(std::span<const DeviceProfile> profiles);

  std::vector<DeviceProfile> devices_;
  std::optional<std::size_t> accelerator_index_;
  std::optional<std::size_t> cpu_index_;
};

Fleet validate_fleet(std::span<const DeviceProfile> profiles);

struct CostInputs {
  double queries_per_second = 0.0;  // N
  double peak_queries = 0.0;        // N_peak
  double throughput = 0.0;          // queries served per second per instance
  std::uint64_t max_concurrency = 0;
  double devices_per_instance = 1.0;
  double price_per_device = 0.0;
  Slo slo{1.0};
  double mean_processing = 0.0;

  void validate() const;
  friend bool operator==(const CostInputs&, const CostInputs&) = default;
};

struct SimMetrics {
  std::uint64_t accepted = 0;
  std::uint64_t rejected_busy = 0;
  std::uint64_t slo_violations = 0;
  std::uint64_t accepted_accelerator = 0;
  std::uint64_t accepted_cpu = 0;
  std::map<std::string, std::uint64_t> max_observed_concurrency;
  double latency_p50 = 0.0;
  double latency_p99 = 0.0;
  double latency_max = 0.0;
  double throughput = 0.0;
  double duration = 0.0;

  std::uint64_t submitted() const noexcept { return accepted + rejected_busy; }
  friend bool operator==(const SimMetrics&, const SimMetrics&) = default;
};

}  // namespace hetadmit
