#include "hetadmit/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace hetadmit {

namespace {

bool non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyFleet: return "EmptyFleet";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::NoDevices: return "NoDevices";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::DegenerateSamples: return "DegenerateSamples";
    case Errc::DeviceInfeasible: return "DeviceInfeasible";
    case Errc::NoFeasiblePlan: return "NoFeasiblePlan";
    case Errc::UnderflowRelease: return "UnderflowRelease";
    case Errc::InvalidTopology: return "InvalidTopology";
    case Errc::InfeasibleProcessing: return "InfeasibleProcessing";
    case Errc::ZeroThroughput: return "ZeroThroughput";
    case Errc::ZeroConcurrency: return "ZeroConcurrency";
    case Errc::ParseError: return "ParseError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

std::string_view to_string(DeviceKind kind) noexcept {
  return kind == DeviceKind::Accelerator ? "accelerator" : "cpu";
}

DeviceKind parse_device_kind(std::string_view text) {
  const auto s = lower(text);
  if (s == "accelerator" || s == "npu" || s == "gpu") return DeviceKind::Accelerator;
  if (s == "cpu") return DeviceKind::Cpu;
  throw Error(Errc::ParseError, "unknown device kind '" + std::string(text) + "'");
}

LatencyModel::LatencyModel(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!non_negative(alpha) || !non_negative(beta)) {
    throw Error(Errc::InvalidArgument,
                "latency model requires finite alpha >= 0 and beta >= 0");
  }
}

DecomposedLatency::DecomposedLatency(double compute_per_query, double io_per_query,
                                     double model_load_fixed)
    : compute_(compute_per_query), io_(io_per_query), model_load_(model_load_fixed) {
  if (!non_negative(compute_) || !non_negative(io_) || !non_negative(model_load_)) {
    throw Error(Errc::InvalidArgument, "latency components must be finite and >= 0");
  }
}

LatencyModel decomposed_to_model(const DecomposedLatency& d) noexcept {
  return LatencyModel(d.compute_per_query() + d.io_per_query(), d.model_load_fixed());
}

void DeviceProfile::validate() const {
  if (name.empty()) throw Error(Errc::InvalidArgument, "device name must not be empty");
  if (worker_count < 1) {
    throw Error(Errc::InvalidArgument, "device '" + name + "': worker_count must be >= 1");
  }
  if (!non_negative(noise_stddev)) {
    throw Error(Errc::InvalidArgument, "device '" + name + "': noise_stddev must be >= 0");
  }
  if (!non_negative(outlier_fraction) || outlier_fraction > 1.0) {
    throw Error(Errc::InvalidArgument,
                "device '" + name + "': outlier_fraction must be in [0, 1]");
  }
}

Slo::Slo(double max_latency) : max_latency_(max_latency) {
  if (!std::isfinite(max_latency) || max_latency <= 0.0) {
    throw Error(Errc::InvalidArgument, "SLO max latency must be > 0");
  }
}

std::string_view to_string(Placement placement) noexcept {
  switch (placement) {
    case Placement::Accelerator: return "accelerator";
    case Placement::Cpu: return "cpu";
    case Placement::Busy: return "busy";
  }
  return "busy";
}

Placement parse_placement(std::string_view text) {
  const auto s = lower(text);
  if (s == "accelerator") return Placement::Accelerator;
  if (s == "cpu") return Placement::Cpu;
  if (s == "busy") return Placement::Busy;
  throw Error(Errc::ParseError, "unknown placement '" + std::string(text) + "'");
}

std::optional<DeviceKind> device_of(Placement placement) noexcept {
  switch (placement) {
    case Placement::Accelerator: return DeviceKind::Accelerator;
    case Placement::Cpu: return DeviceKind::Cpu;
    case Placement::Busy: return std::nullopt;
  }
  return std::nullopt;
}

Placement placement_for(DeviceKind kind) noexcept {
  return kind == DeviceKind::Accelerator ? Placement::Accelerator : Placement::Cpu;
}

const DeviceProfile* Fleet::primary_accelerator() const noexcept {
  return accelerator_index_ ? &devices_[*accelerator_index_] : nullptr;
}

const DeviceProfile* Fleet::offload_cpu() const noexcept {
  return cpu_index_ ? &devices_[*cpu_index_] : nullptr;
}

const DeviceProfile* Fleet::find(std::string_view name) const noexcept {
  for (const auto& d : devices_) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

Fleet validate_fleet(std::span<const DeviceProfile> profiles) {
  if (profiles.empty()) throw Error(Errc::EmptyFleet, "fleet has no device profiles");

  Fleet fleet;
  std::set<std::string> names;
  for (const auto& p : profiles) {
    p.validate();
    if (!names.insert(p.name).second) {
      throw Error(Errc::DuplicateName, "duplicate device name '" + p.name + "'");
    }
    const auto index = fleet.devices_.size();
    fleet.devices_.push_back(p);
    // First pool of each kind takes part in dispatch; one CPU instance per machine.
    if (p.kind == DeviceKind::Accelerator && !fleet.accelerator_index_) {
      fleet.accelerator_index_ = index;
    } else if (p.kind == DeviceKind::Cpu && !fleet.cpu_index_) {
      fleet.cpu_index_ = index;
    }
  }
  return fleet;
}

void ProfilingSample::validate() const {
  if (concurrency < 1) throw Error(Errc::InvalidArgument, "sample concurrency must be >= 1");
  if (!std::isfinite(observed_latency) || observed_latency <= 0.0) {
    throw Error(Errc::InvalidArgument, "sample latency must be > 0");
  }
}

void CostInputs::validate() const {
  for (double v : {queries_per_second, peak_queries, throughput, devices_per_instance,
                   price_per_device, mean_processing}) {
    if (!non_negative(v)) {
      throw Error(Errc::InvalidArgument, "cost inputs must be finite and >= 0");
    }
  }
}

}  // namespace hetadmit
