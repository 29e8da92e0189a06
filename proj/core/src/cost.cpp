#include "hetadmit/cost.hpp"

#include <cmath>
#include <cstdio>

namespace hetadmit {

std::uint64_t waiting_slots(const Slo& slo, double mean_processing) {
  if (!std::isfinite(mean_processing) || mean_processing <= 0.0) {
    throw Error(Errc::InvalidArgument, "mean processing time must be > 0");
  }
  if (mean_processing > slo.max_latency()) {
    throw Error(Errc::InfeasibleProcessing, "mean processing time exceeds the SLO");
  }
  const double slots = (slo.max_latency() - mean_processing) / mean_processing;
  // Absorb representation error, e.g. (2 - 0.5) / 0.5 landing just below 3.
  return static_cast<std::uint64_t>(std::floor(slots + 1e-9));
}

double cost_average_strategy(const CostInputs& inputs) {
  inputs.validate();
  const auto n = waiting_slots(inputs.slo, inputs.mean_processing);
  if (n == 0) {
    throw Error(Errc::InfeasibleProcessing, "no waiting slots: t_proc leaves no room in the SLO");
  }
  if (inputs.throughput <= 0.0) throw Error(Errc::ZeroThroughput, "throughput must be > 0");
  return (inputs.queries_per_second / static_cast<double>(n)) / inputs.throughput *
         inputs.devices_per_instance * inputs.price_per_device;
}

double cost_peak_strategy(const CostInputs& inputs) {
  inputs.validate();
  if (inputs.max_concurrency == 0) {
    throw Error(Errc::ZeroConcurrency, "maximum concurrency must be >= 1");
  }
  return inputs.peak_queries / static_cast<double>(inputs.max_concurrency) *
         inputs.devices_per_instance * inputs.price_per_device;
}

OffloadGains offload_gains(std::uint64_t c_cpu, std::uint64_t c_accel) {
  if (c_accel == 0) throw Error(Errc::InvalidArgument, "accelerator depth must be >= 1");
  const double cpu = static_cast<double>(c_cpu);
  const double accel = static_cast<double>(c_accel);
  return {cpu / (cpu + accel), cpu / accel};
}

CostReport make_cost_report(std::uint64_t c_cpu, std::uint64_t c_accel,
                            const std::optional<CostInputs>& inputs) {
  CostReport report;
  const auto gains = offload_gains(c_cpu, c_accel);
  report.peak_savings_ratio = gains.peak_savings_ratio;
  report.throughput_gain_ratio = gains.throughput_gain_ratio;
  if (inputs) {
    report.waiting_slots = waiting_slots(inputs->slo, inputs->mean_processing);
    report.average_strategy_cost = cost_average_strategy(*inputs);
    report.peak_strategy_cost = cost_peak_strategy(*inputs);
  }
  return report;
}

std::string format_percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", ratio * 100.0);
  return buf;
}

}  // namespace hetadmit
