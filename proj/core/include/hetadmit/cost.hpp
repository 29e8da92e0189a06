#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hetadmit/domain.hpp"

namespace hetadmit {

/// Queries that can be processed while one waits without missing the SLO:
/// floor((T - t_proc) / t_proc). Throws Error(InfeasibleProcessing) when
/// t_proc > T.
std::uint64_t waiting_slots(const Slo& slo, double mean_processing);

/// Sizing by average load: (N / n) / throughput * D * P.
double cost_average_strategy(const CostInputs& inputs);

/// Sizing by peak load: (N_peak / C) * D * P.
double cost_peak_strategy(const CostInputs& inputs);

struct OffloadGains {
  double peak_savings_ratio = 0.0;     // c_cpu / (c_cpu + c_accel)
  double throughput_gain_ratio = 0.0;  // c_cpu / c_accel
};

OffloadGains offload_gains(std::uint64_t c_cpu, std::uint64_t c_accel);

struct CostReport {
  std::optional<double> average_strategy_cost;
  std::optional<double> peak_strategy_cost;
  std::optional<std::uint64_t> waiting_slots;
  double peak_savings_ratio = 0.0;
  double throughput_gain_ratio = 0.0;
};

/// Gains from the depths, plus both strategy costs when inputs are given.
CostReport make_cost_report(std::uint64_t c_cpu, std::uint64_t c_accel,
                            const std::optional<CostInputs>& inputs);

/// Unit ratio to a one-decimal percentage, e.g. 0.1864 -> "18.6%".
std::string format_percent(double ratio);

}  // namespace hetadmit
