#pragma once

// JSON mapping for the domain types plus the config file loader.
//
// Config files are either JSON or the TOML subset of toml_lite.hpp and share
// one tree layout (see docs/config.md):
//
//   [slo]       max_latency_s
//   [[device]]  name, kind, alpha, beta, worker_count, noise_stddev, outlier_fraction
//   [plan]      accelerator_depth, cpu_depth, heterogeneous   (or plan = "auto")
//   [cost]      CostInputs fields
//   [gateway]   read by the gateway
//   seed = <n>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetadmit/affinity.hpp"
#include "hetadmit/calibration.hpp"
#include "hetadmit/cost.hpp"
#include "hetadmit/dispatch.hpp"
#include "hetadmit/domain.hpp"
#include "hetadmit/simulation.hpp"

namespace hetadmit {

void to_json(nlohmann::json& j, const LatencyModel& m);
void from_json(const nlohmann::json& j, LatencyModel& m);
void to_json(nlohmann::json& j, const DecomposedLatency& d);
void from_json(const nlohmann::json& j, DecomposedLatency& d);
void to_json(nlohmann::json& j, const DeviceProfile& p);
void from_json(const nlohmann::json& j, DeviceProfile& p);
void to_json(nlohmann::json& j, const QueuePlan& p);
void from_json(const nlohmann::json& j, QueuePlan& p);
void to_json(nlohmann::json& j, const Query& q);
void from_json(const nlohmann::json& j, Query& q);
void to_json(nlohmann::json& j, const ProfilingSample& s);
void from_json(const nlohmann::json& j, ProfilingSample& s);
void to_json(nlohmann::json& j, const CostInputs& c);
void from_json(const nlohmann::json& j, CostInputs& c);
void to_json(nlohmann::json& j, const SimMetrics& m);
void from_json(const nlohmann::json& j, SimMetrics& m);
void to_json(nlohmann::json& j, const FitResult& f);
void from_json(const nlohmann::json& j, FitResult& f);
void to_json(nlohmann::json& j, const ConcurrencyEstimate& e);
void to_json(nlohmann::json& j, const CostReport& r);
void from_json(const nlohmann::json& j, CostReport& r);
void to_json(nlohmann::json& j, const WorkloadSpec& w);
void from_json(const nlohmann::json& j, WorkloadSpec& w);
void to_json(nlohmann::json& j, const StressResult& r);
void to_json(nlohmann::json& j, const AffinityPlan& p);
void to_json(nlohmann::json& j, const DecisionRecord& r);

struct Config {
  std::vector<DeviceProfile> devices;
  std::optional<Slo> slo;
  /// Explicit plan; empty when absent or "auto".
  std::optional<QueuePlan> plan;
  bool plan_auto = false;
  std::optional<CostInputs> cost;
  std::optional<std::uint64_t> seed;
  /// Whole parsed tree, for sections owned by other components.
  nlohmann::json tree = nlohmann::json::object();
};

/// JSON when the first non-blank character is '{', the TOML subset otherwise.
nlohmann::json parse_tree(std::string_view text);
Config config_from_tree(const nlohmann::json& tree);
nlohmann::json config_to_tree(const Config& config);
Config load_config(const std::filesystem::path& path);
/// Renders the config as TOML.
std::string config_to_toml(const Config& config);

/// Accepts {"workload": {...}} or the workload object itself.
WorkloadSpec load_workload(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace hetadmit

namespace nlohmann {

template <>
struct adl_serializer<hetadmit::Slo> {
  static hetadmit::Slo from_json(const json& j) {
    return hetadmit::Slo(j.at("max_latency_s").get<double>());
  }
  static void to_json(json& j, const hetadmit::Slo& slo) {
    j = json{{"max_latency_s", slo.max_latency()}};
  }
};

}  // namespace nlohmann
