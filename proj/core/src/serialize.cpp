#include "hetadmit/serialize.hpp"

#include <fstream>
#include <sstream>

#include "hetadmit/toml_lite.hpp"

namespace hetadmit {

using nlohmann::json;

namespace {

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

}  // namespace

void to_json(json& j, const LatencyModel& m) { j = json{{"alpha", m.alpha()}, {"beta", m.beta()}}; }

void from_json(const json& j, LatencyModel& m) {
  m = LatencyModel(j.at("alpha").get<double>(), j.at("beta").get<double>());
}

void to_json(json& j, const DecomposedLatency& d) {
  j = json{{"compute_per_query", d.compute_per_query()},
           {"io_per_query", d.io_per_query()},
           {"model_load_fixed", d.model_load_fixed()}};
}

void from_json(const json& j, DecomposedLatency& d) {
  d = DecomposedLatency(j.at("compute_per_query").get<double>(),
                        j.at("io_per_query").get<double>(),
                        j.at("model_load_fixed").get<double>());
}

void to_json(json& j, const DeviceProfile& p) {
  j = json{{"name", p.name},
           {"kind", to_string(p.kind)},
           {"alpha", p.latency.alpha()},
           {"beta", p.latency.beta()},
           {"worker_count", p.worker_count},
           {"noise_stddev", p.noise_stddev}};
  if (p.outlier_fraction > 0.0) j["outlier_fraction"] = p.outlier_fraction;
}

void from_json(const json& j, DeviceProfile& p) {
  p.name = j.at("name").get<std::string>();
  p.kind = parse_device_kind(j.at("kind").get<std::string>());
  if (j.contains("alpha") || j.contains("beta")) {
    from_json(j, p.latency);
  } else {
    DecomposedLatency d;
    from_json(j, d);
    p.latency = decomposed_to_model(d);
  }
  p.worker_count = value_or<std::uint32_t>(j, "worker_count", 1);
  p.noise_stddev = value_or<double>(j, "noise_stddev", 0.0);
  p.outlier_fraction = value_or<double>(j, "outlier_fraction", 0.0);
  p.validate();
}

void to_json(json& j, const QueuePlan& p) {
  j = json{{"accelerator_depth", p.accelerator_depth},
           {"cpu_depth", p.cpu_depth},
           {"heterogeneous", p.heterogeneous_enabled}};
}

void from_json(const json& j, QueuePlan& p) {
  p.accelerator_depth = value_or<std::uint64_t>(j, "accelerator_depth", 0);
  p.cpu_depth = value_or<std::uint64_t>(j, "cpu_depth", 0);
  p.heterogeneous_enabled = value_or<bool>(j, "heterogeneous", false);
}

void to_json(json& j, const Query& q) {
  j = json{{"id", q.id}, {"token_length", q.token_length}, {"arrival_time", q.arrival_time}};
}

void from_json(const json& j, Query& q) {
  q.id = j.at("id").get<std::uint64_t>();
  q.token_length = j.at("token_length").get<std::uint32_t>();
  q.arrival_time = value_or<double>(j, "arrival_time", 0.0);
  if (q.token_length < 1) throw Error(Errc::InvalidArgument, "token_length must be >= 1");
}

void to_json(json& j, const ProfilingSample& s) {
  j = json{{"concurrency", s.concurrency}, {"latency_s", s.observed_latency}};
}

void from_json(const json& j, ProfilingSample& s) {
  s.concurrency = j.at("concurrency").get<std::uint64_t>();
  s.observed_latency = j.at("latency_s").get<double>();
  s.validate();
}

void to_json(json& j, const CostInputs& c) {
  j = json{{"queries_per_second", c.queries_per_second},
           {"peak_queries", c.peak_queries},
           {"throughput", c.throughput},
           {"max_concurrency", c.max_concurrency},
           {"devices_per_instance", c.devices_per_instance},
           {"price_per_device", c.price_per_device},
           {"slo_s", c.slo.max_latency()},
           {"mean_processing_s", c.mean_processing}};
}

void from_json(const json& j, CostInputs& c) {
  c.queries_per_second = value_or<double>(j, "queries_per_second", 0.0);
  c.peak_queries = value_or<double>(j, "peak_queries", 0.0);
  c.throughput = value_or<double>(j, "throughput", 0.0);
  c.max_concurrency = value_or<std::uint64_t>(j, "max_concurrency", 0);
  c.devices_per_instance = value_or<double>(j, "devices_per_instance", 1.0);
  c.price_per_device = value_or<double>(j, "price_per_device", 0.0);
  c.slo = Slo(value_or<double>(j, "slo_s", 1.0));
  c.mean_processing = value_or<double>(j, "mean_processing_s", 0.0);
  c.validate();
}

void to_json(json& j, const SimMetrics& m) {
  j = json{{"accepted", m.accepted},
           {"rejected_busy", m.rejected_busy},
           {"submitted", m.submitted()},
           {"slo_violations", m.slo_violations},
           {"accepted_accelerator", m.accepted_accelerator},
           {"accepted_cpu", m.accepted_cpu},
           {"max_observed_concurrency", m.max_observed_concurrency},
           {"latency_p50_s", m.latency_p50},
           {"latency_p99_s", m.latency_p99},
           {"latency_max_s", m.latency_max},
           {"throughput_qps", m.throughput},
           {"duration_s", m.duration}};
}

void from_json(const json& j, SimMetrics& m) {
  m.accepted = j.at("accepted").get<std::uint64_t>();
  m.rejected_busy = j.at("rejected_busy").get<std::uint64_t>();
  m.slo_violations = j.at("slo_violations").get<std::uint64_t>();
  m.accepted_accelerator = value_or<std::uint64_t>(j, "accepted_accelerator", 0);
  m.accepted_cpu = value_or<std::uint64_t>(j, "accepted_cpu", 0);
  m.max_observed_concurrency =
      j.at("max_observed_concurrency").get<std::map<std::string, std::uint64_t>>();
  m.latency_p50 = j.at("latency_p50_s").get<double>();
  m.latency_p99 = j.at("latency_p99_s").get<double>();
  m.latency_max = j.at("latency_max_s").get<double>();
  m.throughput = j.at("throughput_qps").get<double>();
  m.duration = value_or<double>(j, "duration_s", 0.0);
}

void to_json(json& j, const FitResult& f) {
  j = json{{"alpha", f.model.alpha()},
           {"beta", f.model.beta()},
           {"r_squared", f.r_squared},
           {"n", f.sample_count},
           {"clamped", f.clamped},
           {"alpha_stderr", f.alpha_stderr},
           {"beta_stderr", f.beta_stderr}};
}

void from_json(const json& j, FitResult& f) {
  f.model = LatencyModel(j.at("alpha").get<double>(), j.at("beta").get<double>());
  f.r_squared = j.at("r_squared").get<double>();
  f.sample_count = j.at("n").get<std::size_t>();
  f.clamped = value_or<bool>(j, "clamped", false);
  f.alpha_stderr = value_or<double>(j, "alpha_stderr", 0.0);
  f.beta_stderr = value_or<double>(j, "beta_stderr", 0.0);
}

void to_json(json& j, const ConcurrencyEstimate& e) {
  j = json{{"depth", e.depth}, {"unbounded", e.unbounded}};
}

void to_json(json& j, const CostReport& r) {
  j = json{{"peak_savings_ratio", r.peak_savings_ratio},
           {"throughput_gain_ratio", r.throughput_gain_ratio},
           {"peak_savings_pct", format_percent(r.peak_savings_ratio)},
           {"throughput_gain_pct", format_percent(r.throughput_gain_ratio)},
           {"average_strategy_cost", nullptr},
           {"peak_strategy_cost", nullptr},
           {"waiting_slots", nullptr}};
  if (r.average_strategy_cost) j["average_strategy_cost"] = *r.average_strategy_cost;
  if (r.peak_strategy_cost) j["peak_strategy_cost"] = *r.peak_strategy_cost;
  if (r.waiting_slots) j["waiting_slots"] = *r.waiting_slots;
}

void from_json(const json& j, CostReport& r) {
  r.peak_savings_ratio = j.at("peak_savings_ratio").get<double>();
  r.throughput_gain_ratio = j.at("throughput_gain_ratio").get<double>();
  auto opt = [&](const char* key) -> const json* {
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  };
  if (const auto* v = opt("average_strategy_cost")) r.average_strategy_cost = v->get<double>();
  if (const auto* v = opt("peak_strategy_cost")) r.peak_strategy_cost = v->get<double>();
  if (const auto* v = opt("waiting_slots")) r.waiting_slots = v->get<std::uint64_t>();
}

void to_json(json& j, const WorkloadSpec& w) {
  if (const auto* closed = std::get_if<ClosedLoop>(&w.mode)) {
    j = json{{"mode", "closed_loop"},
             {"concurrency", closed->concurrency},
             {"batches", closed->batches}};
  } else {
    const auto& d = std::get<DiurnalOpenLoop>(w.mode);
    j = json{{"mode", "diurnal"},
             {"base_rate", d.base_rate},
             {"peak_rate", d.peak_rate},
             {"peak_hours", d.peak_hours},
             {"duration_s", d.duration},
             {"ramp_s", d.ramp}};
  }
  j["query_length"] = w.query_length;
  j["seed"] = w.seed;
}

void from_json(const json& j, WorkloadSpec& w) {
  const auto mode = value_or<std::string>(j, "mode", "closed_loop");
  if (mode == "closed_loop") {
    w.mode = ClosedLoop{j.at("concurrency").get<std::uint64_t>(),
                        value_or<std::uint64_t>(j, "batches", 1)};
  } else if (mode == "diurnal") {
    DiurnalOpenLoop d;
    d.base_rate = j.at("base_rate").get<double>();
    d.peak_rate = value_or<double>(j, "peak_rate", d.base_rate);
    d.peak_hours = value_or<std::vector<double>>(j, "peak_hours", {});
    d.duration = j.at("duration_s").get<double>();
    d.ramp = value_or<double>(j, "ramp_s", 900.0);
    w.mode = d;
  } else {
    throw Error(Errc::ConfigError, "unknown workload mode '" + mode + "'");
  }
  w.query_length = value_or<std::uint32_t>(j, "query_length", 75);
  w.seed = value_or<std::uint64_t>(j, "seed", 0);
  w.validate();
}

void to_json(json& j, const StressResult& r) {
  json probes = json::array();
  for (const auto& p : r.probes) {
    probes.push_back({{"concurrency", p.concurrency}, {"latency_s", p.latency}, {"passed", p.passed}});
  }
  j = json{{"depth", r.depth}, {"probes", probes}};
}

void to_json(json& j, const AffinityPlan& p) {
  json groups = json::array();
  for (const auto& g : p.groups) groups.push_back({{"numa", g.numa}, {"cores", g.cores}});
  j = json{{"reserved", p.reserved}, {"groups", groups}, {"cores", p.cores()}};
}

void to_json(json& j, const DecisionRecord& r) { j = json::parse(to_jsonl(r)); }

json parse_tree(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, std::string("json: ") + e.what());
    }
  }
  return toml_lite::parse(text);
}

Config config_from_tree(const json& tree) {
  Config config;
  config.tree = tree;
  try {
    if (const auto it = tree.find("device"); it != tree.end()) {
      if (!it->is_array()) throw Error(Errc::ConfigError, "'device' must be an array of tables");
      for (const auto& d : *it) config.devices.push_back(d.get<DeviceProfile>());
    }
    if (const auto it = tree.find("slo"); it != tree.end()) config.slo = it->get<Slo>();
    if (const auto it = tree.find("plan"); it != tree.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "auto") {
          throw Error(Errc::ConfigError, "plan must be a table or \"auto\"");
        }
        config.plan_auto = true;
      } else {
        config.plan = it->get<QueuePlan>();
      }
    }
    if (const auto it = tree.find("cost"); it != tree.end()) config.cost = it->get<CostInputs>();
    if (const auto it = tree.find("seed"); it != tree.end()) config.seed = it->get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  }
  return config;
}

json config_to_tree(const Config& config) {
  json tree = config.tree.is_object() ? config.tree : json::object();
  tree.erase("device");
  if (!config.devices.empty()) tree["device"] = config.devices;
  tree.erase("slo");
  if (config.slo) tree["slo"] = *config.slo;
  tree.erase("plan");
  if (config.plan) {
    tree["plan"] = *config.plan;
  } else if (config.plan_auto) {
    tree["plan"] = "auto";
  }
  tree.erase("cost");
  if (config.cost) tree["cost"] = *config.cost;
  tree.erase("seed");
  if (config.seed) tree["seed"] = *config.seed;
  return tree;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config load_config(const std::filesystem::path& path) {
  return config_from_tree(parse_tree(read_file(path)));
}

std::string config_to_toml(const Config& config) { return toml_lite::dump(config_to_tree(config)); }

WorkloadSpec load_workload(const std::filesystem::path& path) {
  const auto tree = parse_tree(read_file(path));
  try {
    const auto& node = tree.contains("workload") ? tree.at("workload") : tree;
    return node.get<WorkloadSpec>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("workload: ") + e.what());
  }
}

}  // namespace hetadmit
