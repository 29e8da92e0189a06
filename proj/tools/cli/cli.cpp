#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gateway.hpp"
#include "hetadmit/affinity.hpp"
#include "hetadmit/calibration.hpp"
#include "hetadmit/cost.hpp"
#include "hetadmit/serialize.hpp"
#include "hetadmit/simulation.hpp"

namespace hetadmit::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  const std::filesystem::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
  std::ofstream file(target, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(Errc::ConfigError, "cannot write " + path);
  file << text;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

const DeviceProfile& pick_device(const Config& config, const std::string& name) {
  if (config.devices.empty()) throw Error(Errc::ConfigError, "config has no devices");
  if (name.empty()) {
    if (config.devices.size() == 1) return config.devices.front();
    throw UsageError("--device is required when the config has several devices");
  }
  for (const auto& d : config.devices) {
    if (d.name == name) return d;
  }
  throw Error(Errc::ConfigError, "no device named '" + name + "'");
}

Slo resolve_slo(const std::optional<double>& flag, const Config* config) {
  if (flag) return Slo(*flag);
  if (config != nullptr && config->slo) return *config->slo;
  throw UsageError("--slo is required (or [slo] in the config)");
}

QueuePlan resolve_plan(const Config& config, const Fleet& fleet, const Slo& slo) {
  if (config.plan) return *config.plan;
  return estimate_plan(fleet, slo, true);
}

struct DeviceArgs {
  std::optional<double> alpha;
  std::optional<double> beta;
  double noise = 0.0;
  std::string config;
  std::string device;

  void add_to(CLI::App* sub) {
    sub->add_option("--alpha", alpha, "Seconds per concurrent query")->check(CLI::NonNegativeNumber);
    sub->add_option("--beta", beta, "Fixed seconds per batch")->check(CLI::NonNegativeNumber);
    sub->add_option("--noise", noise, "Latency noise stddev in seconds")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--config", config, "Fleet config (TOML or JSON)");
    sub->add_option("--device", device, "Device name inside --config");
  }

  DeviceProfile resolve(std::optional<Config>& loaded) const {
    if (!config.empty()) {
      loaded = load_config(config);
      return pick_device(*loaded, device);
    }
    if (!alpha || !beta) throw UsageError("give --alpha and --beta, or --config");
    DeviceProfile p;
    p.name = device.empty() ? "device" : device;
    p.latency = LatencyModel(*alpha, *beta);
    p.noise_stddev = noise;
    return p;
  }
};

// ---------------------------------------------------------------- calibrate

struct CalibrateCmd {
  DeviceArgs dev;
  std::string csv;
  std::optional<double> slo;
  std::uint64_t seed = 0;
  std::size_t points = 6;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("calibrate", "Fit the latency model of one device");
    dev.add_to(sub);
    sub->add_option("--csv", csv, "Profile CSV with header concurrency,latency_s");
    sub->add_option("--slo", slo, "SLO in seconds, bounds the profiling schedule");
    sub->add_option("--seed", seed, "Seed of the simulated device");
    sub->add_option("--points", points, "Profiling points after the pilot")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_path, "Write the fit here instead of stdout");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    json j;
    if (!csv.empty()) {
      std::ifstream in(csv);
      if (!in) throw Error(Errc::ConfigError, "cannot read " + csv);
      const auto samples = read_profile_csv(in);
      j = fit_latency_model(samples);
      j["source"] = csv;
      j["samples"] = samples;
    } else {
      std::optional<Config> config;
      const auto profile = dev.resolve(config);
      const auto s = resolve_slo(slo, config ? &*config : nullptr);
      SimulatedDevice device(profile, seed);
      ProfilingSchedule schedule;
      schedule.points = points;
      const auto run = calibrate_device(device, s, schedule);
      j = run.fit;
      j["device"] = profile.name;
      j["samples"] = run.samples;
    }
    emit(pretty(j), out_path, out);
    return 0;
  }
};

// ----------------------------------------------------------------- estimate

struct EstimateCmd {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string fit;
  std::string config;
  std::optional<double> slo;
  std::uint64_t cap = kDefaultConcurrencyCap;
  bool heterogeneous = true;
  bool as_json = false;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("estimate", "Maximum SLO-feasible concurrency");
    sub->add_option("--alpha", alpha, "Seconds per concurrent query")->check(CLI::NonNegativeNumber);
    sub->add_option("--beta", beta, "Fixed seconds per batch")->check(CLI::NonNegativeNumber);
    sub->add_option("--fit", fit, "Fit JSON written by calibrate");
    sub->add_option("--config", config, "Fleet config; prints the queue plan");
    sub->add_option("--slo", slo, "SLO in seconds");
    sub->add_option("--cap", cap, "Hard cap for flat latency lines")->check(CLI::PositiveNumber);
    sub->add_option("--heterogeneous", heterogeneous, "Plan a CPU offload queue (true/false)");
    sub->add_flag("--json", as_json, "Print JSON");
    sub->add_option("--out", out_path, "Write the result here instead of stdout");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    if (!config.empty()) {
      const auto cfg = load_config(config);
      const auto s = resolve_slo(slo, &cfg);
      const auto fleet = validate_fleet(cfg.devices);
      json j = estimate_plan(fleet, s, heterogeneous, cap);
      j["slo_s"] = s.max_latency();
      j["method"] = "linear_regression";
      emit(pretty(j), out_path, out);
      return 0;
    }
    LatencyModel model;
    if (!fit.empty()) {
      model = parse_tree(read_file(fit)).get<FitResult>().model;
    } else if (alpha && beta) {
      model = LatencyModel(*alpha, *beta);
    } else {
      throw UsageError("give --alpha and --beta, --fit, or --config");
    }
    const auto s = resolve_slo(slo, nullptr);
    const auto est = estimate_max_concurrency(model, s, cap);
    if (as_json) {
      json j = est;
      j["slo_s"] = s.max_latency();
      emit(pretty(j), out_path, out);
    } else {
      emit(std::to_string(est.depth) + (est.unbounded ? " (unbounded)\n" : "\n"), out_path, out);
    }
    return 0;
  }
};

// ------------------------------------------------------------------- stress

struct StressCmd {
  DeviceArgs dev;
  std::optional<double> slo;
  std::uint64_t step = 8;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 0;
  std::uint64_t cap = kDefaultConcurrencyCap;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("stress", "Incremental stress test on a simulated device");
    dev.add_to(sub);
    sub->add_option("--slo", slo, "SLO in seconds");
    sub->add_option("--step", step, "Concurrency increment")->check(CLI::PositiveNumber);
    sub->add_option("--repeats", repeats, "Batches per probe")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Seed of the simulated device");
    sub->add_option("--cap", cap, "Largest concurrency probed")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_path, "Write the probe log as JSON; stdout gets the depth");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    std::optional<Config> config;
    const auto profile = dev.resolve(config);
    const auto s = resolve_slo(slo, config ? &*config : nullptr);
    SimulatedDevice device(profile, seed);
    const auto result = run_stress_test(device, s, step, StressOptions{cap, repeats});
    if (!out_path.empty()) {
      json j = result;
      j["device"] = profile.name;
      j["step"] = step;
      j["slo_s"] = s.max_latency();
      emit(pretty(j), out_path, out);
    }
    out << result.depth << "\n";
    return 0;
  }
};

// ----------------------------------------------------------------- finetune

struct FinetuneCmd {
  std::string config;
  std::optional<double> slo;
  std::uint64_t radius = 4;
  FineTuneOptions options;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("finetune", "Collaborative grid search around the plan");
    sub->add_option("--config", config, "Fleet config")->required();
    sub->add_option("--slo", slo, "SLO in seconds");
    sub->add_option("--radius", radius, "Search radius per device");
    sub->add_option("--accelerator-offset", options.accelerator_offset,
                    "Seconds added to the accelerator beta while collaborating");
    sub->add_option("--cpu-offset", options.cpu_offset,
                    "Seconds added to the CPU beta while collaborating");
    sub->add_option("--batches", options.batches, "Closed-loop batches per candidate")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", options.seed, "Simulation seed");
    sub->add_option("--out", out_path, "Write the plan here instead of stdout");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    const auto cfg = load_config(config);
    const auto s = resolve_slo(slo, &cfg);
    const auto fleet = validate_fleet(cfg.devices);
    const auto initial = resolve_plan(cfg, fleet, s);
    const auto tuned = fine_tune_depths(initial, fleet, s, radius, options);
    json j = tuned;
    j["initial"] = initial;
    j["slo_s"] = s.max_latency();
    j["method"] = "fine_tuned";
    emit(pretty(j), out_path, out);
    return 0;
  }
};

// ----------------------------------------------------------------- simulate

struct SimulateCmd {
  std::string config;
  std::string workload;
  std::optional<std::uint64_t> seed;
  std::optional<double> slo;
  double tick = 0.0;
  std::string decisions;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("simulate", "Discrete-event simulation of the dispatcher");
    sub->add_option("--config", config, "Fleet config")->required();
    sub->add_option("--workload", workload, "Workload file")->required();
    sub->add_option("--seed", seed, "Run seed (overrides the workload seed)");
    sub->add_option("--slo", slo, "SLO in seconds");
    sub->add_option("--tick", tick, "Batch scheduling interval in seconds")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--decisions", decisions, "Write dispatch decisions as JSON lines");
    sub->add_option("--out", out_path, "Metrics JSON path");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    const auto cfg = load_config(config);
    auto spec = load_workload(workload);
    if (seed) {
      spec.seed = *seed;
    } else if (cfg.seed) {
      spec.seed = *cfg.seed;
    }
    const auto s = resolve_slo(slo, &cfg);
    const auto fleet = validate_fleet(cfg.devices);
    const auto plan = resolve_plan(cfg, fleet, s);

    DispatchDecisionLog log;
    SimOptions options;
    options.tick = tick;
    if (!decisions.empty()) options.decisions = &log;
    const auto metrics = simulate(fleet, plan, spec, s, options);

    if (!decisions.empty()) {
      std::ostringstream lines;
      log.write_jsonl(lines);
      emit(lines.str(), decisions, out);
    }
    json j = metrics;
    j["plan"] = plan;
    j["slo_s"] = s.max_latency();
    j["workload"] = spec;
    emit(pretty(j), out_path, out);
    return 0;
  }
};

// --------------------------------------------------------------------- cost

struct CostCmd {
  std::uint64_t c_cpu = 0;
  std::uint64_t c_accel = 0;
  std::string config;
  std::optional<double> qps, peak, throughput, price, slo, t_proc;
  std::optional<std::uint64_t> max_concurrency;
  double devices = 1.0;
  bool as_json = false;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("cost", "Offload gains and deployment cost");
    sub->add_option("--c-cpu", c_cpu, "CPU queue depth")->required();
    sub->add_option("--c-accel", c_accel, "Accelerator queue depth")->required();
    sub->add_option("--config", config, "Config with a [cost] section");
    sub->add_option("--qps", qps, "Average queries per second (N)");
    sub->add_option("--peak", peak, "Peak concurrent queries (N_peak)");
    sub->add_option("--throughput", throughput, "Queries per second per instance");
    sub->add_option("--max-concurrency", max_concurrency, "Maximum concurrency per instance");
    sub->add_option("--devices", devices, "Devices per instance (D)");
    sub->add_option("--price", price, "Price per device (P)");
    sub->add_option("--slo", slo, "SLO in seconds");
    sub->add_option("--t-proc", t_proc, "Mean processing time in seconds");
    sub->add_flag("--json", as_json, "Print JSON");
    sub->add_option("--out", out_path, "Write JSON here");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  std::optional<CostInputs> inputs() const {
    std::optional<CostInputs> in;
    if (!config.empty()) {
      const auto cfg = load_config(config);
      if (!cfg.cost) throw Error(Errc::ConfigError, "config has no [cost] section");
      in = cfg.cost;
    }
    const bool any = qps || peak || throughput || max_concurrency || price || slo || t_proc;
    if (!any) return in;
    if (!in && !(qps && peak && throughput && max_concurrency && price && slo && t_proc)) {
      throw UsageError(
          "cost inputs need --qps --peak --throughput --max-concurrency --price --slo --t-proc");
    }
    CostInputs c = in.value_or(CostInputs{});
    if (qps) c.queries_per_second = *qps;
    if (peak) c.peak_queries = *peak;
    if (throughput) c.throughput = *throughput;
    if (max_concurrency) c.max_concurrency = *max_concurrency;
    if (price) c.price_per_device = *price;
    if (slo) c.slo = Slo(*slo);
    if (t_proc) c.mean_processing = *t_proc;
    c.devices_per_instance = devices;
    c.validate();
    return c;
  }

  int run(std::ostream& out) {
    const auto report = make_cost_report(c_cpu, c_accel, inputs());
    json j = report;
    j["c_cpu"] = c_cpu;
    j["c_accel"] = c_accel;
    if (!out_path.empty()) emit(pretty(j), out_path, out);
    if (as_json) {
      out << pretty(j);
      return 0;
    }
    std::ostringstream text;
    text << "peak savings:    " << format_percent(report.peak_savings_ratio) << "\n"
         << "throughput gain: " << format_percent(report.throughput_gain_ratio) << "\n";
    text << std::fixed << std::setprecision(2);
    if (report.waiting_slots) text << "waiting slots:   " << *report.waiting_slots << "\n";
    if (report.average_strategy_cost) {
      text << "average-strategy cost: " << *report.average_strategy_cost << "\n";
    }
    if (report.peak_strategy_cost) {
      text << "peak-strategy cost:    " << *report.peak_strategy_cost << "\n";
    }
    out << text.str();
    return 0;
  }
};

// ----------------------------------------------------------------- affinity

struct AffinityCmd {
  std::uint32_t cores = 0;
  std::uint32_t numa = 1;
  double reserve = 0.25;
  bool as_json = false;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("affinity", "Core binding advice for CPU offload workers");
    sub->add_option("--cores", cores, "Total cores")->required();
    sub->add_option("--numa", numa, "NUMA nodes");
    sub->add_option("--reserve", reserve, "Fraction of low cores kept for the framework");
    sub->add_flag("--json", as_json, "Print JSON");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    const auto plan = recommend_affinity(cores, numa, reserve);
    if (as_json) {
      out << pretty(json(plan));
      return 0;
    }
    for (const auto& g : plan.groups) {
      out << "numa " << g.numa << ": " << g.cores.front() << "-" << g.cores.back() << " ("
          << g.cores.size() << " cores)\n";
    }
    out << "reserved: " << plan.reserved.size() << " cores\n";
    return 0;
  }
};

// -------------------------------------------------------------------- serve

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct ServeCmd {
  std::string config;
  std::string listen;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("serve", "Run the HTTP gateway");
    sub->add_option("--config", config, "Fleet and gateway config")->required();
    sub->add_option("--listen", listen, "host:port (overrides config and HETADMIT_LISTEN)");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    auto gw_config = gateway::gateway_config_from(load_config(config));
    if (!listen.empty()) gateway::apply_listen(gw_config, listen);
    auto backend = gateway::make_backend(gw_config);
    gateway::Gateway gw(gw_config, std::move(backend));
    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    gw.start();
    gw.resolve_plan();
    out << "listening on " << gw_config.host << ":" << gw.port() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    gw.stop();
    return 0;
  }
};

// ------------------------------------------------------------------- report

struct ReportCmd {
  std::string run_dir;
  std::string out_path;

  void add(CLI::App& app, std::function<int()>& action, std::ostream& out) {
    auto* sub = app.add_subcommand("report", "Markdown summary of a run directory");
    sub->add_option("--run-dir", run_dir, "Directory with JSON artifacts")->required();
    sub->add_option("--out", out_path, "Write Markdown here instead of stdout");
    sub->callback([this, &action, &out] { action = [this, &out] { return run(out); }; });
  }

  int run(std::ostream& out) {
    if (!std::filesystem::is_directory(run_dir)) {
      throw Error(Errc::ConfigError, "not a directory: " + run_dir);
    }
    bool failed = false;
    emit(render_report(run_dir, failed), out_path, out);
    return failed ? 1 : 0;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Queue-depth planning, dispatch simulation and serving for heterogeneous "
               "embedding fleets",
               "hetadmit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hetadmit 0.1.0");

  std::function<int()> action;
  CalibrateCmd calibrate;
  EstimateCmd estimate;
  StressCmd stress;
  FinetuneCmd finetune;
  SimulateCmd simulate_cmd;
  CostCmd cost;
  ServeCmd serve;
  ReportCmd report;
  AffinityCmd affinity;
  calibrate.add(app, action, out);
  estimate.add(app, action, out);
  stress.add(app, action, out);
  finetune.add(app, action, out);
  simulate_cmd.add(app, action, out);
  cost.add(app, action, out);
  serve.add(app, action, out);
  report.add(app, action, out);
  affinity.add(app, action, out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hetadmit::cli
