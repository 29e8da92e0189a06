// Acceptance suite: one PASS/FAIL line per criterion.
//
//   hetadmit_acceptance [--criterion N]
//
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "hetadmit/calibration.hpp"
#include "hetadmit/dispatch.hpp"
#include "hetadmit/serialize.hpp"
#include "hetadmit/simulation.hpp"
#include "oracles.hpp"

using namespace hetadmit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> check;
};

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hetadmit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct NamedDevice {
  const char* name;
  DeviceKind kind;
  double alpha;
  double beta;
  std::uint64_t depth_1s;
  std::uint64_t depth_2s;
};

// Noise-free device lines and their expected depths at T = 1 s and T = 2 s.
const std::vector<NamedDevice> kDevices{
    {"v100", DeviceKind::Accelerator, 0.018, 0.27, 40, 96},
    {"xeon", DeviceKind::Cpu, 0.084, 0.32, 8, 20},
    {"atlas", DeviceKind::Accelerator, 0.009, 0.24, 84, 195},
    {"kunpeng", DeviceKind::Cpu, 0.073, 0.85, 2, 15},
};

DeviceProfile profile_of(const NamedDevice& d, double noise = 0.0) {
  DeviceProfile p;
  p.name = d.name;
  p.kind = d.kind;
  p.latency = LatencyModel(d.alpha, d.beta);
  p.noise_stddev = noise;
  return p;
}

const NamedDevice& device(const char* name) {
  for (const auto& d : kDevices) {
    if (std::string(d.name) == name) return d;
  }
  throw std::logic_error(name);
}

// 1: estimator depths, exact.
Outcome criterion_depths() {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool pass = true;
  for (const auto& d : kDevices) {
    for (const auto& [slo, want] : {std::pair{1, d.depth_1s}, std::pair{2, d.depth_2s}}) {
      const auto r = cli({"estimate", "--alpha", fmt("%.17g", d.alpha), "--beta",
                          fmt("%.17g", d.beta), "--slo", std::to_string(slo)});
      const auto got = r.code == 0 ? std::stoull(r.out) : 0;
      detail << d.name << "@" << slo << "s=" << got << " ";
      if (r.code != 0 || got != want) {
        pass = false;
        detail << "(want " << want << ") ";
      }
    }
  }
  const double t = elapsed_s(start);
  detail << "runtime " << fmt("%.3f", t) << "s";
  return {pass && t < 1.0, detail.str()};
}

// 2: alpha ratios recovered by calibrating the noise-free devices.
Outcome criterion_alpha_ratios() {
  auto fitted_alpha = [](const NamedDevice& d) {
    SimulatedDevice dev(profile_of(d), 1);
    return calibrate_device(dev, Slo(2.0)).fit.model.alpha();
  };
  const double npu = fitted_alpha(device("atlas")) / fitted_alpha(device("kunpeng"));
  const double gpu = fitted_alpha(device("v100")) / fitted_alpha(device("xeon"));
  const bool pass = std::abs(npu - 0.12) <= 0.02 && std::abs(gpu - 0.21) <= 0.02;
  return {pass, "atlas/kunpeng " + fmt("%.4f", npu) + " (0.12 +/- 0.02), v100/xeon " +
                    fmt("%.4f", gpu) + " (0.21 +/- 0.02)"};
}

// 3: stress test with step 8 at T = 2 s.
Outcome criterion_stress() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = cli({"stress", "--alpha", "0.018", "--beta", "0.27", "--slo", "2", "--step", "8"});
  const double t = elapsed_s(start);
  if (r.code != 0) return {false, "stress failed: " + r.err};
  const auto got = std::stoull(r.out);
  const auto est = estimate_max_concurrency(LatencyModel(0.018, 0.27), Slo(2.0)).depth;
  std::ostringstream detail;
  detail << "stress " << got << " (want 88), estimator " << est << "; line at 96 = "
         << fmt("%.4f", 0.018 * 96 + 0.27) << "s, at 104 = " << fmt("%.4f", 0.018 * 104 + 0.27)
         << "s; runtime " << fmt("%.3f", t) << "s";
  return {got == 88 && t < 1.0, detail.str()};
}

// 4: cost figures and saturated throughput ratio.
Outcome criterion_gains() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = cli({"cost", "--c-cpu", "22", "--c-accel", "96", "--json"});
  if (r.code != 0) return {false, "cost failed: " + r.err};
  const auto j = nlohmann::json::parse(r.out);
  const double savings = j.at("peak_savings_ratio").get<double>();
  const double gain = j.at("throughput_gain_ratio").get<double>();

  const std::vector profiles{profile_of(device("v100")), profile_of(device("xeon"))};
  const auto fleet = validate_fleet(profiles);
  WorkloadSpec w;
  w.mode = ClosedLoop{118, 2000};
  w.seed = 1;
  const auto hetero = simulate(fleet, QueuePlan{96, 22, true}, w, Slo(2.0));
  const auto single = simulate(fleet, QueuePlan{96, 0, false}, w, Slo(2.0));
  const double ratio = hetero.throughput / single.throughput;
  const double t = elapsed_s(start);

  const bool pass = std::abs(savings - 0.186) <= 0.001 && std::abs(gain - 0.229) <= 0.001 &&
                    std::abs(ratio - 1.22) <= 0.02 && t < 5.0;
  return {pass, "savings " + j.at("peak_savings_pct").get<std::string>() + ", gain " +
                    j.at("throughput_gain_pct").get<std::string>() + ", throughput " +
                    fmt("%.3f", hetero.throughput) + "/" + fmt("%.3f", single.throughput) +
                    " = " + fmt("%.4f", ratio) + "x (1.22 +/- 0.02); runtime " + fmt("%.3f", t) +
                    "s"};
}

// 5: CPU/accelerator continuous concurrency ratio grows with the SLO.
Outcome criterion_slo_relaxation() {
  std::mt19937_64 rng(20240501);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int counterexamples = 0;
  constexpr int kSets = 5000;
  for (int i = 0; i < kSets; ++i) {
    const LatencyModel acc(1e-4 + 0.1 * u(rng), 0.8 * u(rng));
    const LatencyModel cpu(1e-4 + 0.3 * u(rng), acc.beta() + 1e-3 + u(rng));
    const double t = cpu.beta() + 1e-3 + 3.0 * u(rng);
    const double dt = 1e-3 + 2.0 * u(rng);
    const double before = continuous_concurrency(cpu, t) / continuous_concurrency(acc, t);
    const double after = continuous_concurrency(cpu, t + dt) / continuous_concurrency(acc, t + dt);
    if (!(after > before)) ++counterexamples;
  }
  return {counterexamples == 0,
          std::to_string(kSets) + " sets, " + std::to_string(counterexamples) + " counterexamples"};
}

// 6: estimator against a brute-force scan.
Outcome criterion_estimator_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> alpha(1e-4, 0.3);
  std::uniform_real_distribution<double> beta(0.0, 2.0);
  std::uniform_real_distribution<double> slo(0.05, 4.0);
  constexpr std::uint64_t kCap = 4096;
  int mismatches = 0, capped = 0;
  constexpr int kCases = 5000;
  for (int i = 0; i < kCases; ++i) {
    const double a = alpha(rng), b = beta(rng), t = slo(rng);
    const auto est = estimate_max_concurrency(LatencyModel(a, b), Slo(t), kCap);
    const auto c = est.depth;
    const auto brute = oracle::brute_force_depth(a, b, t, kCap + 1);
    const bool unbounded = brute > kCap;
    capped += unbounded;
    const bool threshold_ok = (c == 0 || oracle::within_slo(a, b, t, c)) &&
                              (unbounded || !oracle::within_slo(a, b, t, c + 1));
    if (!threshold_ok || c != std::min(brute, kCap) || est.unbounded != unbounded) ++mismatches;
  }
  return {mismatches == 0,
          std::to_string(kCases) + " cases (" + std::to_string(capped) + " at the 4096 cap), " +
              std::to_string(mismatches) + " mismatches"};
}

// 7: concurrent dispatcher bounds, priority, busy minimality, conservation.
Outcome criterion_dispatcher() {
  constexpr std::uint64_t kAcc = 12, kCpu = 5;
  constexpr int kThreads = 16, kOpsPerThread = 12500;
  std::uint64_t violations = 0;
  std::uint64_t total_ops = 0;
  std::ostringstream detail;

  for (bool heter : {true, false}) {
    DispatchDecisionLog log;
    Dispatcher dispatcher(QueueLayout{kAcc, kCpu, heter}, &log);
    std::atomic<std::uint64_t> admits{0}, releases{0}, bound_breaches{0};
    std::atomic<bool> done{false};

    std::thread sampler([&] {
      while (!done) {
        if (dispatcher.queues().accelerator()->length() > kAcc ||
            dispatcher.queues().cpu()->length() > kCpu) {
          ++bound_breaches;
        }
      }
    });
    std::vector<std::thread> submitters;
    for (int t = 0; t < kThreads; ++t) {
      submitters.emplace_back([&, t] {
        std::mt19937 rng(static_cast<unsigned>(t) * 7919u + heter);
        std::vector<Placement> held;
        for (int i = 0; i < kOpsPerThread; ++i) {
          if (!held.empty() && (rng() % 3 == 0 || held.size() > 4)) {
            dispatcher.release(held.back());
            held.pop_back();
            ++releases;
            continue;
          }
          const auto p = dispatcher.dispatch(Query{static_cast<std::uint64_t>(i), 1, 0.0});
          if (p != Placement::Busy) {
            held.push_back(p);
            ++admits;
          }
        }
        for (auto p : held) {
          dispatcher.release(p);
          ++releases;
        }
      });
    }
    for (auto& th : submitters) th.join();
    done = true;
    sampler.join();

    std::uint64_t priority = 0, busy = 0, bounds = 0;
    for (const auto& r : log.snapshot()) {
      if (r.acc_len > kAcc || r.cpu_len > kCpu) ++bounds;
      if (r.placement == Placement::Cpu && (!heter || r.acc_len != kAcc)) ++priority;
      if (r.placement == Placement::Busy &&
          (r.acc_len != kAcc || (heter && r.cpu_len != kCpu))) {
        ++busy;
      }
    }
    const auto conservation = (admits - releases) != dispatcher.queues().accelerator()->length() +
                                                         dispatcher.queues().cpu()->length();
    const auto v = bound_breaches.load() + bounds + priority + busy + (conservation ? 1 : 0);
    violations += v;
    total_ops += admits + releases + (log.size() - admits);
    detail << (heter ? "heterogeneous" : "accelerator-only") << ": " << log.size()
           << " dispatches, " << v << " violations; ";
  }
  detail << "threads " << kThreads << ", total ops " << total_ops;
  return {violations == 0 && total_ops >= 100000, detail.str()};
}

// 8: measure -> fit round trip.
Outcome criterion_round_trip() {
  std::vector<std::uint64_t> cs;
  for (std::uint64_t c = 8; c <= 96; c += 8) cs.push_back(c);

  double worst_rel = 0.0, worst_r2 = 0.0;
  for (const auto& d : kDevices) {
    SimulatedDevice dev(profile_of(d), 3);
    const auto fit = fit_latency_model(measure_latency_curve(dev, cs));
    worst_rel = std::max({worst_rel, std::abs(fit.model.alpha() - d.alpha) / d.alpha,
                          std::abs(fit.model.beta() - d.beta) / d.beta});
    worst_r2 = std::max(worst_r2, std::abs(fit.r_squared - 1.0));
  }

  int covered = 0;
  constexpr int kTrials = 100;
  const auto& v100 = device("v100");
  for (int seed = 0; seed < kTrials; ++seed) {
    SimulatedDevice dev(profile_of(v100, 0.01), derive_seed(2024, seed));
    const auto fit = fit_latency_model(measure_latency_curve(dev, cs));
    if (std::abs(fit.model.alpha() - v100.alpha) <= 3.0 * fit.alpha_stderr) ++covered;
  }
  const bool pass = worst_rel <= 1e-9 && worst_r2 <= 1e-12 && covered >= 95;
  std::ostringstream detail;
  detail << "noise-free max rel err " << fmt("%.2e", worst_rel) << ", max |r2-1| "
         << fmt("%.2e", worst_r2) << "; noisy alpha within 3 SE in " << covered << "/" << kTrials;
  return {pass, detail.str()};
}

// 9: simulate at the estimated depth and one above.
Outcome criterion_depth_validity() {
  std::ostringstream detail;
  bool pass = true;
  for (const auto& d : kDevices) {
    const std::vector profiles{profile_of(d)};
    const auto fleet = validate_fleet(profiles);
    for (double t : {1.0, 2.0}) {
      const auto depth = estimate_max_concurrency(LatencyModel(d.alpha, d.beta), Slo(t)).depth;
      auto run = [&](std::uint64_t c) {
        const QueuePlan plan = d.kind == DeviceKind::Accelerator ? QueuePlan{c, 0, false}
                                                                 : QueuePlan{0, c, false};
        WorkloadSpec w;
        w.mode = ClosedLoop{c, 3};
        return simulate(fleet, plan, w, Slo(t)).slo_violations;
      };
      const auto at = run(depth);
      const auto above = run(depth + 1);
      if (at != 0 || above < 1) {
        pass = false;
        detail << d.name << "@" << t << "s depth " << depth << ": " << at << "/" << above << " ";
      }
    }
  }
  if (pass) detail << "8 device/SLO pairs: 0 violations at depth, >= 1 at depth+1";
  return {pass, detail.str()};
}

// 10: identical seeds give byte-identical artifacts.
Outcome criterion_determinism() {
  const auto dir = fs::temp_directory_path() / ("hetadmit_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(p("fleet.toml")) << R"(seed = 11

[slo]
max_latency_s = 2.0

[[device]]
name = "v100"
kind = "gpu"
alpha = 0.018
beta = 0.27
noise_stddev = 0.02
outlier_fraction = 0.01

[[device]]
name = "xeon"
kind = "cpu"
alpha = 0.084
beta = 0.32
noise_stddev = 0.03

[plan]
accelerator_depth = 96
cpu_depth = 22
heterogeneous = true
)";
  std::ofstream(p("tune.toml")) << R"(seed = 11

[slo]
max_latency_s = 2.0

[[device]]
name = "v100"
kind = "gpu"
alpha = 0.018
beta = 0.27
noise_stddev = 0.005

[[device]]
name = "xeon"
kind = "cpu"
alpha = 0.084
beta = 0.32
noise_stddev = 0.005
)";
  std::ofstream(p("closed.toml")) << "[workload]\nmode = \"closed_loop\"\nconcurrency = 130\n"
                                      "batches = 50\n";
  std::ofstream(p("diurnal.toml")) << "[workload]\nmode = \"diurnal\"\nbase_rate = 20.0\n"
                                       "peak_rate = 60.0\npeak_hours = [0]\nduration_s = 1800.0\n"
                                       "ramp_s = 300.0\n";

  std::vector<std::vector<std::string>> commands;
  for (const char* wl : {"closed.toml", "diurnal.toml"}) {
    commands.push_back({"simulate", "--config", p("fleet.toml"), "--workload", p(wl), "--seed",
                        "99", "--decisions", p(std::string(wl) + ".decisions.jsonl"), "--out"});
  }
  commands.push_back({"stress", "--config", p("fleet.toml"), "--device", "v100", "--step", "4",
                      "--repeats", "3", "--seed", "5", "--out"});
  commands.push_back({"finetune", "--config", p("tune.toml"), "--radius", "2", "--seed", "5",
                      "--out"});

  int identical = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::string first, second;
    std::string decisions_first;
    for (int rep = 0; rep < 2; ++rep) {
      auto args = commands[i];
      const auto out = p("run" + std::to_string(i) + "_" + std::to_string(rep) + ".json");
      args.push_back(out);
      const auto r = cli(args);
      if (r.code != 0) {
        detail << args[0] << " failed: " << r.err;
        break;
      }
      auto text = read_file(out);
      if (args[0] == "simulate") text += read_file(args[args.size() - 3]);
      (rep == 0 ? first : second) = text;
    }
    if (!first.empty() && first == second) ++identical;
  }
  fs::remove_all(dir);
  detail << identical << "/" << commands.size() << " invocations byte-identical";
  return {identical == static_cast<int>(commands.size()), detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::stoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "estimator depths at T=1s and T=2s", criterion_depths},
      {2, "alpha ratio anchors", criterion_alpha_ratios},
      {3, "stress test with step 8 at T=2s", criterion_stress},
      {4, "savings, throughput gain and saturated throughput ratio", criterion_gains},
      {5, "SLO relaxation ratio law", criterion_slo_relaxation},
      {6, "estimator brute-force oracle", criterion_estimator_oracle},
      {7, "concurrent dispatcher bounds", criterion_dispatcher},
      {8, "calibration round trip", criterion_round_trip},
      {9, "end-to-end depth validity", criterion_depth_validity},
      {10, "determinism of CLI artifacts", criterion_determinism},
  };

  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d: %s | %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str());
    failed += o.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
