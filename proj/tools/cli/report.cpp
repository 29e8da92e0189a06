#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

#include "cli.hpp"
#include "hetadmit/cost.hpp"
#include "hetadmit/serialize.hpp"

namespace hetadmit::cli {

namespace {

using nlohmann::json;

std::string num(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string cell(const json& j, const char* key, int digits = -1) {
  if (!j.contains(key) || j.at(key).is_null()) return "-";
  const auto& v = j.at(key);
  if (v.is_number_float() && digits >= 0) return num(v.get<double>(), digits);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

struct Artifact {
  std::string name;
  json body;
};

std::string method_of(const Artifact& a) {
  if (a.body.contains("method")) return a.body.at("method").get<std::string>();
  return a.name;
}

}  // namespace

std::string render_report(const std::filesystem::path& run_dir, bool& failed) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<Artifact> plans, fits, stresses, metrics, costs;
  std::vector<std::string> unreadable, ignored;
  for (const auto& path : files) {
    Artifact a{path.stem().string(), {}};
    try {
      a.body = json::parse(read_file(path));
    } catch (const std::exception& e) {
      unreadable.push_back(path.filename().string() + ": " + e.what());
      continue;
    }
    const auto& b = a.body;
    if (!b.is_object()) {
      ignored.push_back(path.filename().string());
    } else if (b.contains("throughput_qps")) {
      metrics.push_back(std::move(a));
    } else if (b.contains("probes")) {
      stresses.push_back(std::move(a));
    } else if (b.contains("r_squared")) {
      fits.push_back(std::move(a));
    } else if (b.contains("peak_savings_ratio")) {
      costs.push_back(std::move(a));
    } else if (b.contains("accelerator_depth")) {
      plans.push_back(std::move(a));
    } else {
      ignored.push_back(path.filename().string());
    }
  }

  std::ostringstream md;
  md << "# Run report: " << run_dir.filename().string() << "\n\n";

  if (!plans.empty() || !stresses.empty()) {
    md << "## Queue depths\n\n"
       << "| method | SLO (s) | accelerator | CPU | heterogeneous |\n"
       << "|---|---|---|---|---|\n";
    for (const auto& p : plans) {
      md << "| " << method_of(p) << " | " << cell(p.body, "slo_s", 2) << " | "
         << cell(p.body, "accelerator_depth") << " | " << cell(p.body, "cpu_depth") << " | "
         << cell(p.body, "heterogeneous") << " |\n";
    }
    for (const auto& s : stresses) {
      md << "| stress test (" << cell(s.body, "device") << ", step " << cell(s.body, "step")
         << ") | " << cell(s.body, "slo_s", 2) << " | " << cell(s.body, "depth") << " | - | - |\n";
    }
    md << "\n";
  }

  if (!fits.empty()) {
    md << "## Latency fits\n\n"
       << "| source | alpha (s) | beta (s) | r² | samples |\n"
       << "|---|---|---|---|---|\n";
    for (const auto& f : fits) {
      const auto label = f.body.contains("device") ? cell(f.body, "device") : f.name;
      md << "| " << label << " | " << cell(f.body, "alpha", 6) << " | " << cell(f.body, "beta", 6)
         << " | " << cell(f.body, "r_squared", 6) << " | " << cell(f.body, "n") << " |\n";
    }
    md << "\n";
  }

  if (!metrics.empty()) {
    md << "## Simulated service\n\n"
       << "| run | plan | accepted | busy | SLO violations | p50 (s) | p99 (s) | max (s) | "
          "throughput (q/s) |\n"
       << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& m : metrics) {
      std::string plan = "-";
      if (m.body.contains("plan")) {
        const auto& p = m.body.at("plan");
        plan = cell(p, "accelerator_depth") + " + " + cell(p, "cpu_depth");
      }
      md << "| " << m.name << " | " << plan << " | " << cell(m.body, "accepted") << " | "
         << cell(m.body, "rejected_busy") << " | " << cell(m.body, "slo_violations") << " | "
         << cell(m.body, "latency_p50_s", 3) << " | " << cell(m.body, "latency_p99_s", 3)
         << " | " << cell(m.body, "latency_max_s", 3) << " | "
         << cell(m.body, "throughput_qps", 2) << " |\n";
    }
    md << "\n";
    if (metrics.size() >= 2) {
      const auto& base = metrics.front().body;
      const double t0 = base.value("throughput_qps", 0.0);
      if (t0 > 0.0) {
        md << "Throughput relative to `" << metrics.front().name << "`:\n\n";
        for (std::size_t i = 1; i < metrics.size(); ++i) {
          const double t = metrics[i].body.value("throughput_qps", 0.0);
          md << "- `" << metrics[i].name << "`: " << num(t / t0, 3) << "x\n";
        }
        md << "\n";
      }
    }
  }

  if (!costs.empty()) {
    md << "## Offload gains\n\n"
       << "| source | CPU depth | accelerator depth | peak savings | throughput gain | "
          "average-strategy cost | peak-strategy cost |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& c : costs) {
      md << "| " << c.name << " | " << cell(c.body, "c_cpu") << " | " << cell(c.body, "c_accel")
         << " | " << format_percent(c.body.value("peak_savings_ratio", 0.0)) << " | "
         << format_percent(c.body.value("throughput_gain_ratio", 0.0)) << " | "
         << cell(c.body, "average_strategy_cost", 2) << " | "
         << cell(c.body, "peak_strategy_cost", 2) << " |\n";
    }
    md << "\n";
  }

  if (plans.empty() && fits.empty() && stresses.empty() && metrics.empty() && costs.empty()) {
    md << "No recognised artifacts.\n\n";
  }
  if (!ignored.empty()) {
    md << "Ignored files: ";
    for (std::size_t i = 0; i < ignored.size(); ++i) md << (i ? ", " : "") << ignored[i];
    md << "\n\n";
  }
  if (!unreadable.empty()) {
    failed = true;
    md << "## Unreadable files\n\n";
    for (const auto& u : unreadable) md << "- " << u << "\n";
    md << "\n";
  }
  return md.str();
}

}  // namespace hetadmit::cli
