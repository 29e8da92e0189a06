#include "hetadmit/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <set>
#include <string>

namespace hetadmit {

FitResult fit_latency_model(std::span<const ProfilingSample> samples) {
  if (samples.size() < 2) {
    throw Error(Errc::InsufficientSamples, "at least two profiling samples are required");
  }
  std::set<std::uint64_t> distinct;
  for (const auto& s : samples) {
    s.validate();
    distinct.insert(s.concurrency);
  }
  if (distinct.size() < 2) {
    throw Error(Errc::DegenerateSamples, "samples need at least two distinct concurrencies");
  }

  const double n = static_cast<double>(samples.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& s : samples) {
    mean_x += static_cast<double>(s.concurrency);
    mean_y += s.observed_latency;
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& s : samples) {
    const double dx = static_cast<double>(s.concurrency) - mean_x;
    const double dy = s.observed_latency - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }

  double slope = sxy / sxx;
  double intercept = mean_y - slope * mean_x;

  FitResult fit;
  fit.sample_count = samples.size();

  if (samples.size() > 2) {
    double ss_res = 0.0;
    for (const auto& s : samples) {
      const double r = s.observed_latency - (slope * static_cast<double>(s.concurrency) + intercept);
      ss_res += r * r;
    }
    const double sigma2 = ss_res / (n - 2.0);
    fit.alpha_stderr = std::sqrt(sigma2 / sxx);
    fit.beta_stderr = std::sqrt(sigma2 * (1.0 / n + mean_x * mean_x / sxx));
  }

  if (slope < 0.0) {
    slope = 0.0;
    intercept = mean_y;
    fit.clamped = true;
  } else if (intercept < 0.0) {
    double sx2 = 0.0;
    double sxy0 = 0.0;
    for (const auto& s : samples) {
      const double x = static_cast<double>(s.concurrency);
      sx2 += x * x;
      sxy0 += x * s.observed_latency;
    }
    slope = sxy0 / sx2;
    intercept = 0.0;
    fit.clamped = true;
  }
  fit.model = LatencyModel(slope, intercept);

  double ss_res = 0.0;
  for (const auto& s : samples) {
    const double r = s.observed_latency - fit.model.predict(static_cast<double>(s.concurrency));
    ss_res += r * r;
  }
  if (syy > 0.0) {
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  } else {
    fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

ConcurrencyEstimate estimate_max_concurrency(const LatencyModel& model, const Slo& slo,
                                             std::uint64_t hard_cap) {
  const double limit = slo.max_latency();
  if (!slo.met_by(model.predict(1.0))) return {0, false};
  if (model.alpha() == 0.0) return {hard_cap, true};

  const double guess = std::floor((limit - model.beta()) / model.alpha());
  if (guess >= static_cast<double>(hard_cap)) {
    if (slo.met_by(model.predict(static_cast<double>(hard_cap)))) return {hard_cap, true};
  }
  auto c = static_cast<std::uint64_t>(std::clamp(guess, 1.0, static_cast<double>(hard_cap)));
  // The closed form can be off by one near exact boundaries.
  while (c < hard_cap && slo.met_by(model.predict(static_cast<double>(c + 1)))) ++c;
  while (c > 0 && !slo.met_by(model.predict(static_cast<double>(c)))) --c;
  if (c == hard_cap) return {hard_cap, true};
  return {c, false};
}

double continuous_concurrency(const LatencyModel& model, double slo_seconds) {
  if (model.alpha() <= 0.0) {
    throw Error(Errc::InvalidArgument, "continuous concurrency needs alpha > 0");
  }
  return (slo_seconds - model.beta()) / model.alpha();
}

QueuePlan estimate_plan(const Fleet& fleet, const Slo& slo, bool heterogeneous,
                        std::uint64_t hard_cap) {
  QueuePlan plan;
  const auto* accel = fleet.primary_accelerator();
  const auto* cpu = fleet.offload_cpu();
  if (accel == nullptr && cpu == nullptr) throw Error(Errc::NoDevices, "fleet has no devices");
  if (accel != nullptr) {
    plan.accelerator_depth = estimate_max_concurrency(accel->latency, slo, hard_cap).depth;
  }
  if (cpu != nullptr && (heterogeneous || accel == nullptr)) {
    plan.cpu_depth = estimate_max_concurrency(cpu->latency, slo, hard_cap).depth;
  }
  plan.heterogeneous_enabled = heterogeneous && accel != nullptr && cpu != nullptr;
  return plan;
}

StressResult run_stress_test(SimulatedDevice& device, const Slo& slo, std::uint64_t step,
                             const StressOptions& options) {
  if (step < 1) throw Error(Errc::InvalidArgument, "stress-test step must be >= 1");
  const auto repeats = std::max<std::uint32_t>(options.repeats, 1);

  StressResult result;
  for (std::uint64_t c = step; c <= options.hard_cap; c += step) {
    double worst = 0.0;
    for (std::uint32_t r = 0; r < repeats; ++r) {
      worst = std::max(worst, device.sample_batch_latency(c));
    }
    const bool passed = slo.met_by(worst);
    result.probes.push_back({c, worst, passed});
    if (!passed) break;
    result.depth = c;
  }
  if (result.depth == 0) {
    throw Error(Errc::DeviceInfeasible,
                "device '" + device.profile().name + "' misses the SLO at the first probe");
  }
  return result;
}

namespace {

DeviceProfile with_offset(DeviceProfile profile, double offset) {
  profile.latency =
      LatencyModel(profile.latency.alpha(), std::max(0.0, profile.latency.beta() + offset));
  return profile;
}

std::uint64_t lower_bound_of(std::uint64_t depth, std::uint64_t radius) {
  return depth > radius ? depth - radius : 0;
}

}  // namespace

QueuePlan fine_tune_depths(const QueuePlan& initial, const Fleet& fleet, const Slo& slo,
                           std::uint64_t search_radius, const FineTuneOptions& options) {
  const auto* accel = fleet.primary_accelerator();
  const auto* cpu = fleet.offload_cpu();
  if (search_radius == 0 || !initial.heterogeneous_enabled || accel == nullptr ||
      cpu == nullptr) {
    return initial;
  }

  const std::vector<DeviceProfile> adjusted{with_offset(*accel, options.accelerator_offset),
                                            with_offset(*cpu, options.cpu_offset)};
  const Fleet collaborative = validate_fleet(adjusted);

  std::optional<QueuePlan> best;
  auto better = [](const QueuePlan& a, const QueuePlan& b) {
    const auto ta = a.accelerator_depth + a.cpu_depth;
    const auto tb = b.accelerator_depth + b.cpu_depth;
    if (ta != tb) return ta > tb;
    if (a.accelerator_depth != b.accelerator_depth) return a.accelerator_depth > b.accelerator_depth;
    return a.cpu_depth < b.cpu_depth;
  };

  for (auto a = lower_bound_of(initial.accelerator_depth, search_radius);
       a <= initial.accelerator_depth + search_radius; ++a) {
    for (auto c = lower_bound_of(initial.cpu_depth, search_radius);
         c <= initial.cpu_depth + search_radius; ++c) {
      if (a + c == 0) continue;
      const QueuePlan candidate{a, c, true};
      if (best && !better(candidate, *best)) continue;

      WorkloadSpec workload;
      workload.mode = ClosedLoop{a + c, std::max<std::uint64_t>(options.batches, 1)};
      workload.seed = options.seed;
      const auto metrics = simulate(collaborative, candidate, workload, slo);
      if (metrics.slo_violations == 0 && metrics.rejected_busy == 0) best = candidate;
    }
  }
  if (!best) {
    throw Error(Errc::NoFeasiblePlan, "no plan in the search grid meets the SLO");
  }
  return *best;
}

std::vector<std::uint64_t> geometric_schedule(std::uint64_t upper, std::size_t points) {
  upper = std::max<std::uint64_t>(upper, 1);
  points = std::max<std::size_t>(points, 1);
  std::vector<std::uint64_t> out;
  if (points == 1) return {upper};
  const double ratio = std::log(static_cast<double>(upper)) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    auto c = static_cast<std::uint64_t>(std::llround(std::exp(ratio * static_cast<double>(i))));
    c = std::max<std::uint64_t>(c, 1);
    if (!out.empty() && c <= out.back()) c = out.back() + 1;
    out.push_back(c);
  }
  return out;
}

CalibrationRun calibrate_device(SimulatedDevice& device, const Slo& slo,
                                const ProfilingSchedule& schedule) {
  CalibrationRun run;
  run.samples = measure_latency_curve(device, schedule.pilot);
  const auto pilot = fit_latency_model(run.samples);

  std::uint64_t upper = schedule.hard_cap;
  const double headroom = slo.max_latency() - pilot.model.beta();
  if (headroom <= 0.0) {
    upper = 2;
  } else if (pilot.model.alpha() > 0.0) {
    upper = static_cast<std::uint64_t>(std::clamp(
        std::ceil(2.0 * headroom / pilot.model.alpha()), 2.0,
        static_cast<double>(schedule.hard_cap)));
  }
  const auto points = geometric_schedule(upper, schedule.points);
  const auto more = measure_latency_curve(device, points);
  run.samples.insert(run.samples.end(), more.begin(), more.end());
  run.fit = fit_latency_model(run.samples);
  return run;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ProfilingSample> read_profile_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<ProfilingSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != "concurrency,latency_s") {
        throw Error(Errc::ParseError, "profile csv: expected header 'concurrency,latency_s'");
      }
      header_seen = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      throw Error(Errc::ParseError, "profile csv line " + std::to_string(line_no) + ": missing ','");
    }
    const auto c_text = trim(row.substr(0, comma));
    const auto t_text = trim(row.substr(comma + 1));
    ProfilingSample s;
    auto [pc, ec1] = std::from_chars(c_text.data(), c_text.data() + c_text.size(), s.concurrency);
    auto [pt, ec2] =
        std::from_chars(t_text.data(), t_text.data() + t_text.size(), s.observed_latency);
    if (ec1 != std::errc() || pc != c_text.data() + c_text.size() || ec2 != std::errc() ||
        pt != t_text.data() + t_text.size()) {
      throw Error(Errc::ParseError,
                  "profile csv line " + std::to_string(line_no) + ": malformed row");
    }
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(Errc::ParseError,
                  "profile csv line " + std::to_string(line_no) + ": " + e.what());
    }
    samples.push_back(s);
  }
  if (!header_seen) throw Error(Errc::ParseError, "profile csv is empty");
  return samples;
}

}  // namespace hetadmit
