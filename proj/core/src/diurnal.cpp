#include <cmath>
#include <numbers>
#include <random>

#include "hetadmit/simulation.hpp"

namespace hetadmit {

namespace {

constexpr double kHour = 3600.0;
constexpr double kDay = 24.0 * kHour;

// Weight in [0, 1] of one peak hour at time-of-day `tod`.
double peak_weight(double peak_hour, double ramp, double tod) {
  const double start = std::fmod(std::fmod(peak_hour, 24.0) + 24.0, 24.0) * kHour;
  double offset = tod - start;
  offset = std::fmod(std::fmod(offset, kDay) + kDay, kDay);  // [0, day)
  if (offset < kHour) return 1.0;
  if (ramp <= 0.0) return 0.0;
  const double after = offset - kHour;  // distance past the end
  const double before = kDay - offset;  // distance before the start
  const double distance = std::min(after, before);
  if (distance >= ramp) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * distance / ramp));
}

}  // namespace

double diurnal_rate(const DiurnalOpenLoop& spec, double t) noexcept {
  const double tod = std::fmod(t, kDay);
  double weight = 0.0;
  for (double h : spec.peak_hours) weight = std::max(weight, peak_weight(h, spec.ramp, tod));
  return spec.base_rate + (spec.peak_rate - spec.base_rate) * weight;
}

std::vector<double> generate_diurnal(const DiurnalOpenLoop& spec, std::uint64_t seed) {
  std::vector<double> arrivals;
  const double max_rate = std::max(spec.base_rate, spec.peak_rate);
  if (max_rate <= 0.0 || spec.duration <= 0.0) return arrivals;

  // Homogeneous Poisson process at the maximum rate, thinned to the curve.
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(max_rate);
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  const bool homogeneous = spec.base_rate == spec.peak_rate || spec.peak_hours.empty();
  double t = 0.0;
  while (true) {
    t += gap(rng);
    if (t >= spec.duration) break;
    if (homogeneous && spec.base_rate == max_rate) {
      arrivals.push_back(t);
      continue;
    }
    if (accept(rng) * max_rate < diurnal_rate(spec, t)) arrivals.push_back(t);
  }
  return arrivals;
}

}  // namespace hetadmit
