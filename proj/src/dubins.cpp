#include "parashield/dubins.hpp"

#include <algorithm>
#include <cmath>

#include "parashield/errors.hpp"

namespace parashield {

void DubinsParams::validate() const {
  if (!(tau > 0))
    throw ConfigError("sampling time tau must be positive");
  if (disturbance.radius.size() != 3)
    throw ConfigError("Dubins disturbance box needs three radii");
  for (double r : disturbance.radius)
    if (!(r >= 0))
      throw ConfigError("disturbance radius must be non-negative");
}

Pose dubins_step(const Pose& state, std::span<const double> input, std::span<const double> w,
                 const DubinsParams& params) {
  const double v = input[0];
  const double a = input[1];
  return {state[0] + v * std::cos(state[2]) * params.tau + w[0],
          state[1] + v * std::sin(state[2]) * params.tau + w[1],
          wrap_angle(state[2] + a * params.tau + w[2])};
}

std::pair<double, double> cos_range(double lo, double hi) {
  if (hi - lo >= 2 * kPi)
    return {-1.0, 1.0};
  double mn = std::min(std::cos(lo), std::cos(hi));
  double mx = std::max(std::cos(lo), std::cos(hi));
  // maxima at 2k pi, minima at (2k + 1) pi
  if (std::floor(hi / (2 * kPi)) > std::floor(lo / (2 * kPi)) || std::fmod(lo, 2 * kPi) == 0)
    mx = 1.0;
  if (std::floor((hi - kPi) / (2 * kPi)) > std::floor((lo - kPi) / (2 * kPi)) ||
      std::fmod(lo - kPi, 2 * kPi) == 0)
    mn = -1.0;
  return {mn, mx};
}

std::pair<double, double> sin_range(double lo, double hi) {
  return cos_range(lo - kPi / 2, hi - kPi / 2);
}

Box reach_overapprox(const Box& cell, std::span<const double> input, const DubinsParams& params) {
  const double v = input[0];
  const double a = input[1];
  const auto& w = params.disturbance.radius;
  const double step = v * params.tau;

  auto [cmin, cmax] = cos_range(cell.lo[2], cell.hi[2]);
  auto [smin, smax] = sin_range(cell.lo[2], cell.hi[2]);
  // v may be negative, which swaps the bounds
  const double dx0 = std::min(step * cmin, step * cmax);
  const double dx1 = std::max(step * cmin, step * cmax);
  const double dy0 = std::min(step * smin, step * smax);
  const double dy1 = std::max(step * smin, step * smax);

  Box r{std::vector<double>(3), std::vector<double>(3)};
  r.lo[0] = cell.lo[0] + dx0 - w[0];
  r.hi[0] = cell.hi[0] + dx1 + w[0];
  r.lo[1] = cell.lo[1] + dy0 - w[1];
  r.hi[1] = cell.hi[1] + dy1 + w[1];
  r.lo[2] = cell.lo[2] + a * params.tau - w[2];
  r.hi[2] = cell.hi[2] + a * params.tau + w[2];
  return r;
}

} // namespace parashield
