#ifndef PARASHIELD_DUBINS_HPP_
#define PARASHIELD_DUBINS_HPP_

#include <array>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "parashield/grid.hpp"

namespace parashield {

/* Centered disturbance box [-radius[i], +radius[i]]. */
struct DisturbanceBox {
  std::vector<double> radius;
};

struct DubinsParams {
  double tau = 0.1;
  DisturbanceBox disturbance{{0.01, 0.01, 0.02}};

  void validate() const;
};

using Pose = std::array<double, 3>; // x, y, theta

constexpr double kPi = std::numbers::pi;

/* Wraps an angle into [-pi, pi). */
inline double wrap_angle(double theta) { return wrap_periodic(theta, -kPi, kPi); }

/* One step of the perturbed discrete-time Dubins vehicle:
 *   x' = x + v cos(theta) tau + w1
 *   y' = y + v sin(theta) tau + w2
 *   theta' = wrap(theta + a tau + w3)
 */
Pose dubins_step(const Pose& state, std::span<const double> input, std::span<const double> w,
                 const DubinsParams& params);

/* Exact range of cos / sin over the closed interval [lo, hi]. */
std::pair<double, double> cos_range(double lo, double hi);
std::pair<double, double> sin_range(double lo, double hi);

/*
 * Box containing dubins_step(x, input, w) for every x in cell and every w in
 * the disturbance box. The theta component is returned unwrapped, so its
 * bounds may leave [-pi, pi).
 */
Box reach_overapprox(const Box& cell, std::span<const double> input, const DubinsParams& params);

} // namespace parashield

#endif // PARASHIELD_DUBINS_HPP_
