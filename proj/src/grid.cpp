#include "parashield/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "parashield/errors.hpp"

namespace parashield {

std::vector<double> Box::center() const {
  std::vector<double> c(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i)
    c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

bool Box::contains(std::span<const double> p) const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (p[i] < lo[i] || p[i] > hi[i])
      return false;
  return true;
}

double wrap_periodic(double v, double lower, double upper) {
  const double range = upper - lower;
  double r = std::fmod(v - lower, range);
  if (r < 0)
    r += range;
  // fmod of a tiny negative can round back up to range
  if (r >= range)
    r = 0;
  return lower + r;
}

GridSpec::GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta,
                   std::vector<bool> periodic)
    : lower_(std::move(lower)), upper_(std::move(upper)), eta_(std::move(eta)),
      periodic_(std::move(periodic)) {
  const std::size_t d = lower_.size();
  if (d == 0 || upper_.size() != d || eta_.size() != d || periodic_.size() != d)
    throw GridMismatch("grid spec vectors must be non-empty and of equal length");
  count_.resize(d);
  stride_.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double range = upper_[i] - lower_[i];
    if (!(range > 0) || !(eta_[i] > 0)) {
      std::ostringstream os;
      os << "dimension " << i << ": need upper > lower and eta > 0";
      throw GridMismatch(os.str());
    }
    const double n = std::round(range / eta_[i]);
    if (n < 1 || std::abs(n * eta_[i] - range) > 1e-9 * range) {
      std::ostringstream os;
      os << "dimension " << i << ": eta " << eta_[i] << " does not tile [" << lower_[i] << ", "
         << upper_[i] << "]";
      throw GridMismatch(os.str());
    }
    count_[i] = static_cast<std::size_t>(n);
  }
  std::size_t total = 1;
  for (std::size_t i = d; i-- > 0;) {
    stride_[i] = total;
    if (total > std::numeric_limits<CellIndex>::max() / count_[i])
      throw GridMismatch("grid has more cells than the flat index range");
    total *= count_[i];
  }
  size_ = total;
}

GridSpec GridSpec::fit_periodic(std::vector<double> lower, std::vector<double> upper,
                                std::vector<double> nominal_eta, std::vector<bool> periodic) {
  for (std::size_t i = 0; i < std::min({lower.size(), upper.size(), nominal_eta.size(), periodic.size()}); ++i) {
    if (!periodic[i] || !(nominal_eta[i] > 0))
      continue;
    const double range = upper[i] - lower[i];
    const double n = std::max(1.0, std::round(range / nominal_eta[i]));
    nominal_eta[i] = range / n;
  }
  return GridSpec(std::move(lower), std::move(upper), std::move(nominal_eta), std::move(periodic));
}

std::size_t GridSpec::quantize_dim(std::size_t i, double v) const {
  if (periodic_[i]) {
    v = wrap_periodic(v, lower_[i], upper_[i]);
  } else if (!(v >= lower_[i] && v <= upper_[i])) {
    std::ostringstream os;
    os << "coordinate " << i << " = " << v << " outside [" << lower_[i] << ", " << upper_[i] << "]";
    throw PointOutOfDomain(os.str());
  }
  const double k = std::floor((v - lower_[i]) / eta_[i]);
  if (k < 0)
    return 0;
  return std::min(static_cast<std::size_t>(k), count_[i] - 1);
}

CellIndex GridSpec::quantize(std::span<const double> point) const {
  if (point.size() != dims())
    throw PointOutOfDomain("point dimension does not match the grid");
  std::size_t flat = 0;
  for (std::size_t i = 0; i < dims(); ++i)
    flat += quantize_dim(i, point[i]) * stride_[i];
  return static_cast<CellIndex>(flat);
}

std::vector<std::size_t> GridSpec::multi(CellIndex cell) const {
  std::vector<std::size_t> m(dims());
  std::size_t rest = cell;
  for (std::size_t i = 0; i < dims(); ++i) {
    m[i] = rest / stride_[i];
    rest %= stride_[i];
  }
  return m;
}

CellIndex GridSpec::flat(std::span<const std::size_t> multi) const {
  std::size_t f = 0;
  for (std::size_t i = 0; i < dims(); ++i)
    f += multi[i] * stride_[i];
  return static_cast<CellIndex>(f);
}

Box GridSpec::cell_interval(CellIndex cell) const {
  const auto m = multi(cell);
  Box b{std::vector<double>(dims()), std::vector<double>(dims())};
  for (std::size_t i = 0; i < dims(); ++i) {
    b.lo[i] = lower_[i] + static_cast<double>(m[i]) * eta_[i];
    b.hi[i] = lower_[i] + static_cast<double>(m[i] + 1) * eta_[i];
  }
  return b;
}

InputGrid InputGrid::product(const std::vector<std::vector<double>>& axes) {
  InputGrid g;
  g.dims_ = axes.size();
  if (g.dims_ == 0)
    return g;
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.empty())
      throw ConfigError("input axis with no values");
    total *= a.size();
  }
  g.values_.reserve(total * g.dims_);
  std::vector<std::size_t> idx(g.dims_, 0);
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t i = 0; i < g.dims_; ++i)
      g.values_.push_back(axes[i][idx[i]]);
    for (std::size_t i = g.dims_; i-- > 0;) {
      if (++idx[i] < axes[i].size())
        break;
      idx[i] = 0;
    }
  }
  return g;
}

InputGrid InputGrid::from_box(std::span<const double> lower, std::span<const double> upper,
                              std::span<const double> eta) {
  std::vector<std::vector<double>> axes(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(eta[i] > 0) || upper[i] < lower[i])
      throw ConfigError("input box needs eta > 0 and upper >= lower");
    const double n = std::round((upper[i] - lower[i]) / eta[i]);
    for (std::size_t k = 0; k <= static_cast<std::size_t>(n); ++k) {
      double v = lower[i] + static_cast<double>(k) * eta[i];
      // snap representation noise: multiples of eta are stored as m * eta
      const double m = std::round(v / eta[i]);
      if (std::abs(v / eta[i] - m) < 1e-9)
        v = m == 0 ? 0.0 : m * eta[i];
      axes[i].push_back(v);
    }
  }
  return product(axes);
}

InputGrid InputGrid::indices(std::size_t n) {
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i)
    axis[i] = static_cast<double>(i);
  return product({axis});
}

InputGrid InputGrid::from_points(std::vector<std::vector<double>> points) {
  InputGrid g;
  if (points.empty())
    return g;
  g.dims_ = points.front().size();
  std::set<std::vector<double>> seen;
  for (auto& p : points) {
    if (p.size() != g.dims_)
      throw ConfigError("input points have differing dimensions");
    if (!seen.insert(p).second)
      throw ConfigError("duplicate input point");
    g.values_.insert(g.values_.end(), p.begin(), p.end());
  }
  return g;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {
constexpr double kTieTolerance = 1e-12;
}

std::size_t InputGrid::nearest(std::span<const double> p) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) {
    const double d = squared_distance(point(i), p);
    // distances equal up to rounding count as ties
    if (d + kTieTolerance < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

} // namespace parashield
