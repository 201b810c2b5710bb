#ifndef PARASHIELD_GRID_HPP_
#define PARASHIELD_GRID_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace parashield {

/* Flat index of a grid cell (or of any abstract state). */
using CellIndex = std::uint32_t;

/* Closed axis-aligned hyper-rectangle. */
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return lo.size(); }
  std::vector<double> center() const;
  bool contains(std::span<const double> p) const;
};

/* Wraps v into [lower, upper). */
double wrap_periodic(double v, double lower, double upper);

/*
 * Uniform hyper-rectangular partition of [lower, upper]. Cells are half-open
 * [lo, lo + eta) per dimension, except that the top face of a non-periodic
 * dimension belongs to the last cell. Periodic dimensions live on
 * [lower, upper). Flat indices are row-major: the last dimension varies
 * fastest.
 */
class GridSpec {
public:
  GridSpec() = default;

  /* Throws GridMismatch unless every dimension tiles exactly. */
  GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta,
           std::vector<bool> periodic);

  /* Like the constructor, but a periodic dimension whose nominal eta does not
   * divide its range is given round(range / eta) cells of width range / n. */
  static GridSpec fit_periodic(std::vector<double> lower, std::vector<double> upper,
                               std::vector<double> nominal_eta, std::vector<bool> periodic);

  std::size_t dims() const { return lower_.size(); }
  double lower(std::size_t i) const { return lower_[i]; }
  double upper(std::size_t i) const { return upper_[i]; }
  double eta(std::size_t i) const { return eta_[i]; }
  bool periodic(std::size_t i) const { return periodic_[i]; }
  std::size_t count(std::size_t i) const { return count_[i]; }
  std::size_t stride(std::size_t i) const { return stride_[i]; }
  std::size_t size() const { return size_; }

  /* Throws PointOutOfDomain if a non-periodic coordinate leaves the box. */
  CellIndex quantize(std::span<const double> point) const;
  /* Per-dimension index of a coordinate; same conventions as quantize. */
  std::size_t quantize_dim(std::size_t i, double v) const;

  std::vector<std::size_t> multi(CellIndex cell) const;
  CellIndex flat(std::span<const std::size_t> multi) const;

  Box cell_interval(CellIndex cell) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
  std::vector<double> lower_, upper_, eta_;
  std::vector<bool> periodic_;
  std::vector<std::size_t> count_, stride_;
  std::size_t size_ = 0;
};

/*
 * Finite ordered set of input vectors. Points are stored in lexicographic
 * order by dimension so indices are stable across runs.
 */
class InputGrid {
public:
  InputGrid() = default;

  /* Cartesian product of per-dimension value lists; first dimension varies
   * slowest. */
  static InputGrid product(const std::vector<std::vector<double>>& axes);
  /* Equidistant points lower, lower + eta, ..., upper in every dimension. */
  static InputGrid from_box(std::span<const double> lower, std::span<const double> upper,
                            std::span<const double> eta);
  /* Index points 0, 1, ..., n - 1 on a single axis. */
  static InputGrid indices(std::size_t n);
  /* Explicit points in the given order; throws ConfigError on duplicates or
   * ragged dimensions. */
  static InputGrid from_points(std::vector<std::vector<double>> points);

  std::size_t dims() const { return dims_; }
  std::size_t size() const { return dims_ ? values_.size() / dims_ : 0; }
  std::span<const double> point(std::size_t i) const {
    return {values_.data() + i * dims_, dims_};
  }

  /* Index of the point closest to p in Euclidean distance; ties go to the
   * lowest index. */
  std::size_t nearest(std::span<const double> p) const;

  friend bool operator==(const InputGrid&, const InputGrid&) = default;

private:
  std::size_t dims_ = 0;
  std::vector<double> values_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

} // namespace parashield

#endif // PARASHIELD_GRID_HPP_
