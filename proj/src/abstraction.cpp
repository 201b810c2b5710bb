#include "parashield/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "binary_io.hpp"
#include "parashield/errors.hpp"

namespace parashield {

ExplicitRelation::ExplicitRelation(std::size_t states, std::size_t inputs,
                                   std::vector<std::vector<CellIndex>> post, std::vector<bool> out)
    : states_(states), inputs_(inputs), out_(states * inputs) {
  const std::size_t slots = states * inputs;
  if (post.size() != slots)
    throw UniverseMismatch("explicit relation needs one successor list per (state, input)");
  if (!out.empty() && out.size() != slots)
    throw UniverseMismatch("explicit relation needs one OUT flag per (state, input)");
  offsets_.resize(slots + 1, 0);
  for (std::size_t k = 0; k < slots; ++k) {
    auto& list = post[k];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    if (!list.empty() && list.back() >= states)
      throw UniverseMismatch("successor index outside the state universe");
    offsets_[k + 1] = offsets_[k] + list.size();
    if (!out.empty() && out[k])
      out_.set(k);
  }
  targets_.reserve(offsets_.back());
  for (auto& list : post)
    targets_.insert(targets_.end(), list.begin(), list.end());
}

BoxRelation::BoxRelation(const GridSpec& grid, std::size_t inputs, std::vector<PostBox> boxes)
    : states_(grid.size()), inputs_(inputs), boxes_(std::move(boxes)) {
  if (grid.dims() != kDims)
    throw GridMismatch("box relation needs a 3-dimensional grid");
  if (boxes_.size() != states_ * inputs_)
    throw UniverseMismatch("box relation needs one post box per (cell, input)");
  for (std::size_t i = 0; i < kDims; ++i) {
    if (grid.count(i) > std::numeric_limits<std::uint16_t>::max())
      throw GridMismatch("box relation supports at most 65535 cells per dimension");
    n_[i] = grid.count(i);
    stride_[i] = grid.stride(i);
  }
}

AbstractSystem::AbstractSystem(std::optional<GridSpec> grid, InputGrid inputs, Relation relation)
    : grid_(std::move(grid)), inputs_(std::move(inputs)), relation_(std::move(relation)) {
  std::visit(
      [&](const auto& r) {
        states_ = r.states();
        if (r.inputs() != inputs_.size())
          throw UniverseMismatch("relation input count differs from the input grid");
      },
      relation_);
  if (grid_ && grid_->size() != states_)
    throw GridMismatch("relation state count differs from the grid cell count");
}

AbstractSystem AbstractSystem::from_lists(std::size_t states, std::size_t inputs,
                                          std::vector<std::vector<CellIndex>> post,
                                          std::vector<bool> out) {
  return AbstractSystem(std::nullopt, InputGrid::indices(inputs),
                        ExplicitRelation(states, inputs, std::move(post), std::move(out)));
}

std::vector<CellIndex> AbstractSystem::successors(std::size_t s, std::size_t u) const {
  std::vector<CellIndex> out;
  visit([&](const auto& r) { r.for_each(s, u, [&](CellIndex c) { out.push_back(c); }); });
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr char kAbstractionMagic[] = "PSHD1";

template <class Sink> void emit_grid(Sink& sink, const std::optional<GridSpec>& grid) {
  detail::put_pod<Sink, std::uint8_t>(sink, grid ? 1 : 0);
  if (!grid)
    return;
  detail::put_pod<Sink, std::uint32_t>(sink, static_cast<std::uint32_t>(grid->dims()));
  for (std::size_t i = 0; i < grid->dims(); ++i) {
    detail::put_pod(sink, grid->lower(i));
    detail::put_pod(sink, grid->upper(i));
    detail::put_pod(sink, grid->eta(i));
    detail::put_pod<Sink, std::uint8_t>(sink, grid->periodic(i) ? 1 : 0);
  }
}

template <class Sink> void emit_inputs(Sink& sink, const InputGrid& inputs) {
  detail::put_pod<Sink, std::uint32_t>(sink, static_cast<std::uint32_t>(inputs.dims()));
  detail::put_pod<Sink, std::uint64_t>(sink, inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (double v : inputs.point(i))
      detail::put_pod(sink, v);
}

template <class Sink> void emit_system(Sink& sink, const AbstractSystem& sys) {
  sink.put(kAbstractionMagic, 5);
  emit_grid(sink, sys.grid());
  detail::put_pod<Sink, std::uint64_t>(sink, sys.state_count());
  emit_inputs(sink, sys.inputs());
  std::vector<CellIndex> buf;
  sys.visit([&](const auto& rel) {
    for (std::size_t s = 0; s < sys.state_count(); ++s) {
      for (std::size_t u = 0; u < sys.input_count(); ++u) {
        buf.clear();
        rel.for_each(s, u, [&](CellIndex c) { buf.push_back(c); });
        std::sort(buf.begin(), buf.end());
        detail::put_pod<Sink, std::uint32_t>(sink, static_cast<std::uint32_t>(buf.size()));
        if (!buf.empty())
          sink.put(buf.data(), buf.size() * sizeof(CellIndex));
        detail::put_pod<Sink, std::uint8_t>(sink, rel.out(s, u) ? 1 : 0);
      }
    }
  });
}

// Index range of the cells met by a closed-below, open-above image interval
// in one dimension. Bounds within kSnap cell widths of a grid line are
// snapped onto it so that exact images (e.g. identity dynamics) do not pick
// up neighbours through rounding noise.
constexpr double kSnap = 1e-9;

struct DimRange {
  std::size_t first = 0;
  std::size_t count = 0;
  bool out = false;
};

double snap(double t) {
  const double r = std::round(t);
  return std::abs(t - r) < kSnap ? r : t;
}

DimRange dim_range(const GridSpec& grid, std::size_t i, double lo, double hi) {
  DimRange r;
  const auto n = static_cast<double>(grid.count(i));
  double tlo = snap((lo - grid.lower(i)) / grid.eta(i));
  double thi = snap((hi - grid.lower(i)) / grid.eta(i));
  if (grid.periodic(i)) {
    if (thi - tlo >= n) {
      r.first = 0;
      r.count = grid.count(i);
      return r;
    }
    const double shift = std::floor(tlo / n) * n;
    tlo -= shift;
    thi -= shift;
    const auto first = static_cast<std::size_t>(std::floor(tlo));
    // hi is a strict bound: a grid line at hi is not reached
    const double last = std::ceil(thi) - 1;
    r.first = std::min(first, grid.count(i) - 1);
    r.count = static_cast<std::size_t>(std::max(0.0, last - static_cast<double>(r.first) + 1));
    r.count = std::min(r.count, grid.count(i));
    return r;
  }
  r.out = tlo < 0 || thi > n;
  const double cl = std::max(tlo, 0.0);
  const double ch = std::min(thi, n);
  if (cl > n || ch < 0)
    return r; // image entirely outside: OUT only
  const auto first = static_cast<std::size_t>(std::min(std::floor(cl), n - 1));
  double last = std::ceil(ch) - 1;
  last = std::min(std::max(last, static_cast<double>(first)), n - 1);
  r.first = first;
  r.count = static_cast<std::size_t>(last) - first + 1;
  return r;
}

} // namespace

std::uint64_t AbstractSystem::content_hash() const {
  detail::Fnv1a h;
  emit_system(h, *this);
  return h.value();
}

bool AbstractSystem::same_as(const AbstractSystem& other) const {
  if (grid_ != other.grid_ || !(inputs_ == other.inputs_) || states_ != other.states_)
    return false;
  for (std::size_t s = 0; s < states_; ++s)
    for (std::size_t u = 0; u < input_count(); ++u)
      if (out(s, u) != other.out(s, u) || successors(s, u) != other.successors(s, u))
        return false;
  return true;
}

AbstractSystem build_abstraction(const GridSpec& grid, const InputGrid& inputs,
                                 const DubinsParams& params) {
  params.validate();
  if (grid.dims() != 3 || inputs.dims() != 2)
    throw GridMismatch("the Dubins abstraction needs a 3-D state grid and 2-D inputs");
  const std::size_t m = inputs.size();
  std::vector<BoxRelation::PostBox> boxes(grid.size() * m);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const Box cell = grid.cell_interval(static_cast<CellIndex>(s));
    for (std::size_t u = 0; u < m; ++u) {
      const Box img = reach_overapprox(cell, inputs.point(u), params);
      auto& b = boxes[s * m + u];
      for (std::size_t i = 0; i < 3; ++i) {
        const DimRange r = dim_range(grid, i, img.lo[i], img.hi[i]);
        b.first[i] = static_cast<std::uint16_t>(r.first);
        b.count[i] = static_cast<std::uint16_t>(r.count);
        if (r.out)
          b.out = 1;
      }
      if (b.count[0] == 0 || b.count[1] == 0 || b.count[2] == 0)
        b.count = {0, 0, 0};
    }
  }
  return AbstractSystem(grid, inputs, BoxRelation(grid, m, std::move(boxes)));
}

void write_abstraction(std::ostream& os, const AbstractSystem& sys) {
  detail::StreamSink sink(os);
  emit_system(sink, sys);
  if (!os)
    throw FormatError("failed writing abstraction");
}

AbstractSystem read_abstraction(std::istream& is) {
  using detail::get_pod;
  detail::expect_magic(is, kAbstractionMagic);
  std::optional<GridSpec> grid;
  if (get_pod<std::uint8_t>(is)) {
    const auto d = get_pod<std::uint32_t>(is);
    std::vector<double> lo(d), hi(d), eta(d);
    std::vector<bool> per(d);
    for (std::uint32_t i = 0; i < d; ++i) {
      lo[i] = get_pod<double>(is);
      hi[i] = get_pod<double>(is);
      eta[i] = get_pod<double>(is);
      per[i] = get_pod<std::uint8_t>(is) != 0;
    }
    grid = GridSpec(lo, hi, eta, per);
  }
  const auto states = get_pod<std::uint64_t>(is);
  const auto idims = get_pod<std::uint32_t>(is);
  const auto icount = get_pod<std::uint64_t>(is);
  std::vector<std::vector<double>> points(icount, std::vector<double>(idims));
  for (auto& p : points)
    for (auto& v : p)
      v = get_pod<double>(is);
  InputGrid inputs = InputGrid::from_points(std::move(points));
  std::vector<std::vector<CellIndex>> post(states * icount);
  std::vector<bool> out(states * icount);
  for (std::size_t k = 0; k < post.size(); ++k) {
    const auto len = get_pod<std::uint32_t>(is);
    post[k].resize(len);
    if (len) {
      is.read(reinterpret_cast<char*>(post[k].data()),
              static_cast<std::streamsize>(len * sizeof(CellIndex)));
      if (!is)
        throw FormatError("unexpected end of file in successor list");
    }
    out[k] = get_pod<std::uint8_t>(is) != 0;
  }
  return AbstractSystem(std::move(grid), std::move(inputs),
                        ExplicitRelation(states, icount, std::move(post), std::move(out)));
}

void save_abstraction(const std::string& path, const AbstractSystem& sys) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw FormatError("cannot open " + path + " for writing");
  write_abstraction(os, sys);
}

AbstractSystem load_abstraction(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw FormatError("cannot open " + path);
  return read_abstraction(is);
}

void dump_abstraction(std::ostream& os, const AbstractSystem& sys) {
  for (std::size_t s = 0; s < sys.state_count(); ++s) {
    for (std::size_t u = 0; u < sys.input_count(); ++u) {
      os << s << ' ' << u << " :";
      for (CellIndex c : sys.successors(s, u))
        os << ' ' << c;
      if (sys.out(s, u))
        os << " OUT";
      os << '\n';
    }
  }
}

} // namespace parashield
