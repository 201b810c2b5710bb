#include <random>
#include <sstream>

#include "doctest.h"
#include "parashield/abstraction.hpp"
#include "parashield/errors.hpp"
#include "parashield/navsim.hpp"

using namespace parashield;

namespace {

GridSpec preset_grid(double exy, double eth) {
  const auto cfg = SensingConfig::make(1.0, 0.3, {exy, exy, eth}, dubins_inputs(), DubinsParams{});
  return cfg.grid();
}

// Sampled successors must land in the post set or be covered by OUT.
void check_soundness(const GridSpec& grid, const AbstractSystem& sys, std::uint64_t seed, int samples) {
  const DubinsParams prm;
  const InputGrid& in = sys.inputs();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0, 1);
  int violations = 0;
  for (int k = 0; k < samples; ++k) {
    Pose x;
    double w[3];
    for (std::size_t i = 0; i < 3; ++i) {
      x[i] = grid.lower(i) + (grid.upper(i) - grid.lower(i)) * unit(rng);
      w[i] = prm.disturbance.radius[i] * (2 * unit(rng) - 1);
    }
    x[2] = wrap_angle(x[2]);
    const std::size_t u = rng() % in.size();
    const CellIndex c = grid.quantize(x);
    const Pose y = dubins_step(x, in.point(u), w, prm);
    const bool inside = y[0] >= grid.lower(0) && y[0] <= grid.upper(0) && y[1] >= grid.lower(1) &&
                        y[1] <= grid.upper(1);
    if (!inside) {
      if (!sys.out(c, u))
        ++violations;
      continue;
    }
    const auto succ = sys.successors(c, u);
    if (!std::binary_search(succ.begin(), succ.end(), grid.quantize(y)))
      ++violations;
  }
  CHECK(violations == 0);
}

} // namespace

TEST_SUITE("abstraction") {
  TEST_CASE("identity dynamics map every cell to itself") {
    DubinsParams still;
    still.disturbance.radius = {0, 0, 0};
    const GridSpec g = preset_grid(0.1, 0.3);
    const InputGrid rest = InputGrid::from_points({{0.0, 0.0}});
    const AbstractSystem sys = build_abstraction(g, rest, still);
    for (CellIndex c = 0; c < g.size(); ++c) {
      REQUIRE(sys.successors(c, 0) == std::vector<CellIndex>{c});
      REQUIRE_FALSE(sys.out(c, 0));
    }
  }

  TEST_CASE("a cell on the +x face driving outward is flagged OUT") {
    const GridSpec g = preset_grid(0.1, 0.3);
    const AbstractSystem sys = build_abstraction(g, dubins_inputs(), DubinsParams{});
    const double p[3] = {1.25, 0.05, 0.05};
    const CellIndex c = g.quantize(p);
    const double fwd[2] = {0.4, 0.0};
    const std::size_t u = dubins_inputs().nearest(fwd);
    CHECK(sys.out(c, u));
    const double back[2] = {-0.4, 0.0};
    CHECK_FALSE(sys.out(c, dubins_inputs().nearest(back)));
  }

  TEST_CASE("theta successors wrap across the periodic seam") {
    const GridSpec g = preset_grid(0.1, 0.3);
    const AbstractSystem sys = build_abstraction(g, dubins_inputs(), DubinsParams{});
    const double p[3] = {0.05, 0.05, kPi - 0.01};
    const CellIndex c = g.quantize(p);
    const double turn[2] = {0.0, 4.0};
    const auto succ = sys.successors(c, dubins_inputs().nearest(turn));
    bool low_theta = false;
    for (CellIndex s : succ)
      low_theta |= g.multi(s)[2] == 0;
    CHECK(low_theta);
  }

  TEST_CASE("sampled successors are always covered on every preset") {
    for (auto [exy, eth] : {std::pair{0.10, 0.30}, std::pair{0.08, 0.25}, std::pair{0.06, 0.20}}) {
      CAPTURE(exy);
      const GridSpec g = preset_grid(exy, eth);
      const AbstractSystem sys = build_abstraction(g, dubins_inputs(), DubinsParams{});
      check_soundness(g, sys, static_cast<std::uint64_t>(exy * 1000), 10000);
    }
  }

  TEST_CASE("builds are deterministic") {
    const GridSpec g = preset_grid(0.1, 0.3);
    const AbstractSystem a = build_abstraction(g, dubins_inputs(), DubinsParams{});
    const AbstractSystem b = build_abstraction(g, dubins_inputs(), DubinsParams{});
    CHECK(a.same_as(b));
    CHECK(a.content_hash() == b.content_hash());
  }

  TEST_CASE("serialization round-trips losslessly") {
    const GridSpec g({-0.5, -0.5, -kPi}, {0.5, 0.5, kPi}, {0.1, 0.1, kPi / 4}, {false, false, true});
    const AbstractSystem sys = build_abstraction(g, dubins_inputs(), DubinsParams{});
    std::stringstream ss;
    write_abstraction(ss, sys);
    const AbstractSystem back = read_abstraction(ss);
    CHECK(back.same_as(sys));
    CHECK(back.content_hash() == sys.content_hash());
    REQUIRE(back.grid().has_value());
    CHECK(*back.grid() == g);
    CHECK(back.inputs() == sys.inputs());
    for (std::size_t s = 0; s < sys.state_count(); s += 7)
      for (std::size_t u = 0; u < sys.input_count(); u += 5) {
        REQUIRE(back.successors(s, u) == sys.successors(s, u));
        REQUIRE(back.out(s, u) == sys.out(s, u));
      }

    const AbstractSystem small = AbstractSystem::from_lists(3, 2, {{1}, {2, 0}, {2}, {2}, {0}, {1}}, {false, true, false, false, false, false});
    std::stringstream s2;
    write_abstraction(s2, small);
    const AbstractSystem small_back = read_abstraction(s2);
    CHECK(small_back.same_as(small));
    CHECK_FALSE(small_back.grid().has_value());
  }

  TEST_CASE("corrupt files are rejected") {
    std::stringstream bad("PSHDX garbage");
    CHECK_THROWS_AS(read_abstraction(bad), FormatError);
    const AbstractSystem small = AbstractSystem::from_lists(2, 1, {{1}, {0}});
    std::stringstream ss;
    write_abstraction(ss, small);
    std::string bytes = ss.str();
    bytes.resize(bytes.size() - 3);
    std::stringstream cut(bytes);
    CHECK_THROWS_AS(read_abstraction(cut), FormatError);
  }

  TEST_CASE("text dump lists one line per pair") {
    const AbstractSystem small = AbstractSystem::from_lists(2, 2, {{1}, {0, 1}, {1}, {0}}, {false, false, true, false});
    std::ostringstream os;
    dump_abstraction(os, small);
    CHECK(os.str() == "0 0 : 1\n0 1 : 0 1\n1 0 : 1 OUT\n1 1 : 0\n");
  }
}
