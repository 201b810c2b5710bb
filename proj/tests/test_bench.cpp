#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "parashield/bench.hpp"
#include "parashield/errors.hpp"

using namespace parashield;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "parashield-bench-tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove_all(p);
  return p;
}
} // namespace

TEST_SUITE("bench") {
  TEST_CASE("presets") {
    const BenchConfig c = BenchConfig::for_preset(GridPreset::coarse);
    CHECK(c.state_eta == std::array<double, 3>{0.10, 0.10, 0.30});
    CHECK(BenchConfig::for_preset(GridPreset::medium).state_eta == std::array<double, 3>{0.08, 0.08, 0.25});
    CHECK(BenchConfig::for_preset(GridPreset::fine).state_eta == std::array<double, 3>{0.06, 0.06, 0.20});
    CHECK(c.input_eta == std::array<double, 2>{0.2, 0.5});
    CHECK(c.instances == 70);
    CHECK(c.threads == 1);
    CHECK(bench_inputs(c) == dubins_inputs());
    CHECK(parse_preset("medium") == GridPreset::medium);
    CHECK_THROWS_AS(parse_preset("huge"), ConfigError);
    BenchConfig bad = c;
    bad.instances = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("results files") {
    const fs::path p = scratch("one.csv");
    BenchRow r;
    r.instance_id = 4;
    r.avg_computationAdaptive = 0.0123456789012345;
    r.avg_computationBaseline = 1.0 / 3.0;
    r.steps = 217;
    r.interventions = 12;
    r.safe = true;
    emit_results({r}, p.string());
    std::ifstream is(p);
    std::string header;
    std::getline(is, header);
    CHECK(header == "instance_id,avg_computationAdaptive,avg_computationBaseline,steps,interventions,safe");
    const auto back = read_results(p.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].instance_id == 4);
    CHECK(back[0].avg_computationAdaptive == r.avg_computationAdaptive);
    CHECK(back[0].avg_computationBaseline == r.avg_computationBaseline);
    CHECK(back[0].steps == 217);
    CHECK(back[0].interventions == 12);
    CHECK(back[0].safe);

    const fs::path none = scratch("none.csv");
    CHECK_THROWS_AS(emit_results({}, none.string()), ConfigError);
    CHECK_FALSE(fs::exists(none));
  }

  TEST_CASE("instance seeds and worlds are reproducible") {
    const BenchConfig c = BenchConfig::for_preset(GridPreset::coarse);
    CHECK(instance_seed(1, 0) == instance_seed(1, 0));
    CHECK(instance_seed(1, 0) != instance_seed(1, 1));
    CHECK(instance_seed(1, 0) != instance_seed(2, 0));
    const WorldMap a = bench_world(c, 3), b = bench_world(c, 3);
    CHECK(a.obstacles.size() == b.obstacles.size());
    CHECK(a.start == b.start);
  }

  TEST_CASE("oracle suite") {
    const OracleReport r = run_oracle_suite(200, 7);
    CHECK(r.trials == 200);
    CHECK(r.equal == 200);
  }
}
