#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "parashield/bench.hpp"
#include "parashield/errors.hpp"

namespace fs = std::filesystem;
using namespace parashield;

namespace {

struct Options {
  std::string preset = "coarse";
  std::size_t instances = 70;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t max_steps = 300;
  std::size_t trials = 1000;
  std::string out = ".";
  std::string mode = "dynamic";
  std::string world;
  std::vector<double> pose;
  std::vector<double> input;
};

std::string out_dir(const Options& o) {
  if (const char* env = std::getenv("PARASHIELD_OUT"); env && *env)
    return env;
  return o.out;
}

BenchConfig config_of(const Options& o) {
  BenchConfig c = BenchConfig::for_preset(parse_preset(o.preset));
  c.instances = o.instances;
  c.seed = o.seed;
  c.threads = o.threads;
  c.max_steps = o.max_steps;
  c.out_dir = out_dir(o);
  c.validate();
  return c;
}

std::string cache_dir(const BenchConfig& c) { return (fs::path(c.out_dir) / "cache").string(); }

void print_prepared(const PreparedShields& p) {
  const auto& g = p.sensing.grid();
  std::cout << "grid " << g.count(0) << "x" << g.count(1) << "x" << g.count(2) << " (" << g.size()
            << " cells), " << p.sensing.inputs().size() << " inputs, " << p.bank->size() << " atomics"
            << (p.from_cache ? " (bank loaded from cache)" : "") << "\n";
}

WorldMap world_of(const Options& o) {
  if (!o.world.empty())
    return load_world(o.world);
  return bench_world(BenchConfig::for_preset(parse_preset(o.preset)), static_cast<std::size_t>(o.seed));
}

int cmd_abstract(const Options& o) {
  const BenchConfig c = config_of(o);
  const SensingConfig s = bench_sensing(c);
  const auto t0 = std::chrono::steady_clock::now();
  const AbstractSystem sys = build_abstraction(s.grid(), s.inputs(), s.params());
  const auto t1 = std::chrono::steady_clock::now();
  fs::create_directories(c.out_dir);
  const auto path = fs::path(c.out_dir) / (std::string("abstraction-") + to_string(c.preset) + ".pshd");
  save_abstraction(path.string(), sys);
  std::cout << "Abstraction: " << std::chrono::duration<double>(t1 - t0).count() << " s\n"
            << sys.state_count() << " states, " << sys.input_count() << " inputs -> " << path.string() << "\n";
  return 0;
}

int cmd_synth_bank(const Options& o) {
  const BenchConfig c = config_of(o);
  const std::string cache = cache_dir(c);
  fs::create_directories(cache);
  // always synthesize afresh so that the reported times are real
  for (const auto& e : fs::directory_iterator(cache))
    if (e.path().filename().string().rfind(std::string("bank-") + to_string(c.preset) + "-", 0) == 0)
      fs::remove(e.path());
  const PreparedShields p = prepare_shields(c, cache);
  print_prepared(p);
  std::cout << "Abstraction: " << p.timing.abstraction_seconds << " s\n"
            << "Synthesis: " << p.timing.synthesis_seconds << " s\n";
  return 0;
}

int cmd_run(const Options& o) {
  const BenchConfig c = config_of(o);
  const ShieldMode mode = parse_mode(o.mode);
  const WorldMap world = world_of(o);
  fs::create_directories(c.out_dir);
  EpisodeTrace trace;
  if (mode == ShieldMode::unshielded) {
    trace = run_episode(world, bench_sensing(c), nullptr, EpisodeOptions{mode, o.seed, c.max_steps});
  } else {
    const PreparedShields p = prepare_shields(c, cache_dir(c));
    print_prepared(p);
    trace = run_episode(world, p.sensing, p.bank.get(), EpisodeOptions{mode, o.seed, c.max_steps});
  }
  const auto path = fs::path(c.out_dir) / "trace.csv";
  std::ofstream os(path);
  if (!os)
    throw FormatError("cannot open " + path.string() + " for writing");
  write_trace_csv(os, trace, bench_sensing(c));
  std::cout << to_string(trace.status) << " after " << trace.steps.size() << " steps, "
            << trace.interventions() << " interventions, mean update " << trace.mean_update_seconds()
            << " s -> " << path.string() << "\n";
  return 0;
}

int cmd_bench(const Options& o) {
  const BenchConfig c = config_of(o);
  fs::create_directories(c.out_dir);
  const PreparedShields p = prepare_shields(c, cache_dir(c));
  print_prepared(p);
  std::size_t unsafe = 0;
  const auto rows = run_bench(p, c, [&](const InstanceResult& r) {
    if (!r.row.safe)
      ++unsafe;
    std::cout << "instance " << r.row.instance_id << ": " << to_string(r.adaptive.status) << ", "
              << r.row.steps << " steps, adaptive " << r.row.avg_computationAdaptive << " s, baseline "
              << r.row.avg_computationBaseline << " s" << (r.decisions_match ? "" : ", DECISIONS DIFFER")
              << "\n";
  });
  const auto path = fs::path(c.out_dir) / "results.csv";
  emit_results(rows, path.string());
  std::cout << rows.size() << " instances, " << rows.size() - unsafe << " safe -> " << path.string() << "\n";
  return unsafe == 0 ? 0 : 1;
}

int cmd_verify_oracle(const Options& o) {
  if (o.trials == 0)
    throw ConfigError("trial count must be positive");
  const OracleReport r = run_oracle_suite(o.trials, o.seed);
  std::cout << r.equal << "/" << r.trials << " equal\n";
  return r.equal == r.trials ? 0 : 1;
}

int cmd_query(const Options& o) {
  const BenchConfig c = config_of(o);
  const WorldMap world = world_of(o);
  Pose pose = world.start;
  if (!o.pose.empty()) {
    if (o.pose.size() != 3)
      throw ConfigError("--pose needs x y theta");
    pose = {o.pose[0], o.pose[1], wrap_angle(o.pose[2])};
  }
  const PreparedShields p = prepare_shields(c, cache_dir(c));
  const VisibleSnapshot snap = sense(world, pose, p.sensing);
  const Shield shield = compose(*p.bank, snap.active);
  const CellIndex cell = p.sensing.origin_cell(pose[2]);
  std::vector<double> proposed = o.input;
  if (proposed.empty())
    proposed = scripted_controller(pose, world.goal, p.sensing);
  if (proposed.size() != 2)
    throw ConfigError("--input needs v a");
  const ShieldDecision d = shield_apply(shield, cell, proposed);
  std::cout << "active atomics " << snap.active.size() << ", allowed inputs " << shield.table.allowed_count(cell)
            << "\nproposed (" << proposed[0] << ", " << proposed[1] << ") -> chosen (" << d.chosen[0] << ", "
            << d.chosen[1] << ")" << (d.intervened ? " intervened" : " passed") << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric safety shields on grid abstractions"};
  app.require_subcommand(1);
  Options o;

  auto add_preset = [&](CLI::App* c) {
    c->add_option("--grid-preset", o.preset, "coarse, medium or fine")
        ->check(CLI::IsMember({"coarse", "medium", "fine"}));
    c->add_option("--out", o.out, "output directory (PARASHIELD_OUT overrides)");
    c->add_option("--threads", o.threads, "threads for offline synthesis")->check(CLI::PositiveNumber);
  };

  auto* abstract = app.add_subcommand("abstract", "build and save the abstraction");
  add_preset(abstract);
  auto* synth = app.add_subcommand("synth-bank", "synthesize the atomic shield bank");
  add_preset(synth);
  auto* run = app.add_subcommand("run", "run one episode and write its trace");
  add_preset(run);
  run->add_option("--mode", o.mode, "dynamic, pure-online or unshielded")
      ->check(CLI::IsMember({"dynamic", "pure-online", "unshielded"}));
  run->add_option("--seed", o.seed, "disturbance seed; also picks the random world");
  run->add_option("--world", o.world, "world file");
  run->add_option("--max-steps", o.max_steps, "step budget")->check(CLI::PositiveNumber);
  auto* bench = app.add_subcommand("bench", "run the timing benchmark");
  add_preset(bench);
  bench->add_option("--instances", o.instances, "number of random worlds")->check(CLI::PositiveNumber);
  bench->add_option("--seed", o.seed, "base seed");
  bench->add_option("--max-steps", o.max_steps, "step budget per episode")->check(CLI::PositiveNumber);
  auto* oracle = app.add_subcommand("verify-oracle", "check composed shields against direct synthesis");
  oracle->add_option("--trials", o.trials, "random systems to check")->check(CLI::PositiveNumber);
  oracle->add_option("--seed", o.seed, "random seed");
  auto* query = app.add_subcommand("query", "apply the composed shield once");
  add_preset(query);
  query->add_option("--world", o.world, "world file");
  query->add_option("--seed", o.seed, "picks the random world when no file is given");
  query->add_option("--pose", o.pose, "x y theta (default: the world's start)")->expected(3);
  query->add_option("--input", o.input, "proposed v a (default: scripted controller)")->expected(2);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*abstract)
      return cmd_abstract(o);
    if (*synth)
      return cmd_synth_bank(o);
    if (*run)
      return cmd_run(o);
    if (*bench)
      return cmd_bench(o);
    if (*oracle)
      return cmd_verify_oracle(o);
    if (*query)
      return cmd_query(o);
  } catch (const parashield::Error& e) {
    std::cerr << "parashield: error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "parashield: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
