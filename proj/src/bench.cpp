#include "parashield/bench.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parashield/errors.hpp"

namespace parashield {

const char* to_string(GridPreset p) {
  switch (p) {
  case GridPreset::coarse:
    return "coarse";
  case GridPreset::medium:
    return "medium";
  case GridPreset::fine:
    return "fine";
  }
  return "?";
}

GridPreset parse_preset(const std::string& s) {
  if (s == "coarse")
    return GridPreset::coarse;
  if (s == "medium")
    return GridPreset::medium;
  if (s == "fine")
    return GridPreset::fine;
  throw ConfigError("unknown grid preset '" + s + "' (expected coarse, medium or fine)");
}

BenchConfig BenchConfig::for_preset(GridPreset p) {
  BenchConfig c;
  c.preset = p;
  switch (p) {
  case GridPreset::coarse:
    c.state_eta = {0.10, 0.10, 0.30};
    break;
  case GridPreset::medium:
    c.state_eta = {0.08, 0.08, 0.25};
    break;
  case GridPreset::fine:
    c.state_eta = {0.06, 0.06, 0.20};
    break;
  }
  return c;
}

void BenchConfig::validate() const {
  if (instances == 0)
    throw ConfigError("instance count must be positive");
  if (max_steps == 0)
    throw ConfigError("max steps must be positive");
  if (threads == 0)
    throw ConfigError("thread count must be positive");
  for (double e : state_eta)
    if (!(e > 0))
      throw ConfigError("state eta must be positive");
  for (double e : input_eta)
    if (!(e > 0))
      throw ConfigError("input eta must be positive");
}

InputGrid bench_inputs(const BenchConfig& cfg) {
  const double lo[2] = {-0.4, -4.0};
  const double hi[2] = {0.4, 4.0};
  return InputGrid::from_box(lo, hi, cfg.input_eta);
}

SensingConfig bench_sensing(const BenchConfig& cfg) {
  cfg.validate();
  return SensingConfig::make(cfg.d, cfg.epsilon, cfg.state_eta, bench_inputs(cfg), DubinsParams{});
}

PreparedShields prepare_shields(const BenchConfig& cfg, const std::string& cache_dir) {
  using clock = std::chrono::steady_clock;
  PreparedShields p{bench_sensing(cfg), nullptr, nullptr, {}, false};
  const auto t0 = clock::now();
  p.system = std::make_shared<const AbstractSystem>(
      build_abstraction(p.sensing.grid(), p.sensing.inputs(), p.sensing.params()));
  const auto t1 = clock::now();
  p.timing.abstraction_seconds = std::chrono::duration<double>(t1 - t0).count();

  std::filesystem::path cache;
  if (!cache_dir.empty()) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(p.system->content_hash()));
    cache = std::filesystem::path(cache_dir) / (std::string("bank-") + to_string(cfg.preset) + "-" + hex + ".psbk");
    if (std::filesystem::exists(cache)) {
      try {
        p.bank = std::make_shared<const AtomicShieldBank>(load_bank(cache.string(), p.system));
        p.from_cache = true;
        return p;
      } catch (const FormatError&) {
        // stale or damaged cache: fall through and rebuild
      }
    }
  }
  const auto t2 = clock::now();
  p.bank = std::make_shared<const AtomicShieldBank>(
      synthesize_bank(p.system, make_atomics(p.sensing), BankOptions{cfg.threads}));
  const auto t3 = clock::now();
  p.timing.synthesis_seconds = std::chrono::duration<double>(t3 - t2).count();
  if (!cache.empty()) {
    std::filesystem::create_directories(cache.parent_path());
    const auto tmp = cache.string() + ".tmp";
    save_bank(tmp, *p.bank);
    std::filesystem::rename(tmp, cache);
  }
  return p;
}

std::uint64_t instance_seed(std::uint64_t base, std::size_t instance) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(instance) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

WorldMap bench_world(const BenchConfig& cfg, std::size_t instance) {
  return random_world(instance_seed(cfg.seed, instance), WorldParams{});
}

std::vector<WorldMap> wall_worlds() {
  const Rect bounds{0, 0, 4, 4};
  std::vector<WorldMap> worlds;
  // vertical wall ahead, heading +x
  worlds.push_back({bounds, {{1.6, 0.5, 1.8, 3.5}}, {3.05, 1.85, 3.35, 2.15}, {1.0, 2.0, 0.0}});
  // horizontal wall ahead, heading +y
  worlds.push_back({bounds, {{0.5, 2.2, 3.5, 2.4}}, {1.85, 3.35, 2.15, 3.65}, {2.0, 1.5, kPi / 2}});
  // wall ahead on a diagonal heading
  worlds.push_back({bounds, {{2.0, 1.2, 2.2, 3.8}, {1.2, 2.0, 2.2, 2.2}}, {3.05, 3.05, 3.35, 3.35},
                    {1.0, 1.0, kPi / 4}});
  return worlds;
}

namespace {

bool safe_trace(const EpisodeTrace& t) {
  return t.status != TerminalStatus::collision && t.status != TerminalStatus::domain_violation &&
         check_handover(t);
}

bool same_decisions(const EpisodeTrace& a, const EpisodeTrace& b) {
  if (a.steps.size() != b.steps.size() || a.status != b.status)
    return false;
  for (std::size_t k = 0; k < a.steps.size(); ++k)
    if (a.steps[k].decision.input != b.steps[k].decision.input || a.steps[k].pose != b.steps[k].pose)
      return false;
  return true;
}

} // namespace

InstanceResult run_instance(const PreparedShields& shields, const WorldMap& world,
                            std::uint64_t seed, std::size_t max_steps) {
  InstanceResult r;
  r.adaptive = run_episode(world, shields.sensing, shields.bank.get(),
                           EpisodeOptions{ShieldMode::dynamic, seed, max_steps});
  r.baseline = run_episode(world, shields.sensing, shields.bank.get(),
                           EpisodeOptions{ShieldMode::pure_online, seed, max_steps});
  r.decisions_match = same_decisions(r.adaptive, r.baseline);
  r.row.avg_computationAdaptive = r.adaptive.mean_update_seconds();
  r.row.avg_computationBaseline = r.baseline.mean_update_seconds();
  r.row.steps = r.adaptive.steps.size();
  r.row.interventions = r.adaptive.interventions();
  r.row.safe = safe_trace(r.adaptive) && safe_trace(r.baseline);
  return r;
}

std::vector<BenchRow> run_bench(const PreparedShields& shields, const BenchConfig& cfg,
                                const BenchProgress& progress) {
  cfg.validate();
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    const WorldMap world = bench_world(cfg, i);
    InstanceResult r = run_instance(shields, world, instance_seed(cfg.seed ^ 0x5eedULL, i), cfg.max_steps);
    r.row.instance_id = i;
    if (progress)
      progress(r);
    rows.push_back(r.row);
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

constexpr const char* kResultsHeader =
    "instance_id,avg_computationAdaptive,avg_computationBaseline,steps,interventions,safe";

template <class T> T parse_field(const std::string& s, std::size_t line, const char* name) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("results line " + std::to_string(line) + ": invalid field '" + name + "'");
  return v;
}

} // namespace

void emit_results(const std::vector<BenchRow>& rows, const std::string& path) {
  if (rows.empty())
    throw ConfigError("no benchmark rows to write");
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw FormatError("cannot open " + path + " for writing");
  os << kResultsHeader << '\n';
  for (const auto& r : rows)
    os << r.instance_id << ',' << format_double(r.avg_computationAdaptive) << ','
       << format_double(r.avg_computationBaseline) << ',' << r.steps << ',' << r.interventions << ','
       << (r.safe ? "true" : "false") << '\n';
  if (!os)
    throw FormatError("failed writing " + path);
}

std::vector<BenchRow> read_results(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader)
    throw FormatError("results file has an unexpected header");
  std::vector<BenchRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
      f.push_back(cell);
    if (f.size() != 6)
      throw FormatError("results line " + std::to_string(lineno) + ": expected 6 fields");
    BenchRow r;
    r.instance_id = parse_field<std::size_t>(f[0], lineno, "instance_id");
    r.avg_computationAdaptive = parse_field<double>(f[1], lineno, "avg_computationAdaptive");
    r.avg_computationBaseline = parse_field<double>(f[2], lineno, "avg_computationBaseline");
    r.steps = parse_field<std::size_t>(f[3], lineno, "steps");
    r.interventions = parse_field<std::size_t>(f[4], lineno, "interventions");
    if (f[5] != "true" && f[5] != "false")
      throw FormatError("results line " + std::to_string(lineno) + ": invalid field 'safe'");
    r.safe = f[5] == "true";
    rows.push_back(r);
  }
  return rows;
}

AbstractSystem random_system(std::mt19937_64& rng, std::size_t n, std::size_t m,
                             std::size_t max_succ, double out_prob) {
  std::uniform_int_distribution<std::size_t> state(0, n - 1);
  std::uniform_int_distribution<std::size_t> count(1, max_succ);
  std::bernoulli_distribution out(out_prob);
  std::vector<std::vector<CellIndex>> post(n * m);
  std::vector<bool> outs(n * m);
  for (std::size_t k = 0; k < n * m; ++k) {
    outs[k] = out(rng);
    const std::size_t c = count(rng);
    for (std::size_t j = 0; j < c; ++j)
      post[k].push_back(static_cast<CellIndex>(state(rng)));
  }
  return AbstractSystem::from_lists(n, m, std::move(post), std::move(outs));
}

StateSet random_set(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution keep(p);
  StateSet s(n);
  for (std::size_t i = 0; i < n; ++i)
    if (keep(rng))
      s.set(i);
  return s;
}

OracleReport run_oracle_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OracleReport rep;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    auto sys = std::make_shared<const AbstractSystem>(random_system(rng, n, m, 3));
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
    std::vector<StateSet> sets;
    for (std::size_t i = 0; i < k; ++i)
      sets.push_back(random_set(rng, n, 0.8));
    const AtomicShieldBank bank = synthesize_bank(sys, sets);
    std::vector<AtomicSpecId> active(k);
    for (std::size_t i = 0; i < k; ++i)
      active[i] = i;
    StateSet inter = sets[0];
    for (std::size_t i = 1; i < k; ++i)
      inter &= sets[i];
    const ControllerTable direct = safety_control(*sys, SafetySpec{inter});
    const ControllerTable composed = compose(bank, active).table;
    const ControllerTable folded = largest_nonblocking(
        *sys, [&] {
          ControllerTable c = safety_control(*sys, SafetySpec{sets[0]});
          for (std::size_t i = 1; i < k; ++i)
            c = product(c, safety_control(*sys, SafetySpec{sets[i]}));
          return c;
        }());
    ++rep.trials;
    if (controller_equal(composed, direct) && controller_equal(folded, direct))
      ++rep.equal;
  }
  return rep;
}

} // namespace parashield
