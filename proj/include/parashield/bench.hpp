#ifndef PARASHIELD_BENCH_HPP_
#define PARASHIELD_BENCH_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "parashield/navsim.hpp"
#include "parashield/shield.hpp"

namespace parashield {

enum class GridPreset { coarse, medium, fine };

const char* to_string(GridPreset p);
GridPreset parse_preset(const std::string& s);

struct BenchConfig {
  GridPreset preset = GridPreset::coarse;
  std::array<double, 3> state_eta{0.10, 0.10, 0.30};
  std::array<double, 2> input_eta{0.2, 0.5};
  double d = 1.0;
  double epsilon = 0.3;
  std::size_t instances = 70;
  std::uint64_t seed = 1;
  std::size_t max_steps = 300;
  /* Worker threads for offline bank synthesis. The timed online sections
   * always run on the calling thread. */
  std::size_t threads = 1;
  std::string out_dir = ".";

  static BenchConfig for_preset(GridPreset p);
  void validate() const;
};

/* Input grid [-0.4, 0.4] x [-4, 4] at input_eta. */
InputGrid bench_inputs(const BenchConfig& cfg);
SensingConfig bench_sensing(const BenchConfig& cfg);

struct OfflineTiming {
  double abstraction_seconds = 0;
  double synthesis_seconds = 0;
};

struct PreparedShields {
  SensingConfig sensing;
  std::shared_ptr<const AbstractSystem> system;
  std::shared_ptr<const AtomicShieldBank> bank;
  OfflineTiming timing;
  bool from_cache = false;
};

/*
 * Builds the abstraction and the atomic bank for cfg. With a non-empty
 * cache_dir, a bank saved there for the same abstraction is reused and a
 * freshly synthesized one is stored.
 */
PreparedShields prepare_shields(const BenchConfig& cfg, const std::string& cache_dir = {});

/* Seed of instance i, derived from the base seed by a splitmix64 step. */
std::uint64_t instance_seed(std::uint64_t base, std::size_t instance);
WorldMap bench_world(const BenchConfig& cfg, std::size_t instance);

/* Worlds with a wall straight ahead of the start pose. */
std::vector<WorldMap> wall_worlds();

struct BenchRow {
  std::size_t instance_id = 0;
  double avg_computationAdaptive = 0;
  double avg_computationBaseline = 0;
  std::size_t steps = 0;
  std::size_t interventions = 0;
  bool safe = false;
};

struct InstanceResult {
  BenchRow row;
  EpisodeTrace adaptive;
  EpisodeTrace baseline;
  /* Both modes took the same decision at every step. */
  bool decisions_match = false;
};

/* Runs the dynamic and the pure online shield on one world with a shared
 * disturbance seed. */
InstanceResult run_instance(const PreparedShields& shields, const WorldMap& world,
                            std::uint64_t seed, std::size_t max_steps);

using BenchProgress = std::function<void(const InstanceResult&)>;
std::vector<BenchRow> run_bench(const PreparedShields& shields, const BenchConfig& cfg,
                                const BenchProgress& progress = {});

/* Writes the results CSV. Throws ConfigError on an empty row list (no file
 * is created) and FormatError on IO failure. */
void emit_results(const std::vector<BenchRow>& rows, const std::string& path);
std::vector<BenchRow> read_results(const std::string& path);

/* Random finite system for equivalence checks: n states, m inputs, at most
 * max_succ successors per pair, OUT with probability out_prob. */
AbstractSystem random_system(std::mt19937_64& rng, std::size_t n, std::size_t m,
                             std::size_t max_succ, double out_prob = 0.1);
/* Random subset with each state present with probability p. */
StateSet random_set(std::mt19937_64& rng, std::size_t n, double p);

struct OracleReport {
  std::size_t trials = 0;
  std::size_t equal = 0;
};

/* Composed shield versus direct synthesis on random systems with two or three
 * random safe sets per trial. */
OracleReport run_oracle_suite(std::size_t trials, std::uint64_t seed);

} // namespace parashield

#endif // PARASHIELD_BENCH_HPP_
