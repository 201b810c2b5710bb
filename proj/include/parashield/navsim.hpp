#ifndef PARASHIELD_NAVSIM_HPP_
#define PARASHIELD_NAVSIM_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parashield/abstraction.hpp"
#include "parashield/dubins.hpp"
#include "parashield/shield.hpp"

namespace parashield {

/* Closed axis-aligned rectangle in the plane. */
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool intersects(const Rect& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
  /* The open interiors meet. */
  bool overlaps(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  bool inside(const Rect& o) const { return x0 >= o.x0 && x1 <= o.x1 && y0 >= o.y0 && y1 <= o.y1; }
  double distance_to(double x, double y) const;
  Rect translated(double dx, double dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }
  std::array<double, 2> center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

/* Global obstacle world. Obstacles are open rectangles; everything outside
 * the closed bounds counts as obstacle. */
struct WorldMap {
  Rect bounds;
  std::vector<Rect> obstacles;
  Rect goal;
  Pose start{};

  void validate() const;
  /* The point is inside an obstacle or outside the bounds. */
  bool collides(double x, double y) const;
};

/* Plain-text world records: "bounds x0 y0 x1 y1", "obstacle x0 y0 x1 y1",
 * "goal x0 y0 x1 y1", "start x y theta". '#' starts a comment. */
WorldMap parse_world(std::istream& is);
WorldMap load_world(const std::string& path);
void write_world(std::ostream& os, const WorldMap& world);

/*
 * Robot-frame sensing geometry. The shield grid covers [-d-eps, d+eps]^2 x
 * [-pi, pi) around the robot; columns (x-y cells over all headings) not fully
 * inside the visible square [-d, d]^2 form the fence.
 *
 * d and eps are rounded up to whole cells so that the box tiles exactly; the
 * requested values are kept for reporting.
 */
class SensingConfig {
public:
  /* Throws ConfigError unless eps > v_max tau + w (the one-step
   * displacement bound that makes safe handover possible). */
  static SensingConfig make(double d, double epsilon, std::array<double, 3> state_eta,
                            InputGrid inputs, DubinsParams params);

  double d() const { return d_; }
  double epsilon() const { return eps_; }
  double requested_d() const { return req_d_; }
  double requested_epsilon() const { return req_eps_; }
  const GridSpec& grid() const { return grid_; }
  const InputGrid& inputs() const { return inputs_; }
  const DubinsParams& params() const { return params_; }
  /* Largest per-axis displacement of one step. */
  double max_displacement() const;

  std::size_t columns_per_side() const { return grid_.count(0); }
  std::size_t interior_per_side() const { return interior_; }
  std::size_t fence_width() const { return fence_; }
  bool is_fence_column(std::size_t ix, std::size_t iy) const;
  /* Robot-frame rectangle of column (ix, iy). */
  Rect column_rect(std::size_t ix, std::size_t iy) const;
  /* Atomic id of an interior column; ids start at 1 (0 is the fence-only
   * atomic). */
  AtomicSpecId atomic_of_column(std::size_t ix, std::size_t iy) const;

  /* Cell of the robot at the frame origin with heading theta. */
  CellIndex origin_cell(double theta) const;
  /* Cell of the robot in the frame centered at (center[0], center[1]). */
  CellIndex robot_cell(const Pose& pose, std::array<double, 2> center) const;

private:
  double d_ = 0, eps_ = 0, req_d_ = 0, req_eps_ = 0;
  std::size_t interior_ = 0, fence_ = 0;
  GridSpec grid_;
  InputGrid inputs_;
  DubinsParams params_;
};

/* The input set v in {-0.4, -0.2, 0, 0.2, 0.4}, a in {-4, -3.5, ..., 4}. */
InputGrid dubins_inputs();

/*
 * Atomic safe sets of the navigation problem. Entry 0 is the fence-only set
 * (universe minus fence columns); entry 1 + k removes, in addition, the k-th
 * interior column in row-major (ix, iy) order. Columns span every heading.
 * Throws GridMismatch when the grid is not a 3-D grid centered on the
 * visible square.
 */
std::vector<StateSet> make_atomics(const GridSpec& grid, double d, double epsilon);
std::vector<StateSet> make_atomics(const SensingConfig& cfg);

/* Active atomic ids of one sensing snapshot, sorted, always containing 0. */
struct VisibleSnapshot {
  std::vector<AtomicSpecId> active;
};

/* Obstacles are translated (never rotated) into the frame centered at
 * (pose[0], pose[1]); an interior column is unsafe when it overlaps an
 * obstacle or leaves the world bounds. */
VisibleSnapshot sense(const WorldMap& world, const Pose& pose, const SensingConfig& cfg);

/* Proportional heading controller standing in for the task policy: a is the
 * grid value closest to clamp(2 * heading error), v is 0.4 when the heading
 * error is below pi/4 and 0.2 otherwise. Always returns a grid point. */
std::vector<double> scripted_controller(const Pose& pose, const Rect& goal, const SensingConfig& cfg);

enum class ShieldMode { dynamic, pure_online, unshielded };
enum class TerminalStatus { goal_reached, max_steps, collision, domain_violation };

const char* to_string(ShieldMode m);
const char* to_string(TerminalStatus s);
ShieldMode parse_mode(const std::string& s);

struct StepRecord {
  std::size_t step = 0;
  Pose pose{};                   // global pose before the move
  std::array<double, 2> frame{}; // center of the sensing frame
  bool frame_held = false;       // previous frame kept, see run_episode
  CellIndex cell = 0;            // robot-frame cell
  std::size_t active_count = 0;
  std::vector<double> proposed;
  ShieldDecision decision;
  bool in_domain = true;         // robot-frame cell inside this step's shield
  double update_seconds = 0;
  std::array<double, 3> disturbance{};
};

struct EpisodeTrace {
  ShieldMode mode = ShieldMode::dynamic;
  std::vector<StepRecord> steps;
  TerminalStatus status = TerminalStatus::max_steps;
  Pose final_pose{};

  std::size_t interventions() const;
  double mean_update_seconds() const;
};

struct EpisodeOptions {
  ShieldMode mode = ShieldMode::dynamic;
  std::uint64_t seed = 1;
  std::size_t max_steps = 300;
};

/*
 * Runs sense -> shield update -> propose -> shield_apply -> step until the
 * goal is reached, the step budget runs out, or a failure occurs. The shield
 * update (compose, or from-scratch synthesis) is the only timed section.
 * Shielded modes need a bank synthesized for cfg; pure online mode uses only
 * its safe sets.
 *
 * The frame is re-centered on the robot every step. When the re-centered
 * shield does not cover the robot, the step senses in the previous step's
 * frame instead (frame_held), whose shield covers it by construction.
 */
EpisodeTrace run_episode(const WorldMap& world, const SensingConfig& cfg,
                         const AtomicShieldBank* bank, const EpisodeOptions& opts);

/* Every shielded step found the robot-frame cell inside its shield. Vacuously
 * true for unshielded traces. */
bool check_handover(const EpisodeTrace& trace);

/* Per-step CSV with a header row. */
void write_trace_csv(std::ostream& os, const EpisodeTrace& trace, const SensingConfig& cfg);

struct WorldParams {
  double width = 4.0;
  double height = 4.0;
  std::size_t min_obstacles = 3;
  std::size_t max_obstacles = 8;
  double min_obstacle_size = 0.2;
  double max_obstacle_size = 0.8;
  double min_start_goal_distance = 2.5;
  /* Obstacle-free radius around start and goal; raised to twice the step
   * displacement when smaller. */
  double clearance = 0.5;
  double goal_half_width = 0.15;
  double step_displacement = 0.05;
  double corridor_cell = 0.1;
  std::size_t corridor_width = 3;
  std::size_t max_attempts = 2000;
};

/* Deterministic per seed. Throws GenerationFailed after max_attempts
 * rejected samples. */
WorldMap random_world(std::uint64_t seed, const WorldParams& params);

/* Start and goal joined by a path of coarse cells whose corridor_width-wide
 * neighbourhood is obstacle-free. */
bool has_corridor(const WorldMap& world, double cell, std::size_t width);

} // namespace parashield

#endif // PARASHIELD_NAVSIM_HPP_
