#include "parashield/navsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "parashield/errors.hpp"

namespace parashield {

double Rect::distance_to(double x, double y) const {
  const double dx = std::max({x0 - x, 0.0, x - x1});
  const double dy = std::max({y0 - y, 0.0, y - y1});
  return std::hypot(dx, dy);
}

void WorldMap::validate() const {
  if (!(bounds.x1 > bounds.x0 && bounds.y1 > bounds.y0))
    throw ConfigError("world bounds are empty");
  if (!goal.inside(bounds))
    throw ConfigError("goal must lie inside the world bounds");
  if (collides(start[0], start[1]))
    throw ConfigError("start pose lies inside an obstacle or outside the bounds");
}

bool WorldMap::collides(double x, double y) const {
  if (x < bounds.x0 || x > bounds.x1 || y < bounds.y0 || y > bounds.y1)
    return true;
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Rect& r) { return x > r.x0 && x < r.x1 && y > r.y0 && y < r.y1; });
}

WorldMap parse_world(std::istream& is) {
  WorldMap w;
  bool have_bounds = false, have_goal = false, have_start = false;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw FormatError("world line " + std::to_string(lineno) + ": " + what);
  };
  auto read_numbers = [&](std::istringstream& ss, std::size_t n, const char* const* names) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!(ss >> v[i]))
        fail(std::string("missing or invalid field '") + names[i] + "'");
    std::string extra;
    if (ss >> extra)
      fail("unexpected trailing field '" + extra + "'");
    return v;
  };
  static const char* const kRectFields[] = {"x0", "y0", "x1", "y1"};
  static const char* const kPoseFields[] = {"x", "y", "theta"};
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind))
      continue;
    if (kind == "bounds" || kind == "obstacle" || kind == "goal") {
      const auto v = read_numbers(ss, 4, kRectFields);
      const Rect r{v[0], v[1], v[2], v[3]};
      if (r.x1 < r.x0 || r.y1 < r.y0)
        fail("rectangle corners must satisfy x0 <= x1 and y0 <= y1");
      if (kind == "bounds") {
        w.bounds = r;
        have_bounds = true;
      } else if (kind == "goal") {
        w.goal = r;
        have_goal = true;
      } else {
        w.obstacles.push_back(r);
      }
    } else if (kind == "start") {
      const auto v = read_numbers(ss, 3, kPoseFields);
      w.start = {v[0], v[1], wrap_angle(v[2])};
      have_start = true;
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  if (!have_bounds || !have_goal || !have_start)
    throw FormatError("world needs bounds, goal and start records");
  w.validate();
  return w;
}

WorldMap load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw FormatError("cannot open " + path);
  return parse_world(is);
}

void write_world(std::ostream& os, const WorldMap& w) {
  os << std::setprecision(17);
  auto rect = [&](const char* kind, const Rect& r) {
    os << kind << ' ' << r.x0 << ' ' << r.y0 << ' ' << r.x1 << ' ' << r.y1 << '\n';
  };
  rect("bounds", w.bounds);
  for (const auto& o : w.obstacles)
    rect("obstacle", o);
  rect("goal", w.goal);
  os << "start " << w.start[0] << ' ' << w.start[1] << ' ' << w.start[2] << '\n';
}

SensingConfig SensingConfig::make(double d, double epsilon, std::array<double, 3> state_eta,
                                  InputGrid inputs, DubinsParams params) {
  params.validate();
  if (!(d > 0) || !(epsilon > 0))
    throw ConfigError("visibility d and fence thickness epsilon must be positive");
  if (std::abs(state_eta[0] - state_eta[1]) > 1e-12 || !(state_eta[0] > 0) || !(state_eta[2] > 0))
    throw ConfigError("x and y cell widths must be equal and positive");
  if (inputs.dims() != 2 || inputs.size() == 0)
    throw ConfigError("Dubins inputs must be a non-empty 2-D grid");
  SensingConfig c;
  c.req_d_ = d;
  c.req_eps_ = epsilon;
  c.inputs_ = std::move(inputs);
  c.params_ = std::move(params);
  if (!(epsilon > c.max_displacement())) {
    std::ostringstream os;
    os << "fence thickness " << epsilon << " must exceed the one-step displacement bound "
       << c.max_displacement();
    throw ConfigError(os.str());
  }
  const double eta = state_eta[0];
  c.interior_ = static_cast<std::size_t>(std::ceil(2 * d / eta - 1e-9));
  c.fence_ = static_cast<std::size_t>(std::ceil(epsilon / eta - 1e-9));
  c.d_ = static_cast<double>(c.interior_) * eta / 2;
  c.eps_ = static_cast<double>(c.fence_) * eta;
  const double half = c.d_ + c.eps_;
  c.grid_ = GridSpec::fit_periodic({-half, -half, -kPi}, {half, half, kPi},
                                   {eta, eta, state_eta[2]}, {false, false, true});
  return c;
}

double SensingConfig::max_displacement() const {
  double vmax = 0;
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    vmax = std::max(vmax, std::abs(inputs_.point(i)[0]));
  const auto& w = params_.disturbance.radius;
  return vmax * params_.tau + std::max(w[0], w[1]);
}

bool SensingConfig::is_fence_column(std::size_t ix, std::size_t iy) const {
  auto outside = [&](std::size_t i) { return i < fence_ || i >= fence_ + interior_; };
  return outside(ix) || outside(iy);
}

Rect SensingConfig::column_rect(std::size_t ix, std::size_t iy) const {
  const double lo = grid_.lower(0);
  const double eta = grid_.eta(0);
  return {lo + static_cast<double>(ix) * eta, lo + static_cast<double>(iy) * eta,
          lo + static_cast<double>(ix + 1) * eta, lo + static_cast<double>(iy + 1) * eta};
}

AtomicSpecId SensingConfig::atomic_of_column(std::size_t ix, std::size_t iy) const {
  return 1 + (ix - fence_) * interior_ + (iy - fence_);
}

CellIndex SensingConfig::origin_cell(double theta) const {
  const double p[3] = {0.0, 0.0, theta};
  return grid_.quantize(p);
}

CellIndex SensingConfig::robot_cell(const Pose& pose, std::array<double, 2> center) const {
  const double p[3] = {pose[0] - center[0], pose[1] - center[1], pose[2]};
  return grid_.quantize(p);
}

InputGrid dubins_inputs() {
  std::vector<double> v, a;
  for (int k = -2; k <= 2; ++k)
    v.push_back(0.2 * k);
  for (int k = -8; k <= 8; ++k)
    a.push_back(0.5 * k);
  return InputGrid::product({v, a});
}

std::vector<StateSet> make_atomics(const GridSpec& grid, double d, double epsilon) {
  if (grid.dims() != 3 || grid.periodic(0) || grid.periodic(1))
    throw GridMismatch("navigation atomics need an (x, y, theta) grid");
  constexpr double tol = 1e-9;
  for (std::size_t i = 0; i < 2; ++i)
    if (std::abs(grid.lower(i) + d + epsilon) > 1e-6 || std::abs(grid.upper(i) - d - epsilon) > 1e-6)
      throw GridMismatch("grid does not span [-d-eps, d+eps] in x and y");
  const std::size_t nx = grid.count(0), ny = grid.count(1), nt = grid.count(2);
  auto fence = [&](std::size_t ix, std::size_t iy) {
    const double x0 = grid.lower(0) + static_cast<double>(ix) * grid.eta(0);
    const double y0 = grid.lower(1) + static_cast<double>(iy) * grid.eta(1);
    const double x1 = x0 + grid.eta(0), y1 = y0 + grid.eta(1);
    return x0 < -d - tol || x1 > d + tol || y0 < -d - tol || y1 > d + tol;
  };
  auto clear_column = [&](StateSet& s, std::size_t ix, std::size_t iy) {
    const std::size_t base = ix * grid.stride(0) + iy * grid.stride(1);
    for (std::size_t t = 0; t < nt; ++t)
      s.reset(base + t * grid.stride(2));
  };
  StateSet fence_only = StateSet::universe(grid.size());
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy)
      if (fence(ix, iy))
        clear_column(fence_only, ix, iy);
  std::vector<StateSet> atomics{fence_only};
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy)
      if (!fence(ix, iy)) {
        StateSet s = fence_only;
        clear_column(s, ix, iy);
        atomics.push_back(std::move(s));
      }
  return atomics;
}

std::vector<StateSet> make_atomics(const SensingConfig& cfg) {
  return make_atomics(cfg.grid(), cfg.d(), cfg.epsilon());
}

VisibleSnapshot sense(const WorldMap& world, const Pose& pose, const SensingConfig& cfg) {
  VisibleSnapshot snap;
  snap.active.push_back(0);
  const double half = cfg.d();
  const Rect visible{pose[0] - half, pose[1] - half, pose[0] + half, pose[1] + half};
  std::vector<Rect> near;
  for (const auto& o : world.obstacles)
    if (o.overlaps(visible))
      near.push_back(o);
  const bool clipped = !visible.inside(world.bounds);
  if (near.empty() && !clipped)
    return snap;
  const std::size_t f = cfg.fence_width();
  for (std::size_t ix = f; ix < f + cfg.interior_per_side(); ++ix) {
    for (std::size_t iy = f; iy < f + cfg.interior_per_side(); ++iy) {
      const Rect r = cfg.column_rect(ix, iy).translated(pose[0], pose[1]);
      const bool unsafe = !r.inside(world.bounds) ||
                          std::any_of(near.begin(), near.end(), [&](const Rect& o) { return o.overlaps(r); });
      if (unsafe)
        snap.active.push_back(cfg.atomic_of_column(ix, iy));
    }
  }
  return snap;
}

std::vector<double> scripted_controller(const Pose& pose, const Rect& goal, const SensingConfig& cfg) {
  constexpr double kGain = 2.0;
  const auto& inputs = cfg.inputs();
  double amin = inputs.point(0)[1], amax = amin;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    amin = std::min(amin, inputs.point(i)[1]);
    amax = std::max(amax, inputs.point(i)[1]);
  }
  const auto c = goal.center();
  const double bearing = std::atan2(c[1] - pose[1], c[0] - pose[0]);
  const double err = wrap_angle(bearing - pose[2]);
  const double a = std::clamp(kGain * err, amin, amax);
  const double v = std::abs(err) < kPi / 4 ? 0.4 : 0.2;
  const double target[2] = {v, a};
  const auto p = inputs.point(inputs.nearest(target));
  return {p.begin(), p.end()};
}

const char* to_string(ShieldMode m) {
  switch (m) {
  case ShieldMode::dynamic:
    return "dynamic";
  case ShieldMode::pure_online:
    return "pure-online";
  case ShieldMode::unshielded:
    return "unshielded";
  }
  return "?";
}

const char* to_string(TerminalStatus s) {
  switch (s) {
  case TerminalStatus::goal_reached:
    return "goal-reached";
  case TerminalStatus::max_steps:
    return "max-steps";
  case TerminalStatus::collision:
    return "collision";
  case TerminalStatus::domain_violation:
    return "domain-violation";
  }
  return "?";
}

ShieldMode parse_mode(const std::string& s) {
  if (s == "dynamic")
    return ShieldMode::dynamic;
  if (s == "pure-online")
    return ShieldMode::pure_online;
  if (s == "unshielded")
    return ShieldMode::unshielded;
  throw ConfigError("unknown mode '" + s + "' (expected dynamic, pure-online or unshielded)");
}

std::size_t EpisodeTrace::interventions() const {
  return static_cast<std::size_t>(std::count_if(
      steps.begin(), steps.end(), [](const StepRecord& r) { return r.decision.intervened; }));
}

double EpisodeTrace::mean_update_seconds() const {
  if (steps.empty())
    return 0;
  double t = 0;
  for (const auto& r : steps)
    t += r.update_seconds;
  return t / static_cast<double>(steps.size());
}

EpisodeTrace run_episode(const WorldMap& world, const SensingConfig& cfg,
                         const AtomicShieldBank* bank, const EpisodeOptions& opts) {
  world.validate();
  const bool shielded = opts.mode != ShieldMode::unshielded;
  if (shielded) {
    if (!bank)
      throw ConfigError("shielded episodes need an atomic shield bank");
    if (bank->system().state_count() != cfg.grid().size() ||
        bank->system().input_count() != cfg.inputs().size())
      throw UniverseMismatch("bank was not synthesized for this sensing configuration");
  }
  std::mt19937_64 rng(opts.seed);
  const auto& radius = cfg.params().disturbance.radius;
  std::array<std::uniform_real_distribution<double>, 3> dist{
      std::uniform_real_distribution<double>(-radius[0], radius[0]),
      std::uniform_real_distribution<double>(-radius[1], radius[1]),
      std::uniform_real_distribution<double>(-radius[2], radius[2])};

  EpisodeTrace trace;
  trace.mode = opts.mode;
  Pose pose = world.start;
  std::array<double, 2> frame{pose[0], pose[1]};
  trace.status = TerminalStatus::max_steps;
  for (std::size_t k = 0; k < opts.max_steps; ++k) {
    if (world.goal.contains(pose[0], pose[1])) {
      trace.status = TerminalStatus::goal_reached;
      break;
    }
    StepRecord rec;
    rec.step = k;
    rec.pose = pose;
    rec.frame = {pose[0], pose[1]};
    rec.cell = cfg.origin_cell(pose[2]);
    VisibleSnapshot snap = sense(world, pose, cfg);

    std::optional<Shield> shield;
    if (shielded) {
      auto update = [&] {
        return opts.mode == ShieldMode::dynamic ? compose(*bank, snap.active)
                                                : pure_online_shield(*bank, snap.active);
      };
      const auto t0 = std::chrono::steady_clock::now();
      shield = update();
      // The window moved and its trailing edge turned visited cells into
      // fence. The previous frame sees the same static world, so its shield
      // still covers the robot.
      if (!shield->covers(rec.cell) && frame != rec.frame) {
        rec.frame = frame;
        rec.frame_held = true;
        rec.cell = cfg.robot_cell(pose, frame);
        snap = sense(world, Pose{frame[0], frame[1], pose[2]}, cfg);
        shield = update();
      }
      const auto t1 = std::chrono::steady_clock::now();
      rec.update_seconds = std::chrono::duration<double>(t1 - t0).count();
    }
    rec.active_count = snap.active.size();
    frame = rec.frame;

    rec.proposed = scripted_controller(pose, world.goal, cfg);
    if (shield) {
      rec.in_domain = shield->covers(rec.cell);
      if (!rec.in_domain) {
        trace.steps.push_back(std::move(rec));
        trace.status = TerminalStatus::domain_violation;
        break;
      }
      rec.decision = shield_apply(*shield, rec.cell, rec.proposed);
    } else {
      rec.decision.input = cfg.inputs().nearest(rec.proposed);
      const auto p = cfg.inputs().point(rec.decision.input);
      rec.decision.chosen.assign(p.begin(), p.end());
      rec.decision.proposed_allowed = true;
    }

    for (std::size_t i = 0; i < 3; ++i)
      rec.disturbance[i] = dist[i](rng);
    pose = dubins_step(pose, rec.decision.chosen, rec.disturbance, cfg.params());
    trace.steps.push_back(std::move(rec));
    if (world.collides(pose[0], pose[1])) {
      trace.status = TerminalStatus::collision;
      break;
    }
  }
  if (trace.status == TerminalStatus::max_steps && world.goal.contains(pose[0], pose[1]))
    trace.status = TerminalStatus::goal_reached;
  trace.final_pose = pose;
  return trace;
}

bool check_handover(const EpisodeTrace& trace) {
  if (trace.mode == ShieldMode::unshielded)
    return true;
  return std::all_of(trace.steps.begin(), trace.steps.end(),
                     [](const StepRecord& r) { return r.in_domain; });
}

void write_trace_csv(std::ostream& os, const EpisodeTrace& trace, const SensingConfig&) {
  os << "step,x,y,theta,frame_x,frame_y,frame_held,cell,active_count,proposed_v,proposed_a,chosen_v,"
        "chosen_a,intervened,proposed_allowed,in_domain,update_seconds,w1,w2,w3,terminal\n";
  os << std::setprecision(17);
  for (const auto& r : trace.steps) {
    auto val = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; };
    os << r.step << ',' << r.pose[0] << ',' << r.pose[1] << ',' << r.pose[2] << ',' << r.frame[0] << ','
       << r.frame[1] << ',' << (r.frame_held ? 1 : 0) << ',' << r.cell << ','
       << r.active_count << ',' << val(r.proposed, 0) << ',' << val(r.proposed, 1) << ','
       << val(r.decision.chosen, 0) << ',' << val(r.decision.chosen, 1) << ','
       << (r.decision.intervened ? 1 : 0) << ',' << (r.decision.proposed_allowed ? 1 : 0) << ','
       << (r.in_domain ? 1 : 0) << ',' << r.update_seconds << ',' << r.disturbance[0] << ','
       << r.disturbance[1] << ',' << r.disturbance[2] << ',' << to_string(trace.status) << '\n';
  }
}

bool has_corridor(const WorldMap& world, double cell, std::size_t width) {
  const auto nx = static_cast<std::size_t>(std::ceil((world.bounds.x1 - world.bounds.x0) / cell - 1e-9));
  const auto ny = static_cast<std::size_t>(std::ceil((world.bounds.y1 - world.bounds.y0) / cell - 1e-9));
  std::vector<std::uint8_t> free(nx * ny, 1);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const Rect r{world.bounds.x0 + static_cast<double>(i) * cell,
                   world.bounds.y0 + static_cast<double>(j) * cell,
                   world.bounds.x0 + static_cast<double>(i + 1) * cell,
                   world.bounds.y0 + static_cast<double>(j + 1) * cell};
      for (const auto& o : world.obstacles)
        if (o.intersects(r))
          free[i * ny + j] = 0;
    }
  const auto reach = static_cast<std::ptrdiff_t>(width / 2);
  auto passable = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
    for (std::ptrdiff_t a = i - reach; a <= i + reach; ++a)
      for (std::ptrdiff_t b = j - reach; b <= j + reach; ++b) {
        if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(nx) || b >= static_cast<std::ptrdiff_t>(ny))
          return false;
        if (!free[static_cast<std::size_t>(a) * ny + static_cast<std::size_t>(b)])
          return false;
      }
    return true;
  };
  auto cell_of = [&](double x, double y) {
    const auto i = static_cast<std::ptrdiff_t>(std::min<double>(nx - 1, std::floor((x - world.bounds.x0) / cell)));
    const auto j = static_cast<std::ptrdiff_t>(std::min<double>(ny - 1, std::floor((y - world.bounds.y0) / cell)));
    return std::pair{i, j};
  };
  const auto [si, sj] = cell_of(world.start[0], world.start[1]);
  const auto gc = world.goal.center();
  const auto [gi, gj] = cell_of(gc[0], gc[1]);
  if (!passable(si, sj) || !passable(gi, gj))
    return false;
  std::vector<std::uint8_t> seen(nx * ny, 0);
  std::deque<std::pair<std::ptrdiff_t, std::ptrdiff_t>> queue{{si, sj}};
  seen[static_cast<std::size_t>(si) * ny + static_cast<std::size_t>(sj)] = 1;
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (i == gi && j == gj)
      return true;
    constexpr std::ptrdiff_t kSteps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& s : kSteps) {
      const std::ptrdiff_t a = i + s[0], b = j + s[1];
      if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(nx) || b >= static_cast<std::ptrdiff_t>(ny))
        continue;
      auto& flag = seen[static_cast<std::size_t>(a) * ny + static_cast<std::size_t>(b)];
      if (flag || !passable(a, b))
        continue;
      flag = 1;
      queue.emplace_back(a, b);
    }
  }
  return false;
}

WorldMap random_world(std::uint64_t seed, const WorldParams& p) {
  if (!(p.width > 0 && p.height > 0) || p.max_obstacles < p.min_obstacles ||
      p.max_obstacle_size < p.min_obstacle_size)
    throw ConfigError("invalid world generation parameters");
  const double clearance = std::max(p.clearance, 2 * p.step_displacement);
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const Rect bounds{0, 0, p.width, p.height};
  const double margin = std::max(clearance, p.goal_half_width);
  if (2 * margin >= std::min(p.width, p.height))
    throw GenerationFailed("world too small for the requested clearance");

  for (std::size_t attempt = 0; attempt < p.max_attempts; ++attempt) {
    WorldMap w;
    w.bounds = bounds;
    const double sx = uniform(margin, p.width - margin), sy = uniform(margin, p.height - margin);
    const double gx = uniform(margin, p.width - margin), gy = uniform(margin, p.height - margin);
    if (std::hypot(gx - sx, gy - sy) < p.min_start_goal_distance)
      continue;
    w.start = {sx, sy, uniform(-kPi, kPi)};
    w.goal = {gx - p.goal_half_width, gy - p.goal_half_width, gx + p.goal_half_width, gy + p.goal_half_width};
    const auto count = std::uniform_int_distribution<std::size_t>(p.min_obstacles, p.max_obstacles)(rng);
    std::size_t tries = 0;
    while (w.obstacles.size() < count && tries++ < 50 * (count + 1)) {
      const double ww = uniform(p.min_obstacle_size, p.max_obstacle_size);
      const double hh = uniform(p.min_obstacle_size, p.max_obstacle_size);
      const double x0 = uniform(0, p.width - ww), y0 = uniform(0, p.height - hh);
      const Rect r{x0, y0, x0 + ww, y0 + hh};
      if (r.distance_to(sx, sy) < clearance || r.distance_to(gx, gy) < clearance + p.goal_half_width)
        continue;
      w.obstacles.push_back(r);
    }
    if (w.obstacles.size() < count)
      continue;
    if (!has_corridor(w, p.corridor_cell, p.corridor_width))
      continue;
    return w;
  }
  throw GenerationFailed("no admissible world after " + std::to_string(p.max_attempts) + " attempts");
}

} // namespace parashield
