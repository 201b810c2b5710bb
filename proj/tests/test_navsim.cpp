#include <random>
#include <sstream>

#include "doctest.h"
#include "parashield/bench.hpp"
#include "parashield/errors.hpp"
#include "parashield/navsim.hpp"

using namespace parashield;

namespace {

SensingConfig coarse_cfg() {
  return SensingConfig::make(1.0, 0.3, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{});
}

// Coarse preset geometry.
struct CoarseNav {
  SensingConfig cfg = coarse_cfg();
  std::shared_ptr<const AbstractSystem> sys = std::make_shared<const AbstractSystem>(
      build_abstraction(cfg.grid(), cfg.inputs(), cfg.params()));
  AtomicShieldBank bank = synthesize_bank(sys, make_atomics(cfg));
};

const CoarseNav& coarse_nav() {
  static const CoarseNav nav;
  return nav;
}

WorldMap open_world() {
  WorldMap w;
  w.bounds = {0, 0, 10, 10};
  w.goal = {8, 8, 8.3, 8.3};
  w.start = {5, 5, 0};
  return w;
}

} // namespace

TEST_SUITE("navsim") {
  TEST_CASE("sensing geometry of the coarse preset") {
    const SensingConfig cfg = coarse_cfg();
    CHECK(cfg.columns_per_side() == 26);
    CHECK(cfg.interior_per_side() == 20);
    CHECK(cfg.fence_width() == 3);
    CHECK(cfg.d() == doctest::Approx(1.0));
    CHECK(cfg.epsilon() == doctest::Approx(0.3));
    CHECK(cfg.grid().count(2) == 21);
    CHECK(cfg.max_displacement() == doctest::Approx(0.05));
    std::size_t fence = 0;
    for (std::size_t i = 0; i < 26; ++i)
      for (std::size_t j = 0; j < 26; ++j)
        fence += cfg.is_fence_column(i, j);
    CHECK(fence == 276);
  }

  TEST_CASE("visibility and fence are rounded up to whole cells") {
    const SensingConfig fine = SensingConfig::make(1.0, 0.3, {0.06, 0.06, 0.2}, dubins_inputs(), DubinsParams{});
    CHECK(fine.interior_per_side() == 34);
    CHECK(fine.fence_width() == 5);
    CHECK(fine.d() == doctest::Approx(1.02));
    CHECK(fine.requested_d() == 1.0);
    CHECK(fine.d() >= fine.requested_d());
    CHECK(fine.epsilon() >= fine.requested_epsilon() - 1e-12);
    CHECK(fine.grid().count(2) == 31);
  }

  TEST_CASE("a fence thinner than one step is rejected") {
    CHECK_THROWS_AS(SensingConfig::make(1.0, 0.04, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{}), ConfigError);
    CHECK_THROWS_AS(SensingConfig::make(1.0, 0.05, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{}), ConfigError);
    CHECK_NOTHROW(SensingConfig::make(1.0, 0.06, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{}));
  }

  TEST_CASE("atomic safe sets") {
    const SensingConfig cfg = coarse_cfg();
    const auto atomics = make_atomics(cfg);
    REQUIRE(atomics.size() == 401);
    const std::size_t nt = cfg.grid().count(2);
    CHECK(atomics[0].count() == 400 * nt);
    StateSet all = atomics[0];
    for (const auto& s : atomics) {
      CHECK(s.subset_of(atomics[0]));
      all &= s;
    }
    CHECK(all.none());
    for (std::size_t i = 1; i < atomics.size(); ++i)
      REQUIRE(atomics[i].count() == 399 * nt);

    // two columns: universe minus both columns and the fence
    const AtomicSpecId c1 = cfg.atomic_of_column(5, 7), c2 = cfg.atomic_of_column(14, 20);
    StateSet expect = StateSet::universe(cfg.grid().size());
    for (CellIndex c = 0; c < cfg.grid().size(); ++c) {
      const auto m = cfg.grid().multi(c);
      if (cfg.is_fence_column(m[0], m[1]) || (m[0] == 5 && m[1] == 7) || (m[0] == 14 && m[1] == 20))
        expect.reset(c);
    }
    CHECK((atomics[c1] & atomics[c2]) == expect);
    CHECK_THROWS_AS(make_atomics(cfg.grid(), 1.2, 0.3), GridMismatch);
  }

  TEST_CASE("sensing snapshots") {
    const SensingConfig cfg = coarse_cfg();
    WorldMap w = open_world();
    CHECK(sense(w, w.start, cfg).active == std::vector<AtomicSpecId>{0});

    // obstacle exactly covering one interior column
    w.obstacles = {cfg.column_rect(10, 12).translated(w.start[0], w.start[1])};
    CHECK(sense(w, w.start, cfg).active == std::vector<AtomicSpecId>{0, cfg.atomic_of_column(10, 12)});

    // obstacle 1.5 d away is not sensed
    w.obstacles = {{6.5, 4.9, 6.7, 5.1}};
    CHECK(sense(w, w.start, cfg).active == std::vector<AtomicSpecId>{0});

    // the world edge counts as obstacle
    WorldMap edge = open_world();
    edge.start = {0.55, 5, 0};
    const auto snap = sense(edge, edge.start, cfg);
    CHECK(snap.active.size() == 1 + 5 * 20);
  }

  TEST_CASE("scripted controller") {
    const SensingConfig cfg = coarse_cfg();
    const Rect ahead{2.9, -0.1, 3.1, 0.1};
    CHECK(scripted_controller({0, 0, 0}, ahead, cfg) == std::vector<double>{0.4, 0.0});
    const auto behind = scripted_controller({0, 0, kPi / 2 + 0.3}, Rect{-0.1, -3.1, 0.1, -2.9}, cfg);
    CHECK(behind[0] == 0.2);
    CHECK(std::abs(behind[1]) == 4.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int k = 0; k < 200; ++k) {
      const auto p = scripted_controller({u(rng), u(rng), u(rng)}, ahead, cfg);
      const auto q = cfg.inputs().point(cfg.inputs().nearest(p));
      REQUIRE(p == std::vector<double>(q.begin(), q.end()));
    }
  }

  TEST_CASE("unshielded runs at a wall collide, shielded ones do not") {
    const auto& nav = coarse_nav();
    for (const WorldMap& w : wall_worlds()) {
      const EpisodeTrace bare = run_episode(w, nav.cfg, nullptr, {ShieldMode::unshielded, 3, 300});
      CHECK(bare.status == TerminalStatus::collision);
      CHECK(check_handover(bare));
      const EpisodeTrace dyn = run_episode(w, nav.cfg, &nav.bank, {ShieldMode::dynamic, 3, 300});
      CHECK(dyn.status != TerminalStatus::collision);
      CHECK(dyn.status != TerminalStatus::domain_violation);
      CHECK(check_handover(dyn));
      CHECK(dyn.interventions() > 0);
    }
  }

  TEST_CASE("a small window keeps the previous frame when re-centering loses the robot") {
    const SensingConfig cfg = SensingConfig::make(0.5, 0.2, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{});
    auto sys = std::make_shared<const AbstractSystem>(build_abstraction(cfg.grid(), cfg.inputs(), cfg.params()));
    const AtomicShieldBank bank = synthesize_bank(sys, make_atomics(cfg));
    std::size_t held = 0;
    for (const WorldMap& w : wall_worlds()) {
      const EpisodeTrace t = run_episode(w, cfg, &bank, {ShieldMode::dynamic, 3, 150});
      CHECK(t.status != TerminalStatus::collision);
      CHECK(t.status != TerminalStatus::domain_violation);
      CHECK(check_handover(t));
      for (std::size_t k = 0; k < t.steps.size(); ++k) {
        const StepRecord& r = t.steps[k];
        held += r.frame_held;
        if (!r.frame_held) {
          REQUIRE(r.frame == std::array<double, 2>{r.pose[0], r.pose[1]});
          continue;
        }
        // the re-centered shield really lost the robot
        const Shield recentered = compose(bank, sense(w, r.pose, cfg).active);
        CHECK_FALSE(recentered.covers(cfg.origin_cell(r.pose[2])));
        REQUIRE(k > 0);
        CHECK(r.frame == t.steps[k - 1].frame);
        CHECK(r.cell == cfg.robot_cell(r.pose, r.frame));
      }
    }
    CHECK(held > 0);
  }

  TEST_CASE("dynamic and pure online shields take identical decisions") {
    const auto& nav = coarse_nav();
    for (std::size_t i = 0; i < 3; ++i) {
      const WorldMap w = random_world(100 + i, WorldParams{});
      const EpisodeTrace a = run_episode(w, nav.cfg, &nav.bank, {ShieldMode::dynamic, 9 + i, 80});
      const EpisodeTrace b = run_episode(w, nav.cfg, &nav.bank, {ShieldMode::pure_online, 9 + i, 80});
      REQUIRE(a.steps.size() == b.steps.size());
      CHECK(a.status == b.status);
      for (std::size_t k = 0; k < a.steps.size(); ++k) {
        REQUIRE(a.steps[k].decision.input == b.steps[k].decision.input);
        REQUIRE(a.steps[k].pose == b.steps[k].pose);
        REQUIRE(a.steps[k].disturbance == b.steps[k].disturbance);
      }
      CHECK(check_handover(a));
      CHECK(check_handover(b));
    }
  }

  TEST_CASE("more obstacles never enlarge the composed domain") {
    const auto& nav = coarse_nav();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(1, 3);
    for (int t = 0; t < 20; ++t) {
      WorldMap w = random_world(200 + t, WorldParams{});
      const Pose p{pos(rng), pos(rng), 0.0};
      const auto before = compose(nav.bank, sense(w, p, nav.cfg).active);
      const double x = pos(rng), y = pos(rng);
      w.obstacles.push_back({x, y, x + 0.3, y + 0.3});
      const auto after = compose(nav.bank, sense(w, p, nav.cfg).active);
      REQUIRE(after.table.domain().subset_of(before.table.domain()));
      REQUIRE(is_subcontroller(after.table, before.table));
    }
  }

  TEST_CASE("the obstacle-free shield keeps the robot inside the visible square") {
    const auto& nav = coarse_nav();
    const Shield sh = compose(nav.bank, std::vector<AtomicSpecId>{0});
    for (CellIndex c : sh.table.domain().to_indices()) {
      const auto m = nav.cfg.grid().multi(c);
      REQUIRE_FALSE(nav.cfg.is_fence_column(m[0], m[1]));
    }
    for (double th : {-3.0, -1.0, 0.0, 2.0})
      CHECK(sh.covers(nav.cfg.origin_cell(th)));
  }

  TEST_CASE("random worlds") {
    const WorldParams prm;
    const WorldMap a = random_world(5, prm), b = random_world(5, prm);
    std::ostringstream sa, sb;
    write_world(sa, a);
    write_world(sb, b);
    CHECK(sa.str() == sb.str());
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const WorldMap w = random_world(seed, prm);
      CHECK_FALSE(w.collides(w.start[0], w.start[1]));
      for (const auto& o : w.obstacles)
        CHECK(o.distance_to(w.start[0], w.start[1]) >= 2 * 0.05);
      CHECK(has_corridor(w, prm.corridor_cell, prm.corridor_width));
      CHECK(w.goal.inside(w.bounds));
    }
    WorldParams none = prm;
    none.min_obstacles = none.max_obstacles = 0;
    CHECK(random_world(1, none).obstacles.empty());
    WorldParams tight = prm;
    tight.min_start_goal_distance = 6.0; // longer than the diagonal
    tight.max_attempts = 5;
    CHECK_THROWS_AS(random_world(1, tight), GenerationFailed);
  }

  TEST_CASE("world files") {
    const WorldMap w = random_world(3, WorldParams{});
    std::stringstream ss;
    write_world(ss, w);
    const WorldMap back = parse_world(ss);
    CHECK(back.obstacles.size() == w.obstacles.size());
    CHECK(back.start == w.start);
    CHECK(back.goal.x0 == w.goal.x0);

    std::istringstream bad_field("bounds 0 0 4 4\nobstacle 1 1 x 2\n");
    try {
      parse_world(bad_field);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("x1") != std::string::npos);
    }
    std::istringstream unknown("bounds 0 0 4 4\nwall 1 1 2 2\n");
    CHECK_THROWS_AS(parse_world(unknown), FormatError);
    std::istringstream blocked("bounds 0 0 4 4\nobstacle 1 1 2 2\ngoal 3 3 3.2 3.2\nstart 1.5 1.5 0\n");
    CHECK_THROWS_AS(parse_world(blocked), ConfigError);
  }

  TEST_CASE("trace files") {
    const auto& nav = coarse_nav();
    const EpisodeTrace t = run_episode(wall_worlds()[0], nav.cfg, &nav.bank, {ShieldMode::dynamic, 1, 5});
    std::ostringstream os;
    write_trace_csv(os, t, nav.cfg);
    std::istringstream is(os.str());
    std::string header, line;
    std::getline(is, header);
    CHECK(header.rfind("step,x,y,theta,frame_x,frame_y,frame_held,cell,", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(is, line))
      ++rows;
    CHECK(rows == t.steps.size());
  }

  TEST_CASE("shielded episodes need a matching bank") {
    const auto& nav = coarse_nav();
    CHECK_THROWS_AS(run_episode(open_world(), nav.cfg, nullptr, {ShieldMode::dynamic, 1, 5}), ConfigError);
    CHECK_THROWS_AS(run_episode(open_world(), SensingConfig::make(0.5, 0.2, {0.1, 0.1, 0.3}, dubins_inputs(), DubinsParams{}), &nav.bank, {ShieldMode::dynamic, 1, 5}),
                    UniverseMismatch);
    CHECK(parse_mode("pure-online") == ShieldMode::pure_online);
    CHECK_THROWS_AS(parse_mode("fast"), ConfigError);
  }
}
