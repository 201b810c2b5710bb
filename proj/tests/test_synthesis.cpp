#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "parashield/bench.hpp"
#include "parashield/errors.hpp"
#include "parashield/synthesis.hpp"
#include "seven_state.hpp"

using namespace parashield;
using namespace seven;

namespace {

std::vector<std::size_t> dom(const ControllerTable& c) { return c.domain().to_indices(); }
std::vector<std::size_t> ids(std::initializer_list<State> s) { return {s.begin(), s.end()}; }

// Every allowed input keeps the system inside the domain without OUT.
bool closed(const AbstractSystem& sys, const ControllerTable& c) {
  for (std::size_t s : c.domain().to_indices())
    for (std::size_t u : c.allowed(s)) {
      if (sys.out(s, u))
        return false;
      for (auto t : sys.successors(s, u))
        if (!c.defined(t))
          return false;
    }
  return true;
}

} // namespace

TEST_SUITE("synthesis") {
  TEST_CASE("seven-state example: controlled predecessors") {
    const AbstractSystem sys = system();
    CHECK(cpre(sys, G()).to_indices() == ids({a, b, c, d, e, f}));
    CHECK(cpre(sys, StateSet::universe(7)) == StateSet::universe(7));
    CHECK(cpre(sys, StateSet(7)).none());
    CHECK_THROWS_AS(cpre(sys, StateSet(8)), UniverseMismatch);
  }

  TEST_CASE("seven-state example: atomic controllers") {
    const AbstractSystem sys = system();
    const ControllerTable cg = safety_control(sys, SafetySpec{G()});
    CHECK(dom(cg) == ids({a, b, c, d, e, f}));
    CHECK(cg.allowed(e) == std::vector<std::size_t>{u1});
    CHECK(cg.allowed(a) == std::vector<std::size_t>{u1, u2});
    const ControllerTable ch = safety_control(sys, SafetySpec{H()});
    CHECK(dom(ch) == ids({a, b, c, d, e, g}));
    CHECK(ch.allowed(e) == std::vector<std::size_t>{u2});
  }

  TEST_CASE("seven-state example: product keeps the blocking state") {
    const AbstractSystem sys = system();
    const ControllerTable p = product(safety_control(sys, SafetySpec{G()}), safety_control(sys, SafetySpec{H()}));
    CHECK(dom(p) == ids({a, b, c, d, e}));
    CHECK(p.defined(e));
    CHECK(p.empty_at(e));
    CHECK(p.allowed(a) == std::vector<std::size_t>{u1, u2});
  }

  TEST_CASE("seven-state example: nonblocking restriction") {
    const AbstractSystem sys = system();
    const ControllerTable p = product(safety_control(sys, SafetySpec{G()}), safety_control(sys, SafetySpec{H()}));
    const ControllerTable nb = largest_nonblocking(sys, p);
    CHECK(dom(nb) == ids({a, b, c, d}));
    CHECK(nb.allowed(a) == std::vector<std::size_t>{u1});
    CHECK(controller_equal(nb, safety_control(sys, SafetySpec{G() & H()})));
    CHECK(is_nonblocking(sys, nb));
    CHECK_FALSE(is_nonblocking(sys, p));
  }

  TEST_CASE("trivial specifications") {
    const AbstractSystem total = AbstractSystem::from_lists(3, 2, {{1}, {2}, {0}, {0, 1}, {2}, {2}});
    const ControllerTable c = safety_control(total, SafetySpec{StateSet::universe(3)});
    CHECK(c == ControllerTable::full(StateSet::universe(3), 2));
    const ControllerTable none = safety_control(total, SafetySpec{StateSet(3)});
    CHECK(none.domain().none());
    CHECK(largest_nonblocking(total, c) == c);
  }

  TEST_CASE("product laws") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + rng() % 30, m = 1 + rng() % 4;
      const AbstractSystem sys = random_system(rng, n, m, 3);
      const ControllerTable x = safety_control(sys, SafetySpec{random_set(rng, n, 0.8)});
      const ControllerTable y = safety_control(sys, SafetySpec{random_set(rng, n, 0.8)});
      const ControllerTable z = safety_control(sys, SafetySpec{random_set(rng, n, 0.8)});
      CHECK(product(x, x) == x);
      CHECK(product(x, ControllerTable::full(x.domain(), m)) == x);
      CHECK(product(x, y) == product(y, x));
      CHECK(product(product(x, y), z) == product(x, product(y, z)));
      CHECK(oracle::to_table(product(x, y)) == oracle::product(oracle::to_table(x), oracle::to_table(y)));
    }
  }

  TEST_CASE("safety fixed point matches the deletion oracle on random systems") {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 300; ++t) {
      const std::size_t n = 1 + rng() % 64, m = 1 + rng() % 4;
      const AbstractSystem sys = random_system(rng, n, m, 3);
      const StateSet safe = random_set(rng, n, 0.75);
      FixedPointStats stats;
      const ControllerTable c = safety_control(sys, SafetySpec{safe}, &stats);
      const oracle::Graph g = oracle::copy_graph(sys);
      REQUIRE(oracle::to_table(c) == oracle::deletion_control(g, oracle::members(safe)));
      // monotone descent, bounded iteration count, result inside the safe set
      CHECK(stats.iterations <= n);
      CHECK(std::is_sorted(stats.set_sizes.rbegin(), stats.set_sizes.rend()));
      CHECK(c.domain().subset_of(safe));
      CHECK(closed(sys, c));
    }
  }

  TEST_CASE("safety fixed point matches subset enumeration on small systems") {
    std::mt19937_64 rng(43);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + rng() % 10, m = 1 + rng() % 3;
      const AbstractSystem sys = random_system(rng, n, m, 3, 0.05);
      const StateSet safe = random_set(rng, n, 0.8);
      const oracle::Graph g = oracle::copy_graph(sys);
      const auto inv = oracle::enumerated_invariant(g, oracle::members(safe));
      REQUIRE(oracle::members(safety_control(sys, SafetySpec{safe}).domain()) == inv);
    }
  }

  TEST_CASE("nonblocking restriction matches the sink-augmented oracle") {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 300; ++t) {
      const std::size_t n = 1 + rng() % 40, m = 1 + rng() % 4;
      const AbstractSystem sys = random_system(rng, n, m, 3);
      // arbitrary tables, including blocking and dangling entries
      ControllerTable c(n, m);
      for (std::size_t s = 0; s < n; ++s) {
        if (rng() % 5 == 0)
          continue;
        c.define(s);
        for (std::size_t u = 0; u < m; ++u)
          if (rng() % 3)
            c.allow(s, u);
      }
      const ControllerTable nb = largest_nonblocking(sys, c);
      const oracle::Graph g = oracle::copy_graph(sys);
      REQUIRE(oracle::to_table(nb) == oracle::sink_augmented_nonblocking(g, oracle::to_table(c)));
      CHECK(is_subcontroller(nb, c));
      CHECK(closed(sys, nb));
      CHECK(is_nonblocking(sys, nb));
      CHECK(largest_nonblocking(sys, nb) == nb);
    }
  }

  TEST_CASE("composition of atomic controllers equals direct synthesis") {
    std::mt19937_64 rng(45);
    int failures = 0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = 1 + rng() % 64, m = 1 + rng() % 4;
      const AbstractSystem sys = random_system(rng, n, m, 3);
      const std::size_t k = 2 + rng() % 3;
      std::vector<StateSet> sets;
      for (std::size_t i = 0; i < k; ++i)
        sets.push_back(random_set(rng, n, 0.85));
      StateSet inter = sets[0];
      for (std::size_t i = 1; i < k; ++i)
        inter &= sets[i];
      const ControllerTable direct = safety_control(sys, SafetySpec{inter});
      std::vector<ControllerTable> atomic;
      for (const auto& s : sets)
        atomic.push_back(safety_control(sys, SafetySpec{s}));
      // fold the product in two different orders
      std::vector<std::size_t> order(k);
      for (std::size_t i = 0; i < k; ++i)
        order[i] = i;
      ControllerTable fwd = atomic[0];
      for (std::size_t i = 1; i < k; ++i)
        fwd = product(fwd, atomic[i]);
      std::shuffle(order.begin(), order.end(), rng);
      ControllerTable shuffled = atomic[order[0]];
      for (std::size_t i = 1; i < k; ++i)
        shuffled = product(shuffled, atomic[order[i]]);
      const ControllerTable nb = largest_nonblocking(sys, fwd);
      const bool ok = controller_equal(nb, direct) && controller_equal(largest_nonblocking(sys, shuffled), direct) &&
                      is_subcontroller(nb, fwd);
      // independent check of the direct result
      const oracle::Graph g = oracle::copy_graph(sys);
      const bool oracle_ok = oracle::to_table(direct) == oracle::deletion_control(g, oracle::members(inter));
      if (!ok || !oracle_ok)
        ++failures;
    }
    CHECK(failures == 0);
  }

  TEST_CASE("warm start gives the same controller") {
    std::mt19937_64 rng(46);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + rng() % 64, m = 1 + rng() % 4;
      const AbstractSystem sys = random_system(rng, n, m, 3);
      const StateSet big = random_set(rng, n, 0.9);
      const StateSet small = big & random_set(rng, n, 0.9);
      const ControllerTable outer = safety_control(sys, SafetySpec{big});
      CHECK(safety_control_from(sys, SafetySpec{small}, outer.domain()) == safety_control(sys, SafetySpec{small}));
    }
  }

  TEST_CASE("equality and sub-controller predicates") {
    const AbstractSystem sys = system();
    const ControllerTable cg = safety_control(sys, SafetySpec{G()});
    CHECK(controller_equal(cg, cg));
    ControllerTable other = cg;
    other.disallow(a, u2);
    CHECK_FALSE(controller_equal(cg, other));
    CHECK(is_subcontroller(other, cg));
    CHECK_FALSE(is_subcontroller(cg, other));
    CHECK_THROWS_AS(controller_equal(cg, ControllerTable(7, 3)), UniverseMismatch);
    CHECK_THROWS_AS(product(cg, ControllerTable(8, 2)), UniverseMismatch);
  }

  TEST_CASE("controller files round-trip and are tied to their abstraction") {
    const AbstractSystem sys = system();
    const ControllerTable cg = safety_control(sys, SafetySpec{G()});
    std::stringstream ss;
    write_controller(ss, cg, sys.content_hash());
    CHECK(read_controller(ss, sys.content_hash()) == cg);
    std::stringstream again;
    write_controller(again, cg, sys.content_hash());
    CHECK_THROWS_AS(read_controller(again, sys.content_hash() ^ 1), FormatError);
  }

  TEST_CASE("text dump") {
    const AbstractSystem sys = system();
    const ControllerTable p = product(safety_control(sys, SafetySpec{G()}), safety_control(sys, SafetySpec{H()}));
    std::ostringstream os;
    dump_controller(os, sys, largest_nonblocking(sys, p));
    CHECK(os.str() == "0 : 0\n1 : 0 1\n2 : 0 1\n3 : 0 1\n");
  }
}
