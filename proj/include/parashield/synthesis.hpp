#ifndef PARASHIELD_SYNTHESIS_HPP_
#define PARASHIELD_SYNTHESIS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "parashield/abstraction.hpp"
#include "parashield/bitset.hpp"

namespace parashield {

/*
 * State-feedback controller over an abstraction: for every state either
 * "undefined" or a (possibly empty) set of allowed input indices. The domain
 * is the set of defined states; a defined state with an empty set is a
 * blocking state, as produced by the raw product.
 */
class ControllerTable {
public:
  using word_type = std::uint64_t;

  ControllerTable() = default;
  /* All states undefined. */
  ControllerTable(std::size_t states, std::size_t inputs);

  /* Every input allowed on every state of domain. */
  static ControllerTable full(const StateSet& domain, std::size_t inputs);

  std::size_t state_count() const { return states_; }
  std::size_t input_count() const { return inputs_; }
  std::size_t words_per_state() const { return wps_; }

  const StateSet& domain() const { return defined_; }
  bool defined(std::size_t s) const { return defined_.test(s); }
  /* Marks s defined with an empty allowed set. */
  void define(std::size_t s);
  void undefine(std::size_t s);

  bool allows(std::size_t s, std::size_t u) const {
    return defined_.test(s) && ((masks_[s * wps_ + u / 64] >> (u % 64)) & 1U);
  }
  /* Defines s if needed and adds u. */
  void allow(std::size_t s, std::size_t u);
  void disallow(std::size_t s, std::size_t u);

  std::span<const word_type> mask(std::size_t s) const { return {masks_.data() + s * wps_, wps_}; }
  std::span<word_type> mask(std::size_t s) { return {masks_.data() + s * wps_, wps_}; }

  bool empty_at(std::size_t s) const;
  std::vector<std::size_t> allowed(std::size_t s) const;
  std::size_t allowed_count(std::size_t s) const;

  /* Equal domains and equal allowed sets on the domain. */
  friend bool operator==(const ControllerTable& a, const ControllerTable& b);

private:
  std::size_t states_ = 0;
  std::size_t inputs_ = 0;
  std::size_t wps_ = 0;
  StateSet defined_;
  std::vector<word_type> masks_; // zero on undefined states
};

/* Throws UniverseMismatch when the tables are over different universes. */
bool controller_equal(const ControllerTable& a, const ControllerTable& b);

/* a is a sub-controller of b: dom(a) within dom(b) and a(x) within b(x). */
bool is_subcontroller(const ControllerTable& a, const ControllerTable& b);

/* Every defined state has an allowed input, and every allowed input keeps
 * the system inside the domain without OUT. */
bool is_nonblocking(const AbstractSystem& sys, const ControllerTable& c);

struct SafetySpec {
  StateSet safe;
};

/* Per-run statistics of a fixed-point computation. */
struct FixedPointStats {
  std::size_t iterations = 0;
  std::vector<std::size_t> set_sizes; // |S| after each sweep
};

/* { s | exists u : post(s, u) within S and no OUT }. */
StateSet cpre(const AbstractSystem& sys, const StateSet& S);

/*
 * Maximally permissive safety controller of the abstraction: greatest fixed
 * point S* of S -> cpre(S) & safe from the universe by full synchronous
 * sweeps, then allowed(s) = { u | post(s, u) within S*, no OUT } on S*.
 */
ControllerTable safety_control(const AbstractSystem& sys, const SafetySpec& spec,
                               FixedPointStats* stats = nullptr);

/* Same fixed point, but iteration starts from start (which must contain the
 * greatest fixed point, e.g. the domain of a controller for a larger safe
 * set). Converges to the same result in fewer sweeps. */
ControllerTable safety_control_from(const AbstractSystem& sys, const SafetySpec& spec,
                                    const StateSet& start, FixedPointStats* stats = nullptr);

/* Pointwise intersection on the intersection of domains; blocking states are
 * kept as defined-with-empty-set. */
ControllerTable product(const ControllerTable& a, const ControllerTable& b);

/*
 * Largest nonblocking sub-controller: greatest fixed point of
 * D -> { s in D | exists u in C(s) : post(s, u) within D, no OUT } from
 * dom(C), then allowed(s) = { u in C(s) | post(s, u) within D* }. Inputs
 * outside C(s) are never inspected.
 */
ControllerTable largest_nonblocking(const AbstractSystem& sys, const ControllerTable& c,
                                    FixedPointStats* stats = nullptr);

/* Binary form keyed by the abstraction's content hash. */
void write_controller(std::ostream& os, const ControllerTable& c, std::uint64_t abstraction_hash);
/* Throws FormatError when the file was written for a different abstraction. */
ControllerTable read_controller(std::istream& is, std::uint64_t expected_hash);
void save_controller(const std::string& path, const ControllerTable& c, std::uint64_t abstraction_hash);
ControllerTable load_controller(const std::string& path, std::uint64_t expected_hash);

/* One line per domain state: "<multi-index> : <sorted inputs>". States are
 * printed as flat indices when the system has no grid. */
void dump_controller(std::ostream& os, const AbstractSystem& sys, const ControllerTable& c);

} // namespace parashield

#endif // PARASHIELD_SYNTHESIS_HPP_
