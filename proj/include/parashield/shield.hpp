#ifndef PARASHIELD_SHIELD_HPP_
#define PARASHIELD_SHIELD_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "parashield/abstraction.hpp"
#include "parashield/synthesis.hpp"

namespace parashield {

/* Index into the registered list of atomic safe sets. */
using AtomicSpecId = std::size_t;

/*
 * Offline product: one maximally permissive safety controller per atomic
 * safe set, all over the same abstraction.
 *
 * Storage: every atomic controller is a sub-controller of the controller for
 * the union of all atomic safe sets (the reference), so each atomic table is
 * kept as the list of states where it differs from the reference. A product
 * of atomic tables is then the reference restricted by the listed entries.
 */
class AtomicShieldBank {
public:
  /* States where an atomic table differs from the reference. */
  struct Delta {
    std::vector<CellIndex> cells;
    std::vector<std::uint8_t> defined;
    std::vector<std::uint64_t> masks; // words_per_state words per listed state

    std::size_t size() const { return cells.size(); }
  };

  AtomicShieldBank(std::shared_ptr<const AbstractSystem> sys, std::vector<StateSet> safe_sets,
                   ControllerTable reference, std::vector<Delta> deltas);

  std::size_t size() const { return safe_sets_.size(); }
  const AbstractSystem& system() const { return *sys_; }
  const std::shared_ptr<const AbstractSystem>& system_ptr() const { return sys_; }
  std::uint64_t abstraction_hash() const { return hash_; }

  const StateSet& safe_set(AtomicSpecId id) const { return safe_sets_.at(id); }
  const ControllerTable& reference() const { return reference_; }
  const Delta& delta(AtomicSpecId id) const { return deltas_.at(id); }

  /* Dense atomic controller for id. */
  ControllerTable table(AtomicSpecId id) const;

  /* In-place product of t with atomic id, for t a sub-controller of the
   * reference. */
  void restrict_to(ControllerTable& t, AtomicSpecId id) const;

  /* States with an input allowed by the reference that can move into c. */
  std::span<const CellIndex> predecessors(CellIndex c) const {
    return {pred_.data() + pred_offsets_[c], pred_.data() + pred_offsets_[c + 1]};
  }

private:
  std::shared_ptr<const AbstractSystem> sys_;
  std::uint64_t hash_ = 0;
  std::vector<StateSet> safe_sets_;
  ControllerTable reference_;
  std::vector<Delta> deltas_;
  std::vector<std::uint64_t> pred_offsets_;
  std::vector<CellIndex> pred_;
};

struct BankOptions {
  std::size_t threads = 1;
};

/* One safety_control run per atomic safe set (plus one for their union, the
 * reference). */
AtomicShieldBank synthesize_bank(std::shared_ptr<const AbstractSystem> sys,
                                 std::vector<StateSet> atomics, const BankOptions& opts = {});

/* Binary form: magic "PSBK1", abstraction hash, safe sets, reference table,
 * deltas. */
void write_bank(std::ostream& os, const AtomicShieldBank& bank);
/* Rejects banks synthesized for another abstraction, and re-synthesizes up to
 * spot_checks atomic controllers to compare against the stored tables. */
AtomicShieldBank read_bank(std::istream& is, std::shared_ptr<const AbstractSystem> sys,
                           std::size_t spot_checks = 2);
void save_bank(const std::string& path, const AtomicShieldBank& bank);
AtomicShieldBank load_bank(const std::string& path, std::shared_ptr<const AbstractSystem> sys,
                           std::size_t spot_checks = 2);

/*
 * Composed shield: a nonblocking controller table with the
 * nearest-allowed-input override policy.
 */
struct Shield {
  std::shared_ptr<const AbstractSystem> system;
  ControllerTable table;
  std::vector<AtomicSpecId> provenance; // empty for the pure online baseline

  bool covers(CellIndex cell) const { return table.defined(cell) && !table.empty_at(cell); }
};

struct ShieldDecision {
  std::size_t input = 0;
  std::vector<double> chosen;
  bool intervened = false;
  bool proposed_allowed = false;
};

/*
 * Product of the active atomic controllers followed by the largest nonblocking
 * sub-controller. Only states touched by the product, and predecessors of
 * removed states, are re-examined; every other state keeps its reference
 * inputs, which already lead into the domain. Throws EmptyActiveSet on an
 * empty selection.
 */
Shield compose(const AtomicShieldBank& bank, std::span<const AtomicSpecId> active,
               FixedPointStats* stats = nullptr);

/*
 * Passes the proposed input through when its nearest input-grid point is
 * allowed at cell; otherwise returns the allowed input closest to the
 * proposal (ties: lowest input index). Throws DomainViolation when cell is
 * outside the shield's domain.
 */
ShieldDecision shield_apply(const Shield& shield, CellIndex cell, std::span<const double> proposed);

/* Baseline: safety_control from scratch on the intersection of the given
 * safe sets. */
Shield pure_online_shield(std::shared_ptr<const AbstractSystem> sys,
                          std::span<const StateSet> safe_sets, FixedPointStats* stats = nullptr);
Shield pure_online_shield(const AtomicShieldBank& bank, std::span<const AtomicSpecId> active,
                          FixedPointStats* stats = nullptr);

} // namespace parashield

#endif // PARASHIELD_SHIELD_HPP_
