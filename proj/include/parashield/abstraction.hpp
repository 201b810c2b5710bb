#ifndef PARASHIELD_ABSTRACTION_HPP_
#define PARASHIELD_ABSTRACTION_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "parashield/bitset.hpp"
#include "parashield/dubins.hpp"
#include "parashield/grid.hpp"

namespace parashield {

/*
 * Successor relation stored as explicit sorted lists in CSR layout, one slot
 * per (state, input) pair. Used for hand-written and randomly generated
 * systems and for relations loaded from file.
 */
class ExplicitRelation {
public:
  ExplicitRelation() = default;
  /* post[s * inputs + u] lists the successors of (s, u); out likewise. Lists
   * are sorted and deduplicated on construction. */
  ExplicitRelation(std::size_t states, std::size_t inputs,
                   std::vector<std::vector<CellIndex>> post, std::vector<bool> out);

  std::size_t states() const { return states_; }
  std::size_t inputs() const { return inputs_; }
  bool out(std::size_t s, std::size_t u) const { return out_.test(s * inputs_ + u); }

  template <class F> bool all_of(std::size_t s, std::size_t u, F&& pred) const {
    const std::size_t slot = s * inputs_ + u;
    for (std::uint64_t k = offsets_[slot]; k < offsets_[slot + 1]; ++k)
      if (!pred(targets_[k]))
        return false;
    return true;
  }
  template <class F> void for_each(std::size_t s, std::size_t u, F&& f) const {
    const std::size_t slot = s * inputs_ + u;
    for (std::uint64_t k = offsets_[slot]; k < offsets_[slot + 1]; ++k)
      f(targets_[k]);
  }

private:
  std::size_t states_ = 0;
  std::size_t inputs_ = 0;
  std::vector<std::uint64_t> offsets_;
  std::vector<CellIndex> targets_;
  DenseBitset out_;
};

/*
 * Successor relation of a 3-D grid abstraction where every post set is the
 * set of cells in an index box (with wrap-around in periodic dimensions).
 * Stores 14 bytes per (state, input) pair instead of one word per successor.
 */
class BoxRelation {
public:
  static constexpr std::size_t kDims = 3;

  struct PostBox {
    std::array<std::uint16_t, kDims> first{};
    std::array<std::uint16_t, kDims> count{}; // zero in any dimension: empty post
    std::uint16_t out = 0;
  };

  BoxRelation() = default;
  BoxRelation(const GridSpec& grid, std::size_t inputs, std::vector<PostBox> boxes);

  std::size_t states() const { return states_; }
  std::size_t inputs() const { return inputs_; }
  bool out(std::size_t s, std::size_t u) const { return boxes_[s * inputs_ + u].out != 0; }
  const PostBox& box(std::size_t s, std::size_t u) const { return boxes_[s * inputs_ + u]; }

  template <class F> bool all_of(std::size_t s, std::size_t u, F&& pred) const {
    const PostBox& b = boxes_[s * inputs_ + u];
    std::size_t i0 = b.first[0];
    for (std::uint16_t a = 0; a < b.count[0]; ++a, ++i0) {
      if (i0 == n_[0])
        i0 = 0;
      std::size_t i1 = b.first[1];
      for (std::uint16_t c = 0; c < b.count[1]; ++c, ++i1) {
        if (i1 == n_[1])
          i1 = 0;
        std::size_t i2 = b.first[2];
        const std::size_t base = i0 * stride_[0] + i1 * stride_[1];
        for (std::uint16_t e = 0; e < b.count[2]; ++e, ++i2) {
          if (i2 == n_[2])
            i2 = 0;
          if (!pred(static_cast<CellIndex>(base + i2)))
            return false;
        }
      }
    }
    return true;
  }
  template <class F> void for_each(std::size_t s, std::size_t u, F&& f) const {
    all_of(s, u, [&](CellIndex c) {
      f(c);
      return true;
    });
  }

private:
  std::size_t states_ = 0;
  std::size_t inputs_ = 0;
  std::array<std::size_t, kDims> n_{};
  std::array<std::size_t, kDims> stride_{};
  std::vector<PostBox> boxes_;
};

/*
 * Finite nondeterministic abstraction: states are flat indices (grid cells
 * when a GridSpec is attached), inputs index an InputGrid, and post(s, u) is
 * a set of states plus an OUT flag marking that the over-approximated image
 * leaves the state box. Immutable after construction; all queries are safe
 * for concurrent use.
 */
class AbstractSystem {
public:
  using Relation = std::variant<ExplicitRelation, BoxRelation>;

  AbstractSystem(std::optional<GridSpec> grid, InputGrid inputs, Relation relation);

  /* System over abstract states 0..states-1 with inputs 0..inputs-1. */
  static AbstractSystem from_lists(std::size_t states, std::size_t inputs,
                                   std::vector<std::vector<CellIndex>> post,
                                   std::vector<bool> out = {});

  std::size_t state_count() const { return states_; }
  std::size_t input_count() const { return inputs_.size(); }
  const std::optional<GridSpec>& grid() const { return grid_; }
  const InputGrid& inputs() const { return inputs_; }
  const Relation& relation() const { return relation_; }

  bool out(std::size_t s, std::size_t u) const {
    return std::visit([&](const auto& r) { return r.out(s, u); }, relation_);
  }
  /* Sorted successor list of (s, u). */
  std::vector<CellIndex> successors(std::size_t s, std::size_t u) const;

  /* Runs f(relation) with the concrete relation type, so hot loops are
   * instantiated once per representation. */
  template <class F> decltype(auto) visit(F&& f) const { return std::visit(std::forward<F>(f), relation_); }

  /* FNV-1a over the canonical serialized form; equal for equal relations
   * regardless of the storage representation. */
  std::uint64_t content_hash() const;

  /* Same grid, inputs, and successor relation. */
  bool same_as(const AbstractSystem& other) const;

private:
  std::optional<GridSpec> grid_;
  InputGrid inputs_;
  Relation relation_;
  std::size_t states_ = 0;
};

/*
 * Grid abstraction of the Dubins vehicle. For each (cell, input) the post set
 * is every cell meeting the interval image of the cell; OUT is set when the
 * image leaves the box in a non-periodic dimension.
 */
AbstractSystem build_abstraction(const GridSpec& grid, const InputGrid& inputs,
                                 const DubinsParams& params);

/* Binary form: magic "PSHD1", grid, input grid, then per (cell, input) a
 * length-prefixed sorted successor list and an OUT byte. */
void write_abstraction(std::ostream& os, const AbstractSystem& sys);
AbstractSystem read_abstraction(std::istream& is);
void save_abstraction(const std::string& path, const AbstractSystem& sys);
AbstractSystem load_abstraction(const std::string& path);

/* One line per (cell, input): "<cell> <input> : <successors...>[ OUT]". */
void dump_abstraction(std::ostream& os, const AbstractSystem& sys);

} // namespace parashield

#endif // PARASHIELD_ABSTRACTION_HPP_
