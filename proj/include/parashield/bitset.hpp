#ifndef PARASHIELD_BITSET_HPP_
#define PARASHIELD_BITSET_HPP_

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "parashield/errors.hpp"

namespace parashield {

/* Fixed-universe dense bitset over [0, size). Bits past size() in the last
 * word are kept at zero so that word-wise comparison and popcount are exact. */
class DenseBitset {
public:
  using word_type = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  DenseBitset() = default;

  explicit DenseBitset(std::size_t size, bool value = false)
      : size_(size), words_((size + kWordBits - 1) / kWordBits, value ? ~word_type{0} : 0) {
    trim();
  }

  static DenseBitset universe(std::size_t size) { return DenseBitset(size, true); }

  std::size_t size() const { return size_; }
  std::size_t word_count() const { return words_.size(); }
  std::span<const word_type> words() const { return words_; }
  std::span<word_type> words() { return words_; }

  bool test(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  void set(std::size_t i) { words_[i / kWordBits] |= word_type{1} << (i % kWordBits); }
  void reset(std::size_t i) { words_[i / kWordBits] &= ~(word_type{1} << (i % kWordBits)); }
  void assign(std::size_t i, bool v) { v ? set(i) : reset(i); }

  void set_all() {
    std::fill(words_.begin(), words_.end(), ~word_type{0});
    trim();
  }
  void reset_all() { std::fill(words_.begin(), words_.end(), word_type{0}); }

  std::size_t count() const {
    std::size_t c = 0;
    for (word_type w : words_)
      c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool any() const {
    return std::any_of(words_.begin(), words_.end(), [](word_type w) { return w != 0; });
  }
  bool none() const { return !any(); }

  DenseBitset& operator&=(const DenseBitset& o) {
    check(o);
    for (std::size_t k = 0; k < words_.size(); ++k)
      words_[k] &= o.words_[k];
    return *this;
  }
  DenseBitset& operator|=(const DenseBitset& o) {
    check(o);
    for (std::size_t k = 0; k < words_.size(); ++k)
      words_[k] |= o.words_[k];
    return *this;
  }
  // set difference
  DenseBitset& operator-=(const DenseBitset& o) {
    check(o);
    for (std::size_t k = 0; k < words_.size(); ++k)
      words_[k] &= ~o.words_[k];
    return *this;
  }
  DenseBitset complement() const {
    DenseBitset r(*this);
    for (word_type& w : r.words_)
      w = ~w;
    r.trim();
    return r;
  }

  friend DenseBitset operator&(DenseBitset a, const DenseBitset& b) { return a &= b; }
  friend DenseBitset operator|(DenseBitset a, const DenseBitset& b) { return a |= b; }
  friend DenseBitset operator-(DenseBitset a, const DenseBitset& b) { return a -= b; }
  friend bool operator==(const DenseBitset&, const DenseBitset&) = default;

  bool subset_of(const DenseBitset& o) const {
    check(o);
    for (std::size_t k = 0; k < words_.size(); ++k)
      if (words_[k] & ~o.words_[k])
        return false;
    return true;
  }

  /* Calls f(i) for each set bit in increasing order. */
  template <class F> void for_each(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      word_type w = words_[k];
      while (w) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(w));
        f(k * kWordBits + bit);
        w &= w - 1;
      }
    }
  }

  std::vector<std::size_t> to_indices() const {
    std::vector<std::size_t> out;
    out.reserve(count());
    for_each([&](std::size_t i) { out.push_back(i); });
    return out;
  }

private:
  void trim() {
    if (size_ % kWordBits && !words_.empty())
      words_.back() &= (word_type{1} << (size_ % kWordBits)) - 1;
  }
  void check(const DenseBitset& o) const {
    if (o.size_ != size_)
      throw UniverseMismatch("set universe sizes differ: " + std::to_string(size_) + " vs " +
                             std::to_string(o.size_));
  }

  std::size_t size_ = 0;
  std::vector<word_type> words_;
};

/* Set of abstract states, membership over flat cell indices. */
using StateSet = DenseBitset;

} // namespace parashield

#endif // PARASHIELD_BITSET_HPP_
