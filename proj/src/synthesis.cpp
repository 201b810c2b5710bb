#include "parashield/synthesis.hpp"

#include <bit>
#include <fstream>
#include <ostream>

#include "binary_io.hpp"
#include "parashield/errors.hpp"

namespace parashield {

ControllerTable::ControllerTable(std::size_t states, std::size_t inputs)
    : states_(states), inputs_(inputs), wps_((inputs + 63) / 64), defined_(states),
      masks_(states * wps_, 0) {}

ControllerTable ControllerTable::full(const StateSet& domain, std::size_t inputs) {
  ControllerTable c(domain.size(), inputs);
  domain.for_each([&](std::size_t s) {
    c.define(s);
    for (std::size_t u = 0; u < inputs; ++u)
      c.allow(s, u);
  });
  return c;
}

void ControllerTable::define(std::size_t s) { defined_.set(s); }

void ControllerTable::undefine(std::size_t s) {
  defined_.reset(s);
  for (auto& w : mask(s))
    w = 0;
}

void ControllerTable::allow(std::size_t s, std::size_t u) {
  defined_.set(s);
  masks_[s * wps_ + u / 64] |= word_type{1} << (u % 64);
}

void ControllerTable::disallow(std::size_t s, std::size_t u) {
  masks_[s * wps_ + u / 64] &= ~(word_type{1} << (u % 64));
}

bool ControllerTable::empty_at(std::size_t s) const {
  for (word_type w : mask(s))
    if (w)
      return false;
  return true;
}

std::vector<std::size_t> ControllerTable::allowed(std::size_t s) const {
  std::vector<std::size_t> out;
  if (!defined(s))
    return out;
  const auto m = mask(s);
  for (std::size_t k = 0; k < m.size(); ++k) {
    word_type w = m[k];
    while (w) {
      out.push_back(k * 64 + static_cast<std::size_t>(std::countr_zero(w)));
      w &= w - 1;
    }
  }
  return out;
}

std::size_t ControllerTable::allowed_count(std::size_t s) const {
  std::size_t n = 0;
  for (word_type w : mask(s))
    n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool operator==(const ControllerTable& a, const ControllerTable& b) {
  return a.states_ == b.states_ && a.inputs_ == b.inputs_ && a.defined_ == b.defined_ &&
         a.masks_ == b.masks_;
}

namespace {

void check_same_universe(const ControllerTable& a, const ControllerTable& b) {
  if (a.state_count() != b.state_count() || a.input_count() != b.input_count())
    throw UniverseMismatch("controller tables over different state or input universes");
}

void check_universe(const AbstractSystem& sys, std::size_t states) {
  if (sys.state_count() != states)
    throw UniverseMismatch("set universe " + std::to_string(states) + " differs from " +
                           std::to_string(sys.state_count()) + " abstract states");
}

template <class Rel>
inline bool stays_in(const Rel& rel, std::size_t s, std::size_t u, const StateSet& S) {
  return !rel.out(s, u) && rel.all_of(s, u, [&](CellIndex c) { return S.test(c); });
}

// Candidate inputs of a state: either every input or the bits of a mask.
struct AllInputs {
  std::size_t m;
  template <class F> bool any(std::size_t, F&& f) const {
    for (std::size_t u = 0; u < m; ++u)
      if (f(u))
        return true;
    return false;
  }
};

struct MaskedInputs {
  const ControllerTable& table;
  template <class F> bool any(std::size_t s, F&& f) const {
    const auto mask = table.mask(s);
    for (std::size_t k = 0; k < mask.size(); ++k) {
      auto w = mask[k];
      while (w) {
        if (f(k * 64 + static_cast<std::size_t>(std::countr_zero(w))))
          return true;
        w &= w - 1;
      }
    }
    return false;
  }
};

// Synchronous greatest fixed point of S -> { s in S & bound | exists a
// candidate u keeping post(s, u) inside S }.
template <class Rel, class Candidates>
StateSet greatest_fixed_point(const Rel& rel, StateSet S, const StateSet* bound,
                              const Candidates& cand, FixedPointStats* stats) {
  for (;;) {
    StateSet sweep = S;
    if (bound)
      sweep &= *bound;
    StateSet next(S.size());
    sweep.for_each([&](std::size_t s) {
      if (cand.any(s, [&](std::size_t u) { return stays_in(rel, s, u, S); }))
        next.set(s);
    });
    if (stats) {
      ++stats->iterations;
      stats->set_sizes.push_back(next.count());
    }
    if (next == S || next.none())
      return next;
    S = std::move(next);
  }
}

template <class Rel>
ControllerTable extract(const Rel& rel, const StateSet& S, std::size_t m) {
  ControllerTable c(S.size(), m);
  S.for_each([&](std::size_t s) {
    c.define(s);
    for (std::size_t u = 0; u < m; ++u)
      if (stays_in(rel, s, u, S))
        c.allow(s, u);
  });
  return c;
}

} // namespace

bool controller_equal(const ControllerTable& a, const ControllerTable& b) {
  check_same_universe(a, b);
  return a == b;
}

bool is_subcontroller(const ControllerTable& a, const ControllerTable& b) {
  check_same_universe(a, b);
  if (!a.domain().subset_of(b.domain()))
    return false;
  bool ok = true;
  a.domain().for_each([&](std::size_t s) {
    const auto ma = a.mask(s);
    const auto mb = b.mask(s);
    for (std::size_t k = 0; k < ma.size(); ++k)
      if (ma[k] & ~mb[k])
        ok = false;
  });
  return ok;
}

bool is_nonblocking(const AbstractSystem& sys, const ControllerTable& c) {
  check_universe(sys, c.state_count());
  bool ok = true;
  sys.visit([&](const auto& rel) {
    c.domain().for_each([&](std::size_t s) {
      if (c.empty_at(s))
        ok = false;
      for (std::size_t u : c.allowed(s))
        if (!stays_in(rel, s, u, c.domain()))
          ok = false;
    });
  });
  return ok;
}

StateSet cpre(const AbstractSystem& sys, const StateSet& S) {
  check_universe(sys, S.size());
  StateSet r(S.size());
  sys.visit([&](const auto& rel) {
    const AllInputs all{sys.input_count()};
    for (std::size_t s = 0; s < S.size(); ++s)
      if (all.any(s, [&](std::size_t u) { return stays_in(rel, s, u, S); }))
        r.set(s);
  });
  return r;
}

ControllerTable safety_control(const AbstractSystem& sys, const SafetySpec& spec,
                               FixedPointStats* stats) {
  return safety_control_from(sys, spec, StateSet::universe(sys.state_count()), stats);
}

ControllerTable safety_control_from(const AbstractSystem& sys, const SafetySpec& spec,
                                    const StateSet& start, FixedPointStats* stats) {
  check_universe(sys, spec.safe.size());
  check_universe(sys, start.size());
  return sys.visit([&](const auto& rel) {
    const StateSet fixed =
        greatest_fixed_point(rel, start, &spec.safe, AllInputs{sys.input_count()}, stats);
    return extract(rel, fixed, sys.input_count());
  });
}

ControllerTable product(const ControllerTable& a, const ControllerTable& b) {
  check_same_universe(a, b);
  ControllerTable r(a.state_count(), a.input_count());
  const StateSet dom = a.domain() & b.domain();
  dom.for_each([&](std::size_t s) {
    r.define(s);
    auto out = r.mask(s);
    const auto ma = a.mask(s);
    const auto mb = b.mask(s);
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = ma[k] & mb[k];
  });
  return r;
}

ControllerTable largest_nonblocking(const AbstractSystem& sys, const ControllerTable& c,
                                    FixedPointStats* stats) {
  check_universe(sys, c.state_count());
  if (c.input_count() != sys.input_count())
    throw UniverseMismatch("controller input count differs from the abstraction");
  return sys.visit([&](const auto& rel) {
    const StateSet fixed = greatest_fixed_point(rel, c.domain(), nullptr, MaskedInputs{c}, stats);
    ControllerTable r(c.state_count(), c.input_count());
    const MaskedInputs cand{c};
    fixed.for_each([&](std::size_t s) {
      r.define(s);
      cand.any(s, [&](std::size_t u) {
        if (stays_in(rel, s, u, fixed))
          r.allow(s, u);
        return false;
      });
    });
    return r;
  });
}

namespace {
constexpr char kControllerMagic[] = "PSCT1";
}

void write_controller(std::ostream& os, const ControllerTable& c, std::uint64_t abstraction_hash) {
  detail::StreamSink sink(os);
  sink.put(kControllerMagic, 5);
  detail::put_pod(sink, abstraction_hash);
  detail::put_pod<detail::StreamSink, std::uint64_t>(sink, c.state_count());
  detail::put_pod<detail::StreamSink, std::uint64_t>(sink, c.input_count());
  const auto dw = c.domain().words();
  sink.put(dw.data(), dw.size() * sizeof(std::uint64_t));
  for (std::size_t s = 0; s < c.state_count(); ++s) {
    const auto m = c.mask(s);
    sink.put(m.data(), m.size() * sizeof(std::uint64_t));
  }
  if (!os)
    throw FormatError("failed writing controller");
}

ControllerTable read_controller(std::istream& is, std::uint64_t expected_hash) {
  using detail::get_pod;
  detail::expect_magic(is, kControllerMagic);
  const auto hash = get_pod<std::uint64_t>(is);
  if (hash != expected_hash)
    throw FormatError("controller was synthesized for a different abstraction");
  const auto states = get_pod<std::uint64_t>(is);
  const auto inputs = get_pod<std::uint64_t>(is);
  ControllerTable c(states, inputs);
  StateSet dom(states);
  for (auto& w : dom.words())
    w = get_pod<std::uint64_t>(is);
  for (std::size_t s = 0; s < states; ++s)
    for (auto& w : c.mask(s))
      w = get_pod<std::uint64_t>(is);
  dom.for_each([&](std::size_t s) { c.define(s); });
  for (std::size_t s = 0; s < states; ++s)
    if (!dom.test(s) && !c.empty_at(s))
      throw FormatError("controller file has inputs on an undefined state");
  return c;
}

void save_controller(const std::string& path, const ControllerTable& c, std::uint64_t abstraction_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw FormatError("cannot open " + path + " for writing");
  write_controller(os, c, abstraction_hash);
}

ControllerTable load_controller(const std::string& path, std::uint64_t expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw FormatError("cannot open " + path);
  return read_controller(is, expected_hash);
}

void dump_controller(std::ostream& os, const AbstractSystem& sys, const ControllerTable& c) {
  check_universe(sys, c.state_count());
  c.domain().for_each([&](std::size_t s) {
    if (sys.grid()) {
      const auto m = sys.grid()->multi(static_cast<CellIndex>(s));
      os << '(';
      for (std::size_t i = 0; i < m.size(); ++i)
        os << (i ? "," : "") << m[i];
      os << ')';
    } else {
      os << s;
    }
    os << " :";
    for (std::size_t u : c.allowed(s))
      os << ' ' << u;
    os << '\n';
  });
}

} // namespace parashield
