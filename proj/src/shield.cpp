#include "parashield/shield.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <fstream>
#include <limits>
#include <thread>

#include "binary_io.hpp"
#include "parashield/errors.hpp"

namespace parashield {

AtomicShieldBank::AtomicShieldBank(std::shared_ptr<const AbstractSystem> sys,
                                   std::vector<StateSet> safe_sets, ControllerTable reference,
                                   std::vector<Delta> deltas)
    : sys_(std::move(sys)), hash_(sys_->content_hash()), safe_sets_(std::move(safe_sets)),
      reference_(std::move(reference)), deltas_(std::move(deltas)) {
  if (deltas_.size() != safe_sets_.size())
    throw UniverseMismatch("bank needs one delta per atomic safe set");
  if (reference_.state_count() != sys_->state_count() ||
      reference_.input_count() != sys_->input_count())
    throw UniverseMismatch("bank reference table does not match the abstraction");
  for (const auto& g : safe_sets_)
    if (g.size() != sys_->state_count())
      throw UniverseMismatch("atomic safe set over a different universe");

  const std::size_t n = sys_->state_count();
  std::vector<std::vector<CellIndex>> succ_of(n);
  sys_->visit([&](const auto& rel) {
    reference_.domain().for_each([&](std::size_t s) {
      auto& list = succ_of[s];
      for (std::size_t u : reference_.allowed(s))
        rel.for_each(s, u, [&](CellIndex c) { list.push_back(c); });
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    });
  });
  pred_offsets_.assign(n + 1, 0);
  for (const auto& list : succ_of)
    for (CellIndex c : list)
      ++pred_offsets_[c + 1];
  for (std::size_t c = 0; c < n; ++c)
    pred_offsets_[c + 1] += pred_offsets_[c];
  pred_.resize(pred_offsets_[n]);
  std::vector<std::uint64_t> fill(pred_offsets_.begin(), pred_offsets_.end() - 1);
  for (std::size_t s = 0; s < n; ++s)
    for (CellIndex c : succ_of[s])
      pred_[fill[c]++] = static_cast<CellIndex>(s);
}

void AtomicShieldBank::restrict_to(ControllerTable& t, AtomicSpecId id) const {
  const Delta& d = deltas_.at(id);
  const std::size_t wps = t.words_per_state();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const CellIndex s = d.cells[k];
    if (!d.defined[k]) {
      t.undefine(s);
      continue;
    }
    if (!t.defined(s))
      continue;
    auto m = t.mask(s);
    for (std::size_t w = 0; w < wps; ++w)
      m[w] &= d.masks[k * wps + w];
  }
}

ControllerTable AtomicShieldBank::table(AtomicSpecId id) const {
  ControllerTable t = reference_;
  restrict_to(t, id);
  return t;
}

namespace {

AtomicShieldBank::Delta make_delta(const ControllerTable& ref, const ControllerTable& atomic) {
  if (!is_subcontroller(atomic, ref))
    throw UniverseMismatch("atomic controller is not a sub-controller of the bank reference");
  AtomicShieldBank::Delta d;
  const std::size_t wps = ref.words_per_state();
  ref.domain().for_each([&](std::size_t s) {
    const bool def = atomic.defined(s);
    const auto ma = atomic.mask(s);
    const auto mr = ref.mask(s);
    if (def && std::equal(ma.begin(), ma.end(), mr.begin()))
      return;
    d.cells.push_back(static_cast<CellIndex>(s));
    d.defined.push_back(def ? 1 : 0);
    for (std::size_t w = 0; w < wps; ++w)
      d.masks.push_back(ma[w]);
  });
  return d;
}

template <class F> void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true))
            failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace

AtomicShieldBank synthesize_bank(std::shared_ptr<const AbstractSystem> sys,
                                 std::vector<StateSet> atomics, const BankOptions& opts) {
  const std::size_t n = sys->state_count();
  StateSet all(n);
  for (const auto& g : atomics)
    all |= g;
  const ControllerTable reference = safety_control(*sys, SafetySpec{all});
  // The union's invariant set contains every atomic one, so it is a valid
  // starting point for each atomic fixed point.
  std::vector<AtomicShieldBank::Delta> deltas(atomics.size());
  parallel_for(atomics.size(), opts.threads, [&](std::size_t i) {
    const ControllerTable c = safety_control_from(*sys, SafetySpec{atomics[i]}, reference.domain());
    deltas[i] = make_delta(reference, c);
  });
  return AtomicShieldBank(std::move(sys), std::move(atomics), reference, std::move(deltas));
}

Shield compose(const AtomicShieldBank& bank, std::span<const AtomicSpecId> active,
               FixedPointStats* stats) {
  if (active.empty())
    throw EmptyActiveSet("compose needs at least one active atomic specification");
  for (AtomicSpecId id : active)
    if (id >= bank.size())
      throw EmptyActiveSet("atomic specification id " + std::to_string(id) + " is not in the bank");
  ControllerTable prod = bank.reference();
  const std::size_t wps = prod.words_per_state();
  std::vector<CellIndex> work;
  std::vector<CellIndex> removed;
  StateSet queued(prod.state_count());
  auto push = [&](CellIndex c) {
    if (!queued.test(c)) {
      queued.set(c);
      work.push_back(c);
    }
  };
  for (AtomicSpecId id : active) {
    const auto& d = bank.delta(id);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const CellIndex s = d.cells[k];
      if (!prod.defined(s))
        continue;
      if (!d.defined[k]) {
        prod.undefine(s);
        removed.push_back(s);
        continue;
      }
      auto m = prod.mask(s);
      for (std::size_t w = 0; w < wps; ++w)
        m[w] &= d.masks[k * wps + w];
      push(s);
    }
  }
  auto requeue = [&](CellIndex c) {
    for (CellIndex p : bank.predecessors(c))
      if (prod.defined(p))
        push(p);
  };
  for (CellIndex c : removed)
    requeue(c);
  bank.system().visit([&](const auto& rel) {
    while (!work.empty()) {
      const CellIndex s = work.back();
      work.pop_back();
      queued.reset(s);
      if (!prod.defined(s))
        continue;
      auto m = prod.mask(s);
      for (std::size_t w = 0; w < wps; ++w) {
        for (auto bits = m[w]; bits; bits &= bits - 1) {
          const std::size_t u = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
          if (rel.out(s, u) || !rel.all_of(s, u, [&](CellIndex c) { return prod.defined(c); }))
            m[w] &= ~(std::uint64_t{1} << (u % 64));
        }
      }
      if (prod.empty_at(s)) {
        prod.undefine(s);
        requeue(s);
      }
    }
  });
  if (stats) {
    stats->iterations += 1;
    stats->set_sizes.push_back(prod.domain().count());
  }
  Shield sh{bank.system_ptr(), std::move(prod),
            std::vector<AtomicSpecId>(active.begin(), active.end())};
  std::sort(sh.provenance.begin(), sh.provenance.end());
  sh.provenance.erase(std::unique(sh.provenance.begin(), sh.provenance.end()), sh.provenance.end());
  return sh;
}

ShieldDecision shield_apply(const Shield& shield, CellIndex cell, std::span<const double> proposed) {
  if (cell >= shield.table.state_count() || !shield.covers(cell))
    throw DomainViolation("cell " + std::to_string(cell) + " is outside the shield domain");
  const InputGrid& inputs = shield.system->inputs();
  if (proposed.size() != inputs.dims())
    throw UniverseMismatch("proposed input has the wrong dimension");
  ShieldDecision d;
  const std::size_t snapped = inputs.nearest(proposed);
  d.proposed_allowed = shield.table.allows(cell, snapped);
  d.intervened = !d.proposed_allowed;
  if (d.proposed_allowed) {
    d.input = snapped;
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u : shield.table.allowed(cell)) {
      const double dist = squared_distance(inputs.point(u), proposed);
      if (dist + 1e-12 < best) {
        best = dist;
        d.input = u;
      }
    }
  }
  const auto p = inputs.point(d.input);
  d.chosen.assign(p.begin(), p.end());
  return d;
}

Shield pure_online_shield(std::shared_ptr<const AbstractSystem> sys,
                          std::span<const StateSet> safe_sets, FixedPointStats* stats) {
  if (safe_sets.empty())
    throw EmptyActiveSet("pure online shield needs at least one safe set");
  StateSet safe = safe_sets.front();
  for (std::size_t i = 1; i < safe_sets.size(); ++i)
    safe &= safe_sets[i];
  ControllerTable t = safety_control(*sys, SafetySpec{std::move(safe)}, stats);
  return Shield{std::move(sys), std::move(t), {}};
}

Shield pure_online_shield(const AtomicShieldBank& bank, std::span<const AtomicSpecId> active,
                          FixedPointStats* stats) {
  if (active.empty())
    throw EmptyActiveSet("pure online shield needs at least one active atomic specification");
  StateSet safe = bank.safe_set(active.front());
  for (std::size_t i = 1; i < active.size(); ++i)
    safe &= bank.safe_set(active[i]);
  ControllerTable t = safety_control(bank.system(), SafetySpec{std::move(safe)}, stats);
  Shield sh{bank.system_ptr(), std::move(t), std::vector<AtomicSpecId>(active.begin(), active.end())};
  std::sort(sh.provenance.begin(), sh.provenance.end());
  sh.provenance.erase(std::unique(sh.provenance.begin(), sh.provenance.end()), sh.provenance.end());
  return sh;
}

namespace {

constexpr char kBankMagic[] = "PSBK1";

template <class Sink> void emit_set(Sink& sink, const StateSet& s) {
  const auto w = s.words();
  sink.put(w.data(), w.size() * sizeof(std::uint64_t));
}

StateSet read_set(std::istream& is, std::size_t n) {
  StateSet s(n);
  for (auto& w : s.words())
    w = detail::get_pod<std::uint64_t>(is);
  return s;
}

} // namespace

void write_bank(std::ostream& os, const AtomicShieldBank& bank) {
  detail::StreamSink sink(os);
  sink.put(kBankMagic, 5);
  detail::put_pod(sink, bank.abstraction_hash());
  const auto& ref = bank.reference();
  detail::put_pod<detail::StreamSink, std::uint64_t>(sink, ref.state_count());
  detail::put_pod<detail::StreamSink, std::uint64_t>(sink, ref.input_count());
  detail::put_pod<detail::StreamSink, std::uint64_t>(sink, bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i)
    emit_set(sink, bank.safe_set(i));
  emit_set(sink, ref.domain());
  for (std::size_t s = 0; s < ref.state_count(); ++s) {
    const auto m = ref.mask(s);
    sink.put(m.data(), m.size() * sizeof(std::uint64_t));
  }
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& d = bank.delta(i);
    detail::put_pod<detail::StreamSink, std::uint64_t>(sink, d.size());
    if (d.size() == 0)
      continue;
    sink.put(d.cells.data(), d.cells.size() * sizeof(CellIndex));
    sink.put(d.defined.data(), d.defined.size());
    sink.put(d.masks.data(), d.masks.size() * sizeof(std::uint64_t));
  }
  if (!os)
    throw FormatError("failed writing bank");
}

AtomicShieldBank read_bank(std::istream& is, std::shared_ptr<const AbstractSystem> sys,
                           std::size_t spot_checks) {
  using detail::get_pod;
  detail::expect_magic(is, kBankMagic);
  if (get_pod<std::uint64_t>(is) != sys->content_hash())
    throw FormatError("bank was synthesized for a different abstraction");
  const auto states = get_pod<std::uint64_t>(is);
  const auto inputs = get_pod<std::uint64_t>(is);
  const auto count = get_pod<std::uint64_t>(is);
  if (states != sys->state_count() || inputs != sys->input_count())
    throw FormatError("bank universe does not match the abstraction");
  std::vector<StateSet> safe(count);
  for (auto& g : safe)
    g = read_set(is, states);
  ControllerTable ref(states, inputs);
  read_set(is, states).for_each([&](std::size_t s) { ref.define(s); });
  for (std::size_t s = 0; s < states; ++s)
    for (auto& w : ref.mask(s))
      w = get_pod<std::uint64_t>(is);
  const std::size_t wps = ref.words_per_state();
  std::vector<AtomicShieldBank::Delta> deltas(count);
  for (auto& d : deltas) {
    const auto len = get_pod<std::uint64_t>(is);
    d.cells.resize(len);
    d.defined.resize(len);
    d.masks.resize(len * wps);
    if (len == 0)
      continue;
    is.read(reinterpret_cast<char*>(d.cells.data()), static_cast<std::streamsize>(len * sizeof(CellIndex)));
    is.read(reinterpret_cast<char*>(d.defined.data()), static_cast<std::streamsize>(len));
    is.read(reinterpret_cast<char*>(d.masks.data()),
            static_cast<std::streamsize>(d.masks.size() * sizeof(std::uint64_t)));
    if (!is)
      throw FormatError("unexpected end of file in bank delta");
    for (CellIndex c : d.cells)
      if (c >= states)
        throw FormatError("bank delta references a state outside the universe");
  }
  AtomicShieldBank bank(std::move(sys), std::move(safe), std::move(ref), std::move(deltas));
  // spot-check evenly spaced atomics against fresh synthesis
  const std::size_t checks = std::min<std::size_t>(spot_checks, bank.size());
  for (std::size_t k = 0; k < checks; ++k) {
    const std::size_t id = checks == 1 ? 0 : k * (bank.size() - 1) / (checks - 1);
    if (!(safety_control(bank.system(), SafetySpec{bank.safe_set(id)}) == bank.table(id)))
      throw FormatError("bank table " + std::to_string(id) + " does not match its safe set");
  }
  return bank;
}

void save_bank(const std::string& path, const AtomicShieldBank& bank) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw FormatError("cannot open " + path + " for writing");
  write_bank(os, bank);
}

AtomicShieldBank load_bank(const std::string& path, std::shared_ptr<const AbstractSystem> sys,
                           std::size_t spot_checks) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw FormatError("cannot open " + path);
  return read_bank(is, std::move(sys), spot_checks);
}

} // namespace parashield
