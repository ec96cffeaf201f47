#include "pigeon/wheel.hpp"

#include <algorithm>
#include <bit>
#include <thread>

#include <fmt/format.h>

#include "pigeon/errors.hpp"
#include "pigeon/weakval.hpp"

namespace pigeon {

namespace {

Pauli letter(PairKind k) {
  switch (k) {
    case PairKind::ZZ: return Pauli::Z;
    case PairKind::XX: return Pauli::X;
    case PairKind::YY: return Pauli::Y;
  }
  return Pauli::I;
}

// Wheel layout shared by build_wheel and wheel_from_json.
std::vector<Context> wheel_contexts(int n) {
  std::vector<Context> contexts;
  const auto un = static_cast<std::size_t>(n);
  for (auto kind : kPairKinds) {
    Context ring{fmt::format("ring {}", to_string(kind)), {}, 1};
    for (std::size_t k = 0; k < un; ++k) ring.observables.push_back(static_cast<std::size_t>(kind) * un + k);
    contexts.push_back(std::move(ring));
  }
  for (std::size_t k = 0; k < un; ++k) {
    Context spoke{fmt::format("spoke {}", k), {}, -1};
    for (auto kind : kPairKinds) spoke.observables.push_back(static_cast<std::size_t>(kind) * un + k);
    contexts.push_back(std::move(spoke));
  }
  return contexts;
}

PauliString pair_observable(int n, PairKind kind, int pair) {
  const std::array<std::size_t, 2> sites{static_cast<std::size_t>(pair), static_cast<std::size_t>((pair + 1) % n)};
  return PauliString::on_sites(static_cast<std::size_t>(n), letter(kind), sites);
}

std::uint64_t context_mask(const Context& c) {
  std::uint64_t m = 0;
  for (auto o : c.observables) m |= std::uint64_t{1} << o;
  return m;
}

}  // namespace

const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::ZZ: return "ZZ";
    case PairKind::XX: return "XX";
    case PairKind::YY: return "YY";
  }
  return "?";
}

std::size_t WheelSet::observable_id(PairKind kind, int pair) const {
  if (pair < 0 || pair >= n_) throw DomainError(fmt::format("pair {} out of range for N = {}", pair, n_));
  return static_cast<std::size_t>(kind) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(pair);
}

const PauliString& WheelSet::observable(PairKind kind, int pair) const {
  return observables_[observable_id(kind, pair)];
}

std::vector<PauliString> WheelSet::ring(PairKind kind) const {
  std::vector<PauliString> out;
  for (auto id : contexts_[ring_context(kind)].observables) out.push_back(observables_[id]);
  return out;
}

std::vector<PauliString> WheelSet::spoke(int pair) const {
  std::vector<PauliString> out;
  for (auto id : contexts_.at(spoke_context(pair)).observables) out.push_back(observables_[id]);
  return out;
}

WheelSet WheelSet::with_flipped_sign(std::size_t context) const {
  if (context >= contexts_.size()) throw DomainError(fmt::format("no context {}", context));
  WheelSet copy = *this;
  copy.contexts_[context].required_sign = -copy.contexts_[context].required_sign;
  return copy;
}

WheelSet build_wheel(int n) {
  if (n < 3 || n % 2 == 0) throw DomainError(fmt::format("Wheel size must be odd and >= 3 (got {})", n));
  WheelSet w;
  w.n_ = n;
  for (auto kind : kPairKinds)
    for (int k = 0; k < n; ++k) w.observables_.push_back(pair_observable(n, kind, k));
  w.contexts_ = wheel_contexts(n);
  return w;
}

nlohmann::json to_json(const WheelSet& w) {
  nlohmann::json rings = nlohmann::json::array();
  for (auto kind : kPairKinds) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& p : w.ring(kind)) ring.push_back(p.to_string());
    rings.push_back(std::move(ring));
  }
  nlohmann::json spokes = nlohmann::json::array();
  for (int k = 0; k < w.n(); ++k) {
    nlohmann::json spoke = nlohmann::json::array();
    for (const auto& p : w.spoke(k)) spoke.push_back(p.to_string());
    spokes.push_back(std::move(spoke));
  }
  return {{"n", w.n()}, {"rings", std::move(rings)}, {"spokes", std::move(spokes)}};
}

WheelSet wheel_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    WheelSet w = build_wheel(n);
    const auto& rings = j.at("rings");
    const auto& spokes = j.at("spokes");
    if (rings.size() != 3 || spokes.size() != static_cast<std::size_t>(n))
      throw DataError("wheel JSON: expected 3 rings and N spokes");
    for (std::size_t r = 0; r < 3; ++r) {
      const auto expected = w.ring(kPairKinds[r]);
      if (rings[r].size() != expected.size()) throw DataError(fmt::format("wheel JSON: ring {} has wrong size", r));
      for (std::size_t k = 0; k < expected.size(); ++k)
        if (PauliString::parse(rings[r][k].get<std::string>()) != expected[k])
          throw DataError(fmt::format("wheel JSON: ring {} entry {} is not a Wheel observable", r, k));
    }
    for (int k = 0; k < n; ++k) {
      const auto expected = w.spoke(k);
      const auto& spoke = spokes[static_cast<std::size_t>(k)];
      if (spoke.size() != expected.size()) throw DataError(fmt::format("wheel JSON: spoke {} has wrong size", k));
      for (std::size_t o = 0; o < expected.size(); ++o)
        if (PauliString::parse(spoke[o].get<std::string>()) != expected[o])
          throw DataError(fmt::format("wheel JSON: spoke {} entry {} is not a Wheel observable", k, o));
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("wheel JSON: {}", e.what()));
  } catch (const DomainError& e) {
    throw DataError(fmt::format("wheel JSON: {}", e.what()));
  } catch (const StructuralError& e) {
    throw DataError(fmt::format("wheel JSON: {}", e.what()));
  }
}

std::vector<ContextCheck> verify_context_products(const WheelSet& w) {
  std::vector<ContextCheck> out;
  const auto& obs = w.observables();
  for (const auto& c : w.contexts()) {
    ContextCheck check{c.label, PauliString::identity(static_cast<std::size_t>(w.n())), c.required_sign, true, false};
    for (std::size_t a = 0; a < c.observables.size(); ++a) {
      check.product = pauli_mul(check.product, obs[c.observables[a]]);
      for (std::size_t b = a + 1; b < c.observables.size(); ++b)
        check.commuting = check.commuting && commutes(obs[c.observables[a]], obs[c.observables[b]]);
    }
    check.ok = check.commuting && check.product.is_identity_up_to_phase() &&
               check.product.phase().real_sign() == c.required_sign;
    out.push_back(std::move(check));
  }
  return out;
}

bool has_ring_spoke_incidence(const WheelSet& w) {
  std::vector<int> ring_hits(w.observables().size(), 0);
  std::vector<int> spoke_hits(w.observables().size(), 0);
  for (std::size_t c = 0; c < w.contexts().size(); ++c)
    for (auto o : w.contexts()[c].observables) (c < 3 ? ring_hits : spoke_hits)[o]++;
  for (std::size_t o = 0; o < ring_hits.size(); ++o)
    if (ring_hits[o] != 1 || spoke_hits[o] != 1) return false;
  return true;
}

Gf2System build_gf2_system(const WheelSet& w) {
  Gf2System sys;
  sys.variables = w.observables().size();
  sys.rhs.resize(w.contexts().size());
  for (std::size_t r = 0; r < w.contexts().size(); ++r) {
    const auto& c = w.contexts()[r];
    boost::dynamic_bitset<std::uint64_t> row(sys.variables);
    for (auto o : c.observables) row.flip(o);
    sys.rows.push_back(std::move(row));
    sys.rhs[r] = c.required_sign < 0;
  }
  return sys;
}

ExhaustiveResult prove_no_nchv_exhaustive(const WheelSet& w, int threads) {
  if (w.n() > 5)
    throw CapacityError(fmt::format(
        "exhaustive search over 2^{} assignments refused for N = {}; use the GF(2) prover", 3 * w.n(), w.n()));
  const auto& contexts = w.contexts();
  std::vector<std::uint64_t> masks;
  std::vector<int> parity;
  for (const auto& c : contexts) {
    masks.push_back(context_mask(c));
    parity.push_back(c.required_sign < 0 ? 1 : 0);
  }
  const std::uint64_t total = std::uint64_t{1} << w.observables().size();

  struct Partial {
    std::uint64_t satisfying = 0;
    std::size_t best = 0;
  };
  auto scan = [&](std::uint64_t lo, std::uint64_t hi) {
    Partial p;
    for (std::uint64_t a = lo; a < hi; ++a) {
      std::size_t ok = 0;
      for (std::size_t c = 0; c < masks.size(); ++c)
        ok += (std::popcount(a & masks[c]) & 1) == parity[c];
      p.best = std::max(p.best, ok);
      if (ok == masks.size()) ++p.satisfying;
    }
    return p;
  };

  const auto workers = static_cast<std::uint64_t>(std::clamp(threads, 1, 64));
  std::vector<Partial> parts(workers);
  {
    std::vector<std::jthread> pool;
    const std::uint64_t step = (total + workers - 1) / workers;
    for (std::uint64_t k = 0; k < workers; ++k) {
      const std::uint64_t lo = std::min(total, k * step);
      const std::uint64_t hi = std::min(total, lo + step);
      if (workers == 1) parts[k] = scan(lo, hi);
      else pool.emplace_back([&, k, lo, hi] { parts[k] = scan(lo, hi); });
    }
  }
  ExhaustiveResult r;
  r.candidates = total;
  r.contexts = masks.size();
  for (const auto& p : parts) {
    r.satisfying += p.satisfying;
    r.max_satisfied_contexts = std::max(r.max_satisfied_contexts, p.best);
  }
  r.no_assignment = r.satisfying == 0;
  return r;
}

Gf2Result solve_gf2(const Gf2System& system) {
  const std::size_t m = system.rows.size();
  const std::size_t vars = system.variables;
  Gf2Result result;
  result.equations = m;
  result.variables = vars;

  auto rows = system.rows;
  auto rhs = system.rhs;
  // provenance[r] marks which original equations were added into row r.
  std::vector<boost::dynamic_bitset<std::uint64_t>> provenance(m, boost::dynamic_bitset<std::uint64_t>(m));
  for (std::size_t r = 0; r < m; ++r) provenance[r].set(r);

  std::vector<std::size_t> pivot_col;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < vars && rank < m; ++col) {
    std::size_t pivot = rank;
    while (pivot < m && !rows[pivot].test(col)) ++pivot;
    if (pivot == m) continue;
    std::swap(rows[pivot], rows[rank]);
    std::swap(provenance[pivot], provenance[rank]);
    {
      const bool t = rhs[pivot];
      rhs[pivot] = rhs[rank];
      rhs[rank] = t;
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (r != rank && rows[r].test(col)) {
        rows[r] ^= rows[rank];
        provenance[r] ^= provenance[rank];
        rhs[r] = rhs[r] != rhs[rank];
      }
    }
    pivot_col.push_back(col);
    ++rank;
  }
  result.rank = rank;

  for (std::size_t r = rank; r < m; ++r) {
    if (rows[r].none() && rhs[r]) {
      result.inconsistent = true;
      for (std::size_t k = 0; k < m; ++k)
        if (provenance[r].test(k)) result.certificate.push_back(k);
      return result;
    }
  }
  // Reduced row echelon form: free variables 0, pivots read off the rhs.
  result.solution.assign(vars, 0);
  for (std::size_t r = 0; r < rank; ++r) result.solution[pivot_col[r]] = rhs[r] ? 1 : 0;
  return result;
}

Gf2Result prove_no_nchv_gf2(const WheelSet& w) { return solve_gf2(build_gf2_system(w)); }

BoundaryAssignment apply_boundary_conditions(const WheelSet& w) {
  const auto n = static_cast<std::size_t>(w.n());
  return apply_boundary_conditions(w, ProductState::uniform(SpinState::plus_x(), n),
                                   ProductState::uniform(SpinState::plus_y(), n));
}

BoundaryAssignment apply_boundary_conditions(const WheelSet& w, const ProductState& pre,
                                             const ProductState& post) {
  constexpr double kCertain = 1e-12;
  BoundaryAssignment out;
  for (const auto& obs : w.observables()) {
    // Two-outcome basis {(1 + P)/2, (1 - P)/2} of a +-1 valued observable.
    const WeakValue pw = weak_value_pauli(pre, post, obs);
    const std::vector<WeakValue> basis{0.5 * (1.0 + pw), 0.5 * (1.0 - pw)};
    const auto prob = abl_probability(basis);
    if (std::abs(prob[0] - 1.0) <= kCertain) out.values.emplace_back(1);
    else if (std::abs(prob[1] - 1.0) <= kCertain) out.values.emplace_back(-1);
    else out.values.emplace_back(std::nullopt);
  }
  for (std::size_t c = 0; c < w.contexts().size(); ++c) {
    const auto& ctx = w.contexts()[c];
    int product = 1;
    bool complete = true;
    for (auto o : ctx.observables) {
      if (!out.values[o]) {
        complete = false;
        break;
      }
      product *= *out.values[o];
    }
    if (complete && product != ctx.required_sign) out.contradictory_contexts.push_back(c);
  }
  return out;
}

}  // namespace pigeon
