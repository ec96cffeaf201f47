#include "pigeon/weakval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "pigeon/errors.hpp"

namespace pigeon {

namespace {

constexpr std::uint64_t kChunkTerms = 4096;

void require_odd(int n, const char* where) {
  if (n < 1 || n % 2 == 0) throw DomainError(fmt::format("{}: N must be odd and positive (got {})", where, n));
}

// Pairwise summation keeps the combined chunk sums independent of worker count.
WeakValue pairwise_sum(std::span<const WeakValue> v) {
  if (v.empty()) return {};
  if (v.size() == 1) return v[0];
  const auto half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace

WeakValue weak_value_pauli(const ProductState& pre, const ProductState& post, const PauliString& s) {
  if (pre.size() != post.size() || pre.size() != s.size())
    throw StructuralError(fmt::format("weak_value_pauli: lengths {} / {} / {} differ", pre.size(),
                                      post.size(), s.size()));
  Amplitude numerator = s.phase().value();
  Amplitude overlap{1.0, 0.0};
  for (std::size_t n = 0; n < pre.size(); ++n) {
    numerator *= matrix_element(post[n], s.op(n), pre[n]);
    overlap *= inner(post[n], pre[n]);
  }
  if (std::abs(overlap) <= kSingularOverlap)
    throw SingularOverlapError(
        fmt::format("postselection overlap |<phi|psi>| = {:.3e} is singular", std::abs(overlap)));
  return numerator / overlap;
}

std::vector<double> abl_probability(std::span<const WeakValue> basis) {
  if (basis.empty()) throw CompletenessError("empty measurement basis");
  WeakValue total{};
  for (auto v : basis) total += v;
  if (std::abs(total - 1.0) > kCompletenessTolerance)
    throw CompletenessError(fmt::format("projector weak values sum to ({}, {}), not 1", total.real(),
                                        total.imag()));
  // A two-outcome basis with (P_j)_w = 1 is certain regardless of rounding in its partner.
  if (basis.size() == 2) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (basis[k] == WeakValue{1.0, 0.0}) {
        std::vector<double> out(2, 0.0);
        out[k] = 1.0;
        return out;
      }
    }
  }
  double norm = 0.0;
  for (auto v : basis) norm += std::norm(v);
  std::vector<double> out;
  out.reserve(basis.size());
  for (auto v : basis) out.push_back(std::norm(v) / norm);
  return out;
}

BasisIndex::BasisIndex(int n, std::uint64_t j) : n_(n), j_(j) {
  if (n < 1 || n > 63) throw DomainError(fmt::format("basis index: N = {} out of range", n));
  if (j >= (std::uint64_t{1} << (n - 1)))
    throw DomainError(fmt::format("basis index: j = {} out of range for N = {}", j, n));
}

std::vector<int> BasisIndex::digits() const {
  std::vector<int> out(static_cast<std::size_t>(n_));
  for (int s = 0; s < n_; ++s) out[static_cast<std::size_t>(s)] = digit(s);
  return out;
}

int BasisIndex::popcount() const { return std::popcount(j_); }

WeakValue forbidden_projector_wv(const BasisIndex& idx, std::span<const WeakValue> zw) {
  if (zw.size() != static_cast<std::size_t>(idx.n()))
    throw StructuralError(
        fmt::format("forbidden_projector_wv: {} weak values for N = {}", zw.size(), idx.n()));
  WeakValue same{1.0, 0.0};
  WeakValue flipped{1.0, 0.0};
  for (int s = 0; s < idx.n(); ++s) {
    const WeakValue z = idx.digit(s) ? -zw[static_cast<std::size_t>(s)] : zw[static_cast<std::size_t>(s)];
    same *= 0.5 * (1.0 + z);
    flipped *= 0.5 * (1.0 - z);
  }
  return same + flipped;
}

int sign_pattern(int n, std::uint64_t j) {
  require_odd(n, "sign_pattern");
  const BasisIndex idx(n, j);
  const int m = n - 2 * idx.popcount();
  const int r = ((m % 8) + 8) % 8;
  return (r == 1 || r == 7) ? 1 : -1;
}

WeakValue witness_c(std::span<const WeakValue> zw, int threads) {
  const int n = static_cast<int>(zw.size());
  require_odd(n, "witness_c");
  if (n > 40) throw CapacityError(fmt::format("witness_c: direct sum over 2^{} terms refused", n - 1));
  const std::uint64_t terms = std::uint64_t{1} << (n - 1);
  const std::uint64_t chunks = (terms + kChunkTerms - 1) / kChunkTerms;
  std::vector<WeakValue> partial(chunks);

  auto run_chunk = [&](std::uint64_t c) {
    const std::uint64_t lo = c * kChunkTerms;
    const std::uint64_t hi = std::min(terms, lo + kChunkTerms);
    WeakValue acc{};
    for (std::uint64_t j = lo; j < hi; ++j)
      acc += static_cast<double>(sign_pattern(n, j)) * forbidden_projector_wv(BasisIndex(n, j), zw);
    partial[c] = acc;
  };

  const auto workers = static_cast<std::uint64_t>(std::clamp(threads, 1, 256));
  if (workers == 1 || chunks == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (std::uint64_t w = 0; w < std::min(workers, chunks); ++w)
      pool.emplace_back([&, w] {
        for (std::uint64_t c = w; c < chunks; c += workers) run_chunk(c);
      });
  }
  return 1.0 - pairwise_sum(partial);
}

WeakValue witness_c_by_weight(std::span<const WeakValue> zw) {
  const int n = static_cast<int>(zw.size());
  require_odd(n, "witness_c_by_weight");
  // weight[k] = sum over bit strings x with |x| = k of prod_n (1 + (-1)^x_n z_n)/2.
  std::vector<WeakValue> weight(static_cast<std::size_t>(n) + 1, WeakValue{});
  weight[0] = 1.0;
  for (int s = 0; s < n; ++s) {
    const WeakValue keep = 0.5 * (1.0 + zw[static_cast<std::size_t>(s)]);
    const WeakValue flip = 0.5 * (1.0 - zw[static_cast<std::size_t>(s)]);
    for (int k = s + 1; k >= 1; --k)
      weight[static_cast<std::size_t>(k)] =
          weight[static_cast<std::size_t>(k)] * keep + weight[static_cast<std::size_t>(k - 1)] * flip;
    weight[0] *= keep;
  }
  WeakValue acc{};
  for (int k = 0; k <= n; ++k) {
    const int r = (((n - 2 * k) % 8) + 8) % 8;
    const double sign = (r == 1 || r == 7) ? 1.0 : -1.0;
    acc += sign * weight[static_cast<std::size_t>(k)];
  }
  return 1.0 - acc;
}

double ideal_witness(int n) {
  require_odd(n, "ideal_witness");
  return 1.0 - std::ldexp(1.0, (n - 1) / 2);
}

AnomalyFlags classify_anomaly(WeakValue v) { return {v.real() < 0.0, v.real() > 1.0}; }

PigeonholeReport pigeonhole_report(std::span<const WeakValue> zw,
                                   std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  PigeonholeReport report;
  for (const auto& [a, b] : pairs) {
    if (a >= zw.size() || b >= zw.size())
      throw StructuralError(fmt::format("pigeonhole pair ({}, {}) out of range for {} spins", a, b, zw.size()));
    PigeonholeRow row{a, b, pairwise_zz_wv(zw[a], zw[b]), false};
    row.anticorrelated = row.zz.real() < 0.0;
    if (row.anticorrelated) ++report.anticorrelated;
    report.rows.push_back(row);
  }
  return report;
}

std::vector<std::pair<std::size_t, std::size_t>> ring_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < n; ++k) out.emplace_back(k, (k + 1) % n);
  return out;
}

WitnessResult make_witness_result(WeakValue value, double sigma_re, double sigma_im) {
  if (sigma_re < 0.0 || sigma_im < 0.0) throw DomainError("negative standard deviation");
  WitnessResult r{value, sigma_re, sigma_im, 0.0};
  if (value.real() < 0.0)
    r.violation_sigmas = sigma_re > 0.0 ? -value.real() / sigma_re : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace pigeon
