#pragma once

// Weak values under product pre/postselection, the ABL rule, and the
// forbidden-projector contextuality witnesses of the ZZ ring.

#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pigeon/qalg.hpp"

namespace pigeon {

using WeakValue = std::complex<double>;

/// |<phi|psi>| at or below this is treated as orthogonal.
inline constexpr double kSingularOverlap = 1e-12;
inline constexpr double kCompletenessTolerance = 1e-9;

/// The single-spin Z weak value for |+X> -> <+Y|.
inline constexpr WeakValue kIdealZ{0.0, 1.0};

/// <phi|s|psi> / <phi|psi>, factorized over spins.
/// Throws SingularOverlapError when |<phi|psi>| <= 1e-12, StructuralError on length mismatch.
WeakValue weak_value_pauli(const ProductState& pre, const ProductState& post, const PauliString& s);

/// ABL probabilities |(P_j)_w|^2 / sum_k |(P_k)_w|^2 from the projector weak values of a
/// complete basis. Throws CompletenessError unless the weak values sum to 1 within 1e-9.
std::vector<double> abl_probability(std::span<const WeakValue> basis);

/// Index j of a forbidden projector together with its N-digit binary label.
///
/// The label is written most significant digit first with the leading digit
/// fixed to 0, so j ranges over [0, 2^(N-1)) and each j stands for the pair
/// {x, complement(x)}: N = 3, j = 1 is (0,0,1).
class BasisIndex {
 public:
  /// Throws DomainError when N < 1, N > 63 or j >= 2^(N-1).
  BasisIndex(int n, std::uint64_t j);

  int n() const { return n_; }
  std::uint64_t j() const { return j_; }
  /// Digit for spin `spin` (0-based, left to right).
  int digit(int spin) const { return static_cast<int>((j_ >> (n_ - 1 - spin)) & 1U); }
  std::vector<int> digits() const;
  int popcount() const;

 private:
  int n_;
  std::uint64_t j_;
};

/// Weak value of the rank-2 projector onto {x_j, complement(x_j)} from single-spin Z weak values:
///   prod_n (1 + (-1)^x_n Z_n)/2 + prod_n (1 - (-1)^x_n Z_n)/2.
WeakValue forbidden_projector_wv(const BasisIndex& idx, std::span<const WeakValue> zw);

/// sign(Re (P_j)_w) at the ideal point Z_w = i, in closed form: sign cos(pi m / 4) with
/// m = N - 2 popcount(x_j). N must be odd (DomainError otherwise).
int sign_pattern(int n, std::uint64_t j);

/// 1 - sum_j s_j (P_j)_w over all 2^(N-1) forbidden projectors, every term evaluated
/// directly. The sum is split into fixed-size chunks combined in index order, so the
/// result does not depend on `threads`.
WeakValue witness_c(std::span<const WeakValue> zw, int threads = 1);

/// Same witness computed by grouping bit strings by Hamming weight: O(N^2) instead of
/// O(N 2^N). Used where the witness is evaluated many times (Monte Carlo propagation).
WeakValue witness_c_by_weight(std::span<const WeakValue> zw);

/// 1 - 2^((N-1)/2), the ideal witness value.
double ideal_witness(int n);

/// (ZZ)_w = a * b for independent spins.
inline WeakValue pairwise_zz_wv(WeakValue a, WeakValue b) { return a * b; }

struct AnomalyFlags {
  bool negative = false;    // Re < 0
  bool above_one = false;   // Re > 1
  bool anomalous() const { return negative || above_one; }
};

/// Classifies a projector weak value against the classical range [0, 1].
AnomalyFlags classify_anomaly(WeakValue v);

struct PigeonholeRow {
  std::size_t a = 0;  // 0-based spin indices into the zw list
  std::size_t b = 0;
  WeakValue zz;
  bool anticorrelated = false;  // Re (ZZ)_w < 0
};

struct PigeonholeReport {
  std::vector<PigeonholeRow> rows;
  std::size_t anticorrelated = 0;
  bool all_anticorrelated() const { return anticorrelated == rows.size(); }
};

/// (ZZ)_w for each requested pair. Throws StructuralError for out-of-range indices.
PigeonholeReport pigeonhole_report(std::span<const WeakValue> zw,
                                   std::span<const std::pair<std::size_t, std::size_t>> pairs);

/// Neighbouring pairs (n, n+1 mod N) of a ring of N spins.
std::vector<std::pair<std::size_t, std::size_t>> ring_pairs(std::size_t n);

struct WitnessResult {
  WeakValue value;
  double sigma_re = 0.0;
  double sigma_im = 0.0;
  double violation_sigmas = 0.0;  // max(0, -Re/sigma_re)
};

WitnessResult make_witness_result(WeakValue value, double sigma_re, double sigma_im);

}  // namespace pigeon
