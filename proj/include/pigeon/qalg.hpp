#pragma once

// Small-dimension complex linear algebra and phase-tracked Pauli strings.
//
// Conventions: computational (Z) basis, |0> = |+Z>. Spin 0 is the leftmost
// (most significant) tensor factor in every dense expansion.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pigeon {

using Amplitude = std::complex<double>;
using DenseOperator = Eigen::MatrixXcd;
using DenseState = Eigen::VectorXcd;

/// Largest spin count for which dense 2^N x 2^N operators are built.
inline constexpr int kDenseCap = 12;

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

char to_char(Pauli p);
Pauli pauli_from_char(char c);

/// A fourth root of unity stored as the exponent k in i^k.
class Phase {
 public:
  constexpr Phase() = default;
  constexpr explicit Phase(int exponent) : k_(static_cast<std::uint8_t>(((exponent % 4) + 4) % 4)) {}

  static constexpr Phase one() { return Phase(0); }
  static constexpr Phase i() { return Phase(1); }
  static constexpr Phase minus_one() { return Phase(2); }
  static constexpr Phase minus_i() { return Phase(3); }

  constexpr int exponent() const { return k_; }
  Amplitude value() const;
  /// +1 or -1 for real phases, 0 for +-i.
  constexpr int real_sign() const { return k_ == 0 ? 1 : (k_ == 2 ? -1 : 0); }

  constexpr Phase operator*(Phase o) const { return Phase(k_ + o.k_); }
  constexpr bool operator==(const Phase&) const = default;

 private:
  std::uint8_t k_ = 0;
};

/// phase * (ops[0] (x) ops[1] (x) ... (x) ops[N-1]).
class PauliString {
 public:
  PauliString() = default;
  PauliString(Phase phase, std::vector<Pauli> ops);

  static PauliString identity(std::size_t n);
  /// Single non-identity factor `p` on each listed spin.
  static PauliString on_sites(std::size_t n, Pauli p, std::span<const std::size_t> sites);
  /// Parses "+ZZI", "-iXY", "ZZ" (sign optional, defaults to +).
  static PauliString parse(std::string_view text);

  std::size_t size() const { return ops_.size(); }
  Phase phase() const { return phase_; }
  const std::vector<Pauli>& ops() const { return ops_; }
  Pauli op(std::size_t n) const { return ops_.at(n); }

  /// True when every factor is I (the phase may be anything).
  bool is_identity_up_to_phase() const;
  std::string to_string() const;

  bool operator==(const PauliString&) const = default;

 private:
  Phase phase_;
  std::vector<Pauli> ops_;
};

/// Exact operator product a*b. Throws StructuralError on length mismatch.
PauliString pauli_mul(const PauliString& a, const PauliString& b);

/// True iff a and b commute (even number of anticommuting tensor slots).
bool commutes(const PauliString& a, const PauliString& b);

/// 2x2 matrix of a single-spin Pauli operator.
Eigen::Matrix2cd pauli_matrix(Pauli p);

/// Kronecker expansion of `s` for N = s.size(). Throws CapacityError when N > kDenseCap.
DenseOperator to_dense(const PauliString& s, int n);

/// Normalized two-component spin state in the Z basis.
class SpinState {
 public:
  /// Throws DomainError unless |a0|^2 + |a1|^2 = 1 within 1e-12.
  SpinState(Amplitude a0, Amplitude a1);

  static SpinState normalized(Amplitude a0, Amplitude a1);
  static SpinState plus_z();
  static SpinState minus_z();
  static SpinState plus_x();
  static SpinState minus_x();
  static SpinState plus_y();
  static SpinState minus_y();

  Amplitude operator[](std::size_t k) const { return amp_[k]; }
  const std::array<Amplitude, 2>& amplitudes() const { return amp_; }

  /// The state orthogonal to this one (unique up to a phase).
  SpinState orthogonal() const;

 private:
  std::array<Amplitude, 2> amp_;
};

/// <phi|psi> for single spins.
Amplitude inner(const SpinState& phi, const SpinState& psi);
/// <phi|P|psi> for a single-spin Pauli P.
Amplitude matrix_element(const SpinState& phi, Pauli p, const SpinState& psi);

/// Separable N-spin state.
class ProductState {
 public:
  explicit ProductState(std::vector<SpinState> spins);
  static ProductState uniform(const SpinState& s, std::size_t n);

  std::size_t size() const { return spins_.size(); }
  const SpinState& operator[](std::size_t n) const { return spins_[n]; }
  const std::vector<SpinState>& spins() const { return spins_; }

 private:
  std::vector<SpinState> spins_;
};

/// Factorized <phi|psi>. Throws StructuralError on length mismatch.
Amplitude product_inner(const ProductState& phi, const ProductState& psi);

/// Full 2^N amplitude vector. Throws CapacityError when N > kDenseCap.
DenseState to_dense(const ProductState& s);

}  // namespace pigeon
