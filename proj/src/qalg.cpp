#include "pigeon/qalg.hpp"

#include <cmath>

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "pigeon/errors.hpp"

namespace pigeon {

namespace {

constexpr double kNormTolerance = 1e-12;

// Product of two single-spin Paulis as (phase exponent, result).
// X*Y = iZ, Y*Z = iX, Z*X = iY; the reversed orders carry -i.
constexpr std::pair<int, Pauli> site_product(Pauli a, Pauli b) {
  if (a == Pauli::I) return {0, b};
  if (b == Pauli::I) return {0, a};
  if (a == b) return {0, Pauli::I};
  const int ia = static_cast<int>(a);
  const int ib = static_cast<int>(b);
  const auto c = static_cast<Pauli>(6 - ia - ib);
  const bool cyclic = (ib - ia + 3) % 3 == 1;
  return {cyclic ? 1 : 3, c};
}

}  // namespace

char to_char(Pauli p) {
  constexpr std::array<char, 4> letters{'I', 'X', 'Y', 'Z'};
  return letters[static_cast<std::size_t>(p)];
}

Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': return Pauli::I;
    case 'X': return Pauli::X;
    case 'Y': return Pauli::Y;
    case 'Z': return Pauli::Z;
    default: throw StructuralError(fmt::format("invalid Pauli letter '{}'", c));
  }
}

Amplitude Phase::value() const {
  constexpr std::array<Amplitude, 4> roots{Amplitude{1, 0}, Amplitude{0, 1}, Amplitude{-1, 0},
                                           Amplitude{0, -1}};
  return roots[k_];
}

PauliString::PauliString(Phase phase, std::vector<Pauli> ops) : phase_(phase), ops_(std::move(ops)) {}

PauliString PauliString::identity(std::size_t n) {
  return PauliString(Phase::one(), std::vector<Pauli>(n, Pauli::I));
}

PauliString PauliString::on_sites(std::size_t n, Pauli p, std::span<const std::size_t> sites) {
  std::vector<Pauli> ops(n, Pauli::I);
  for (auto s : sites) {
    if (s >= n) throw StructuralError(fmt::format("site {} out of range for {} spins", s, n));
    ops[s] = p;
  }
  return PauliString(Phase::one(), std::move(ops));
}

PauliString PauliString::parse(std::string_view text) {
  int exponent = 0;
  std::size_t pos = 0;
  if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    exponent = text[pos] == '-' ? 2 : 0;
    ++pos;
  }
  if (pos < text.size() && text[pos] == 'i') {
    exponent += 1;
    ++pos;
  }
  if (pos == text.size()) throw StructuralError(fmt::format("empty Pauli string '{}'", text));
  std::vector<Pauli> ops;
  ops.reserve(text.size() - pos);
  for (; pos < text.size(); ++pos) ops.push_back(pauli_from_char(text[pos]));
  return PauliString(Phase(exponent), std::move(ops));
}

bool PauliString::is_identity_up_to_phase() const {
  for (auto p : ops_)
    if (p != Pauli::I) return false;
  return true;
}

std::string PauliString::to_string() const {
  constexpr std::array<std::string_view, 4> prefixes{"+", "+i", "-", "-i"};
  std::string out(prefixes[static_cast<std::size_t>(phase_.exponent())]);
  for (auto p : ops_) out.push_back(to_char(p));
  return out;
}

PauliString pauli_mul(const PauliString& a, const PauliString& b) {
  if (a.size() != b.size())
    throw StructuralError(
        fmt::format("pauli_mul: length mismatch ({} vs {})", a.size(), b.size()));
  int exponent = a.phase().exponent() + b.phase().exponent();
  std::vector<Pauli> ops(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const auto [k, p] = site_product(a.op(n), b.op(n));
    exponent += k;
    ops[n] = p;
  }
  return PauliString(Phase(exponent), std::move(ops));
}

bool commutes(const PauliString& a, const PauliString& b) {
  if (a.size() != b.size())
    throw StructuralError(
        fmt::format("commutes: length mismatch ({} vs {})", a.size(), b.size()));
  std::size_t anti = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const auto pa = a.op(n);
    const auto pb = b.op(n);
    if (pa != Pauli::I && pb != Pauli::I && pa != pb) ++anti;
  }
  return anti % 2 == 0;
}

Eigen::Matrix2cd pauli_matrix(Pauli p) {
  const Amplitude i{0, 1};
  Eigen::Matrix2cd m;
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, -i, i, 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

DenseOperator to_dense(const PauliString& s, int n) {
  if (n > kDenseCap)
    throw CapacityError(fmt::format("dense expansion capped at {} spins (requested {})", kDenseCap, n));
  if (n < 1 || static_cast<std::size_t>(n) != s.size())
    throw StructuralError(fmt::format("to_dense: string of length {} for N = {}", s.size(), n));
  DenseOperator out = DenseOperator::Identity(1, 1) * s.phase().value();
  for (auto p : s.ops()) {
    DenseOperator next = Eigen::kroneckerProduct(out, pauli_matrix(p)).eval();
    out = std::move(next);
  }
  return out;
}

SpinState::SpinState(Amplitude a0, Amplitude a1) : amp_{a0, a1} {
  const double norm = std::norm(a0) + std::norm(a1);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance)
    throw DomainError(fmt::format("spin state not normalized (|a|^2 = {})", norm));
}

SpinState SpinState::normalized(Amplitude a0, Amplitude a1) {
  const double len = std::sqrt(std::norm(a0) + std::norm(a1));
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("cannot normalize a zero spin vector");
  return SpinState(a0 / len, a1 / len);
}

SpinState SpinState::plus_z() { return SpinState(1.0, 0.0); }
SpinState SpinState::minus_z() { return SpinState(0.0, 1.0); }
SpinState SpinState::plus_x() { return normalized(1.0, 1.0); }
SpinState SpinState::minus_x() { return normalized(1.0, -1.0); }
SpinState SpinState::plus_y() { return normalized(1.0, Amplitude{0, 1}); }
SpinState SpinState::minus_y() { return normalized(1.0, Amplitude{0, -1}); }

SpinState SpinState::orthogonal() const {
  return SpinState::normalized(-std::conj(amp_[1]), std::conj(amp_[0]));
}

Amplitude inner(const SpinState& phi, const SpinState& psi) {
  return std::conj(phi[0]) * psi[0] + std::conj(phi[1]) * psi[1];
}

Amplitude matrix_element(const SpinState& phi, Pauli p, const SpinState& psi) {
  const Amplitude i{0, 1};
  switch (p) {
    case Pauli::I: return inner(phi, psi);
    case Pauli::X: return std::conj(phi[0]) * psi[1] + std::conj(phi[1]) * psi[0];
    case Pauli::Y: return std::conj(phi[0]) * (-i * psi[1]) + std::conj(phi[1]) * (i * psi[0]);
    case Pauli::Z: return std::conj(phi[0]) * psi[0] - std::conj(phi[1]) * psi[1];
  }
  return {};
}

ProductState::ProductState(std::vector<SpinState> spins) : spins_(std::move(spins)) {
  if (spins_.empty()) throw StructuralError("product state needs at least one spin");
}

ProductState ProductState::uniform(const SpinState& s, std::size_t n) {
  return ProductState(std::vector<SpinState>(n, s));
}

Amplitude product_inner(const ProductState& phi, const ProductState& psi) {
  if (phi.size() != psi.size())
    throw StructuralError(
        fmt::format("product_inner: length mismatch ({} vs {})", phi.size(), psi.size()));
  Amplitude acc{1.0, 0.0};
  for (std::size_t n = 0; n < phi.size(); ++n) acc *= inner(phi[n], psi[n]);
  return acc;
}

DenseState to_dense(const ProductState& s) {
  if (s.size() > static_cast<std::size_t>(kDenseCap))
    throw CapacityError(fmt::format("dense expansion capped at {} spins (requested {})", kDenseCap, s.size()));
  DenseState out = DenseState::Ones(1);
  for (const auto& spin : s.spins()) {
    Eigen::Vector2cd v(spin[0], spin[1]);
    DenseState next = Eigen::kroneckerProduct(out, v).eval();
    out = std::move(next);
  }
  return out;
}

}  // namespace pigeon
