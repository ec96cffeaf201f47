#pragma once

// N-spin Wheel BKS sets: three rings (ZZ, XX, YY on neighbouring pairs) and N
// spokes {ZZ, XX, YY}, one per pair. Spins are labelled 0..N-1 and pair k
// couples spins k and (k+1) mod N.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>
#include <json.hpp>

#include "pigeon/qalg.hpp"

namespace pigeon {

enum class PairKind : std::uint8_t { ZZ = 0, XX = 1, YY = 2 };

inline constexpr std::array<PairKind, 3> kPairKinds{PairKind::ZZ, PairKind::XX, PairKind::YY};

const char* to_string(PairKind k);

/// One measurement context and the sign quantum mechanics predicts for the product of its
/// observables.
struct Context {
  std::string label;  // "ring ZZ", "spoke 3", ...
  std::vector<std::size_t> observables;  // ids into WheelSet::observables()
  int required_sign = 1;
};

class WheelSet {
 public:
  int n() const { return n_; }

  /// All 3N observables; id = kind * N + pair.
  const std::vector<PauliString>& observables() const { return observables_; }
  const PauliString& observable(PairKind kind, int pair) const;
  std::size_t observable_id(PairKind kind, int pair) const;

  /// Rings first (ZZ, XX, YY), then spokes 0..N-1.
  const std::vector<Context>& contexts() const { return contexts_; }
  std::size_t ring_context(PairKind kind) const { return static_cast<std::size_t>(kind); }
  std::size_t spoke_context(int pair) const { return 3 + static_cast<std::size_t>(pair); }

  std::vector<PauliString> ring(PairKind kind) const;
  std::vector<PauliString> spoke(int pair) const;

  /// Copy with the required sign of one context negated.
  WheelSet with_flipped_sign(std::size_t context) const;

 private:
  friend WheelSet build_wheel(int n);
  friend WheelSet wheel_from_json(const nlohmann::json& j);

  int n_ = 0;
  std::vector<PauliString> observables_;
  std::vector<Context> contexts_;
};

/// Throws DomainError unless n is odd and >= 3.
WheelSet build_wheel(int n);

/// {"n": int, "rings": [[string]], "spokes": [[string]]}, observables as e.g. "+ZZIII".
nlohmann::json to_json(const WheelSet& w);
/// Inverse of to_json; throws DataError when the document is not a Wheel of the stated size.
WheelSet wheel_from_json(const nlohmann::json& j);

struct ContextCheck {
  std::string label;
  PauliString product;
  int required_sign = 1;
  bool commuting = false;  // observables pairwise commute
  bool ok = false;         // product == required_sign * identity and commuting
};

/// Symbolic product of each context's observables.
std::vector<ContextCheck> verify_context_products(const WheelSet& w);

/// Structural scan: every observable lies in exactly one ring and one spoke.
bool has_ring_spoke_incidence(const WheelSet& w);

/// Context/observable incidence over GF(2): row r, column o is 1 when observable o lies in
/// context r; rhs is 1 for contexts whose product must be -1.
struct Gf2System {
  std::vector<boost::dynamic_bitset<std::uint64_t>> rows;
  boost::dynamic_bitset<std::uint64_t> rhs;
  std::size_t variables = 0;
};

Gf2System build_gf2_system(const WheelSet& w);

struct ExhaustiveResult {
  bool no_assignment = false;  // true: no +-1 assignment satisfies every context
  std::uint64_t candidates = 0;
  std::uint64_t satisfying = 0;
  std::size_t max_satisfied_contexts = 0;
  std::size_t contexts = 0;
};

/// Enumerates all 2^(3N) assignments as integers. Throws CapacityError for N > 5.
ExhaustiveResult prove_no_nchv_exhaustive(const WheelSet& w, int threads = 1);

struct Gf2Result {
  bool inconsistent = false;
  /// Original context indices whose equations sum to 0 = 1 (when inconsistent).
  std::vector<std::size_t> certificate;
  /// A satisfying assignment, bit 1 meaning eigenvalue -1 (when consistent).
  std::vector<int> solution;
  std::size_t rank = 0;
  std::size_t equations = 0;
  std::size_t variables = 0;
};

/// Gaussian elimination with row-provenance tracking.
Gf2Result solve_gf2(const Gf2System& system);
Gf2Result prove_no_nchv_gf2(const WheelSet& w);

/// Values fixed by the ABL rule for a given pre/postselection: +1 or -1 where one outcome
/// is certain, empty otherwise.
struct BoundaryAssignment {
  std::vector<std::optional<int>> values;  // per observable id
  std::vector<std::size_t> contradictory_contexts;
};

/// Fixes each observable whose two-outcome ABL distribution is certain. The default boundary
/// |+X>^N -> <+Y|^N yields XX = YY = +1 and ZZ = -1, leaving only the ZZ ring contradictory.
BoundaryAssignment apply_boundary_conditions(const WheelSet& w);
BoundaryAssignment apply_boundary_conditions(const WheelSet& w, const ProductState& pre,
                                             const ProductState& post);

}  // namespace pigeon
