#pragma once

// Neutron-interferometer weak measurement of the spin Z weak value.
//
// Coupling model. The spin |pre> enters a symmetric beam splitter. In path P1
// the spin is rotated by +alpha about z, in path P2 by -alpha, with
// R(theta) = exp(-i theta Z / 2); P2 additionally carries the phase-shifter
// phase exp(i chi). The O port projects the path onto (|P1> + |P2>)/sqrt 2
// (the H port onto the difference) and the spin is postselected on <post|.
// The path states conditioned on z = +1 and z = -1 overlap by cos(alpha),
// so the pointer infidelity is sin^2(alpha).
//
// With w = Z_w, c = cos(alpha/2), s = sin(alpha/2) and P0 = |<post|pre>|^2:
//   I_O(chi)    = P0 |c cos(chi/2) - s w sin(chi/2)|^2
//   I_P1 only   = P0/4 |c - i s w|^2   (P2 blocked)
//   I_P2 only   = P0/4 |c + i s w|^2   (P1 blocked)
// Writing D = c^2 + s^2 |w|^2, the two asymmetries
//   R_re = (I_O(3pi/2) - I_O(pi/2)) / (I_O(3pi/2) + I_O(pi/2)) = sin(alpha) Re w / D
//   R_im = (I_P1 - I_P2) / (I_P1 + I_P2)                       = sin(alpha) Im w / D
// are inverted exactly with D = 2c^2 / (1 + sqrt(1 - R_re^2 - R_im^2)).
// The linearized (small alpha) inversion drops D and uses w ~ (R_re + i R_im) / alpha.

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pigeon/measured.hpp"
#include "pigeon/qalg.hpp"

namespace pigeon {

/// IN: coupling on. OUT: coupling off. BlockP1 / BlockP2: a beam block in that path (the
/// other path is postselected). OrthogonalBg: coupling off, spin postselected on the state
/// orthogonal to the preparation, so only detector background remains.
enum class Mode : std::uint8_t { In, Out, BlockP1, BlockP2, OrthogonalBg };
enum class Port : std::uint8_t { O, H };

const char* to_string(Mode m);
/// Accepts "IN", "OUT", "BLOCK_P1", "BLOCK_P2", "ORTHOGONAL_BG". Throws DataError otherwise.
Mode mode_from_string(std::string_view s);

struct CouplingConfig {
  double alpha_deg = 15.0;
  std::vector<double> chi_grid;  // phase-shifter settings, radians
  double mean_counts = 1.0;      // expected neutrons per setting at unit detection probability
  double background_rate = 0.0;  // expected background counts per setting
  std::uint64_t seed = 0;
  Mode mode = Mode::In;
  double phase_offset = 0.0;  // interferometer phase common to every mode, radians

  /// Throws DomainError unless alpha in (0, 90], mean_counts > 0, background_rate >= 0 and
  /// the grid is nonempty.
  void validate() const;
};

/// n equally spaced settings on [0, 2 pi).
std::vector<double> uniform_chi_grid(std::size_t n);

/// Path state (P1, P2 amplitudes) conditioned on spin eigenvalue z = +1 or -1.
std::array<Amplitude, 2> pointer_state(double alpha_deg, int z);
/// |<pointer(+1)|pointer(-1)>|^2.
double pointer_overlap_squared(double alpha_deg);
/// 1 - pointer_overlap_squared, equal to sin^2(alpha).
double pointer_infidelity(double alpha_deg);

/// Single-spin pre/postselection with Z weak value z: pre = |+X>, post proportional to
/// (1 + conj z, 1 - conj z).
std::pair<SpinState, SpinState> states_for_weak_value(WeakValue z);

/// Detection probability per incident neutron.
double ideal_intensity(double alpha_deg, double chi, Mode mode, const SpinState& pre, const SpinState& post,
                       Port port = Port::O, double phase_offset = 0.0);

struct Interferogram {
  Mode mode = Mode::In;
  double alpha_deg = 15.0;
  std::uint64_t seed = 0;
  std::vector<double> chi;
  std::vector<std::int64_t> counts;
};

/// {"mode": str, "alpha_deg": num, "seed": int, "chi": [num], "counts": [int]}
nlohmann::json to_json(const Interferogram& g);
/// Throws DataError on schema violations or negative counts.
Interferogram interferogram_from_json(const nlohmann::json& j);

/// Poisson counts with mean mean_counts * ideal_intensity + background_rate per setting.
/// Deterministic for a fixed seed. OUT and ORTHOGONAL_BG ignore alpha for the spin coupling
/// but record it in the metadata.
Interferogram simulate(const CouplingConfig& config, const SpinState& pre, const SpinState& post);

/// Points to fit with their variances.
struct FringeData {
  std::vector<double> chi;
  std::vector<double> values;
  std::vector<double> variances;
};

/// Raw counts with Poisson variances max(count, 1).
FringeData poisson_fringe(const Interferogram& g);

/// offset + amplitude * sin(chi + phase), amplitude >= 0, phase in [0, 2 pi).
/// covariance is over (offset, amplitude, phase).
struct SineFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
  std::array<std::array<double, 3>, 3> covariance{};
  double rss = 0.0;  // weighted residual sum of squares
  int iterations = 0;
  bool phase_identifiable = true;

  double operator()(double chi) const;
  double sigma(std::size_t k) const;
};

/// Weighted least-squares sine fit by damped Gauss-Newton from 8 starting phases.
/// Requires >= 6 points covering a full period (DomainError). Throws FitError carrying the
/// residual trace when no start converges within 200 iterations.
SineFit fit_sine(const FringeData& data);
SineFit fit_sine(const Interferogram& g);

struct BackgroundEstimate {
  double mean = 0.0;      // counts per setting
  double variance = 0.0;  // variance of `mean`
};

/// Mean count per setting of an ORTHOGONAL_BG record.
BackgroundEstimate estimate_background(const Interferogram& bg);

/// counts - bg.mean pointwise, clamped at zero; variances from the raw counts.
FringeData subtract_background(const Interferogram& g, const BackgroundEstimate& bg);

/// Fit of a background-subtracted fringe. The background uncertainty is common to every point
/// and so only enters the offset variance.
SineFit fit_fringe(const Interferogram& g, const BackgroundEstimate& bg);

struct BlockedCounts {
  std::int64_t counts = 0;
  std::size_t exposures = 0;
};

/// Total counts over all settings of a blocked-path record.
BlockedCounts blocked_counts(const Interferogram& g);

enum class Inversion : std::uint8_t { Exact, Linearized };

/// Inverts the four intensities of the coupling model into Z_w. Throws ExtractionError when a
/// pair of intensities sums to zero or below.
WeakValue invert_intensities(double i_y_plus, double i_y_minus, double i_only_p1, double i_only_p2,
                             double alpha_deg, Inversion inversion = Inversion::Exact);

/// Z_w from the IN fit evaluated at pi/2 and 3pi/2 past the OUT maximum, and from the two
/// blocked intensities. Sigmas by first-order propagation of the fit covariances and the
/// Poisson and background variances.
MeasuredZ extract_weak_value(const SineFit& in, const SineFit& out, const BlockedCounts& p1_blocked,
                             const BlockedCounts& p2_blocked, const BackgroundEstimate& block_background,
                             double alpha_deg, Inversion inversion = Inversion::Exact);

/// Exposure plan for one Z_w determination: two fringes, one background fringe, two blocked
/// intensities and their background.
struct MeasurementPlan {
  double alpha_deg = 15.0;
  std::size_t chi_points = 16;
  double fringe_counts = 4700.0;  // mean_counts per fringe setting
  double block_counts = 7400.0;   // mean_counts per blocked exposure
  std::size_t block_exposures = 1;
  double background_rate = 40.0;
  double phase_offset = 0.0;

  /// Statistics comparable to the published single-set uncertainties.
  static MeasurementPlan paper_like() { return {}; }
};

struct MeasurementRecord {
  Interferogram in;
  Interferogram out;
  Interferogram background;
  Interferogram block_p1;
  Interferogram block_p2;
  Interferogram block_background;
};

/// {"in": ..., "out": ..., "background": ..., "block_p1": ..., "block_p2": ..., "block_background": ...}
nlohmann::json to_json(const MeasurementRecord& r);
/// Throws DataError on a missing or malformed member.
MeasurementRecord measurement_record_from_json(const nlohmann::json& j);

/// Simulates every record of a plan. Sub-records get seeds derived from `seed`.
MeasurementRecord simulate_measurement(const MeasurementPlan& plan, const SpinState& pre, const SpinState& post,
                                       std::uint64_t seed);

/// Background subtraction, fits and extraction for a full record.
MeasuredZ analyze_measurement(const MeasurementRecord& record, Inversion inversion = Inversion::Exact);

}  // namespace pigeon
