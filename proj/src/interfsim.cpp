#include "pigeon/interfsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "pigeon/errors.hpp"

namespace pigeon {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxIterations = 200;
constexpr double kRelativeTolerance = 1e-12;
constexpr int kStartPhases = 8;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

double wrap_phase(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

double weighted_rss(const FringeData& d, const Vec3& p) {
  double rss = 0.0;
  for (std::size_t i = 0; i < d.chi.size(); ++i) {
    const double r = d.values[i] - (p(0) + p(1) * std::sin(d.chi[i] + p(2)));
    rss += r * r / d.variances[i];
  }
  return rss;
}

Mat3 normal_matrix(const FringeData& d, const Vec3& p, Vec3* gradient) {
  Mat3 jtj = Mat3::Zero();
  Vec3 jtr = Vec3::Zero();
  for (std::size_t i = 0; i < d.chi.size(); ++i) {
    const double w = 1.0 / d.variances[i];
    const double sn = std::sin(d.chi[i] + p(2));
    const double cs = std::cos(d.chi[i] + p(2));
    const Vec3 row(1.0, sn, p(1) * cs);
    jtj += w * row * row.transpose();
    jtr += w * row * (d.values[i] - (p(0) + p(1) * sn));
  }
  if (gradient) *gradient = jtr;
  return jtj;
}

struct Attempt {
  Vec3 params;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

Attempt gauss_newton(const FringeData& d, Vec3 p) {
  Attempt a;
  double rss = weighted_rss(d, p);
  a.trace.push_back(rss);
  for (int it = 1; it <= kMaxIterations; ++it) {
    Vec3 rhs;
    const Mat3 jtj = normal_matrix(d, p, &rhs);
    const Eigen::LDLT<Mat3> ldlt(jtj);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Vec3 step = ldlt.solve(rhs);
    if (!step.allFinite()) break;

    double lambda = 1.0;
    bool improved = false;
    Vec3 trial;
    double trial_rss = rss;
    for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
      trial = p + lambda * step;
      trial_rss = weighted_rss(d, trial);
      if (trial_rss <= rss) {
        improved = true;
        break;
      }
    }
    double rel = 0.0;
    for (int k = 0; k < 3; ++k) rel = std::max(rel, std::abs(step(k)) / std::max(std::abs(p(k)), 1.0));
    a.iterations = it;
    if (!improved) {
      // Rounding noise at the minimum: the full step is already negligible.
      a.converged = rel <= 1e-9;
      break;
    }
    p = trial;
    rss = trial_rss;
    a.trace.push_back(rss);
    if (lambda * rel <= kRelativeTolerance) {
      a.converged = true;
      break;
    }
  }
  a.params = p;
  a.rss = rss;
  return a;
}

// Linear model offset + p sin(chi) + q cos(chi); used for the degenerate (flat) case.
Mat3 linear_covariance(const FringeData& d) {
  Mat3 xtx = Mat3::Zero();
  for (std::size_t i = 0; i < d.chi.size(); ++i) {
    const Vec3 row(1.0, std::sin(d.chi[i]), std::cos(d.chi[i]));
    xtx += row * row.transpose() / d.variances[i];
  }
  return xtx.inverse();
}

void check_fit_input(const FringeData& d) {
  const auto n = d.chi.size();
  if (d.values.size() != n || d.variances.size() != n)
    throw StructuralError("fit_sine: chi, values and variances differ in length");
  if (n < 6) throw DomainError(fmt::format("fit_sine: need at least 6 points (got {})", n));
  const auto [lo, hi] = std::minmax_element(d.chi.begin(), d.chi.end());
  const double span = *hi - *lo;
  if (span + span / static_cast<double>(n - 1) < kTwoPi - 1e-9)
    throw DomainError("fit_sine: settings do not cover one period");
  for (std::size_t i = 0; i < n; ++i)
    if (!(d.variances[i] > 0.0) || !std::isfinite(d.values[i]))
      throw DomainError("fit_sine: variances must be positive and values finite");
}

double sum_of(const std::vector<std::int64_t>& v) {
  double s = 0.0;
  for (auto c : v) s += static_cast<double>(c);
  return s;
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::In: return "IN";
    case Mode::Out: return "OUT";
    case Mode::BlockP1: return "BLOCK_P1";
    case Mode::BlockP2: return "BLOCK_P2";
    case Mode::OrthogonalBg: return "ORTHOGONAL_BG";
  }
  return "?";
}

Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::In, Mode::Out, Mode::BlockP1, Mode::BlockP2, Mode::OrthogonalBg})
    if (s == to_string(m)) return m;
  throw DataError(fmt::format("unknown interferometer mode '{}'", s));
}

void CouplingConfig::validate() const {
  if (!(alpha_deg > 0.0 && alpha_deg <= 90.0))
    throw DomainError(fmt::format("alpha must lie in (0, 90] degrees (got {})", alpha_deg));
  if (!(mean_counts > 0.0)) throw DomainError("mean_counts must be positive");
  if (!(background_rate >= 0.0)) throw DomainError("background_rate must be nonnegative");
  if (chi_grid.empty()) throw DomainError("chi grid is empty");
}

std::vector<double> uniform_chi_grid(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
  return out;
}

std::array<Amplitude, 2> pointer_state(double alpha_deg, int z) {
  const double half = 0.5 * radians(alpha_deg) * (z > 0 ? 1.0 : -1.0);
  const double amp = std::numbers::sqrt2 / 2.0;
  return {std::polar(amp, -half), std::polar(amp, half)};
}

double pointer_overlap_squared(double alpha_deg) {
  const auto up = pointer_state(alpha_deg, +1);
  const auto down = pointer_state(alpha_deg, -1);
  return std::norm(std::conj(up[0]) * down[0] + std::conj(up[1]) * down[1]);
}

double pointer_infidelity(double alpha_deg) { return 1.0 - pointer_overlap_squared(alpha_deg); }

std::pair<SpinState, SpinState> states_for_weak_value(WeakValue z) {
  return {SpinState::plus_x(), SpinState::normalized(1.0 + std::conj(z), 1.0 - std::conj(z))};
}

double ideal_intensity(double alpha_deg, double chi, Mode mode, const SpinState& pre, const SpinState& post,
                       Port port, double phase_offset) {
  const bool coupled = mode == Mode::In || mode == Mode::BlockP1 || mode == Mode::BlockP2;
  const double half = coupled ? 0.5 * radians(alpha_deg) : 0.0;
  const SpinState target = mode == Mode::OrthogonalBg ? pre.orthogonal() : post;

  // <target| R(+-alpha) |pre> with R(theta) = diag(exp(-i theta/2), exp(i theta/2)).
  const Amplitude in_p1 = std::conj(target[0]) * std::polar(1.0, -half) * pre[0] +
                          std::conj(target[1]) * std::polar(1.0, half) * pre[1];
  const Amplitude in_p2 = (std::conj(target[0]) * std::polar(1.0, half) * pre[0] +
                           std::conj(target[1]) * std::polar(1.0, -half) * pre[1]) *
                          std::polar(1.0, chi + phase_offset);
  const double p1_open = mode == Mode::BlockP1 ? 0.0 : 1.0;
  const double p2_open = mode == Mode::BlockP2 ? 0.0 : 1.0;
  const double sign = port == Port::O ? 1.0 : -1.0;
  const Amplitude amp = 0.5 * (p1_open * in_p1 + sign * p2_open * in_p2);
  return std::norm(amp);
}

nlohmann::json to_json(const Interferogram& g) {
  return {{"mode", to_string(g.mode)}, {"alpha_deg", g.alpha_deg}, {"seed", g.seed}, {"chi", g.chi},
          {"counts", g.counts}};
}

Interferogram interferogram_from_json(const nlohmann::json& j) {
  Interferogram g;
  try {
    g.mode = mode_from_string(j.at("mode").get<std::string>());
    g.alpha_deg = j.at("alpha_deg").get<double>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.chi = j.at("chi").get<std::vector<double>>();
    g.counts = j.at("counts").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("interferogram JSON: {}", e.what()));
  }
  if (g.chi.size() != g.counts.size()) throw DataError("interferogram JSON: chi and counts differ in length");
  for (auto c : g.counts)
    if (c < 0) throw DataError("interferogram JSON: negative count");
  return g;
}

Interferogram simulate(const CouplingConfig& config, const SpinState& pre, const SpinState& post) {
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32)};
  std::mt19937_64 rng(seq);
  Interferogram g{config.mode, config.alpha_deg, config.seed, config.chi_grid, {}};
  g.counts.reserve(config.chi_grid.size());
  for (double chi : config.chi_grid) {
    const double mean =
        config.mean_counts * ideal_intensity(config.alpha_deg, chi, config.mode, pre, post, Port::O,
                                             config.phase_offset) +
        config.background_rate;
    if (mean <= 0.0) {
      g.counts.push_back(0);
      continue;
    }
    std::poisson_distribution<std::int64_t> draw(mean);
    g.counts.push_back(draw(rng));
  }
  return g;
}

FringeData poisson_fringe(const Interferogram& g) {
  FringeData d{g.chi, {}, {}};
  for (auto c : g.counts) {
    d.values.push_back(static_cast<double>(c));
    d.variances.push_back(std::max(static_cast<double>(c), 1.0));
  }
  return d;
}

double SineFit::operator()(double chi) const { return offset + amplitude * std::sin(chi + phase); }

double SineFit::sigma(std::size_t k) const { return std::sqrt(covariance.at(k).at(k)); }

SineFit fit_sine(const FringeData& data) {
  check_fit_input(data);
  const auto [lo, hi] = std::minmax_element(data.values.begin(), data.values.end());
  double mean = 0.0;
  for (double v : data.values) mean += v;
  mean /= static_cast<double>(data.values.size());

  SineFit fit;
  if (*hi == *lo) {
    // Flat data: the phase carries no information.
    const Mat3 lin = linear_covariance(data);
    Vec3 p(mean, 0.0, 0.0);
    fit.offset = mean;
    fit.rss = weighted_rss(data, p);
    fit.phase_identifiable = false;
    fit.covariance[0][0] = lin(0, 0);
    fit.covariance[1][1] = 0.5 * (lin(1, 1) + lin(2, 2));
    fit.covariance[2][2] = std::numbers::pi * std::numbers::pi / 3.0;  // uniform on the circle
    return fit;
  }

  const double amplitude0 = 0.5 * (*hi - *lo);
  Attempt best;
  best.rss = std::numeric_limits<double>::infinity();
  Attempt best_failed = best;
  for (int k = 0; k < kStartPhases; ++k) {
    auto a = gauss_newton(data, Vec3(mean, amplitude0, kTwoPi * k / kStartPhases));
    if (a.converged && a.rss < best.rss) best = std::move(a);
    else if (!a.converged && a.rss < best_failed.rss) best_failed = std::move(a);
  }
  if (!best.converged)
    throw FitError(fmt::format("sine fit did not converge in {} iterations", kMaxIterations), best_failed.trace);

  Vec3 p = best.params;
  Mat3 cov = normal_matrix(data, p, nullptr).inverse();
  if (p(1) < 0.0) {
    p(1) = -p(1);
    p(2) += std::numbers::pi;
    const Eigen::DiagonalMatrix<double, 3> flip(1.0, -1.0, 1.0);
    cov = flip * cov * flip;
  }
  fit.offset = p(0);
  fit.amplitude = p(1);
  fit.phase = wrap_phase(p(2));
  fit.rss = best.rss;
  fit.iterations = best.iterations;
  fit.phase_identifiable = cov.allFinite() && fit.amplitude > 1e-12 * std::max(1.0, std::abs(fit.offset));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) fit.covariance[r][c] = 0.5 * (cov(r, c) + cov(c, r));
  return fit;
}

SineFit fit_sine(const Interferogram& g) { return fit_sine(poisson_fringe(g)); }

BackgroundEstimate estimate_background(const Interferogram& bg) {
  if (bg.counts.empty()) throw DataError("background record has no settings");
  const double n = static_cast<double>(bg.counts.size());
  const double total = sum_of(bg.counts);
  return {total / n, std::max(total, 1.0) / (n * n)};
}

FringeData subtract_background(const Interferogram& g, const BackgroundEstimate& bg) {
  FringeData d{g.chi, {}, {}};
  for (auto c : g.counts) {
    const double raw = static_cast<double>(c);
    d.values.push_back(std::max(raw - bg.mean, 0.0));
    d.variances.push_back(std::max(raw, 1.0));
  }
  return d;
}

SineFit fit_fringe(const Interferogram& g, const BackgroundEstimate& bg) {
  SineFit fit = fit_sine(subtract_background(g, bg));
  fit.covariance[0][0] += bg.variance;
  return fit;
}

BlockedCounts blocked_counts(const Interferogram& g) {
  return {static_cast<std::int64_t>(sum_of(g.counts)), g.counts.size()};
}

WeakValue invert_intensities(double i_y_plus, double i_y_minus, double i_only_p1, double i_only_p2,
                             double alpha_deg, Inversion inversion) {
  const double fringe_sum = i_y_plus + i_y_minus;
  const double block_sum = i_only_p1 + i_only_p2;
  if (!(fringe_sum > 0.0) || !(block_sum > 0.0))
    throw ExtractionError("zero total intensity: weak value inversion is singular");
  const double r_re = (i_y_minus - i_y_plus) / fringe_sum;
  const double r_im = (i_only_p1 - i_only_p2) / block_sum;
  const double alpha = radians(alpha_deg);
  if (inversion == Inversion::Linearized) return {r_re / alpha, r_im / alpha};

  const double c = std::cos(0.5 * alpha);
  const double r2 = std::min(r_re * r_re + r_im * r_im, 1.0);
  const double d = 2.0 * c * c / (1.0 + std::sqrt(1.0 - r2));
  const double s = std::sin(alpha);
  return {r_re * d / s, r_im * d / s};
}

MeasuredZ extract_weak_value(const SineFit& in, const SineFit& out, const BlockedCounts& p1_blocked,
                             const BlockedCounts& p2_blocked, const BackgroundEstimate& block_background,
                             double alpha_deg, Inversion inversion) {
  if (!in.phase_identifiable || !out.phase_identifiable)
    throw ExtractionError("fringe phase is not identifiable (flat interferogram)");

  // x = (offset_in, amplitude_in, phase_in, phase_out, I[P1 only], I[P2 only])
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  const auto blocked = [&](const BlockedCounts& b) {
    const double n = static_cast<double>(b.exposures);
    const double raw = static_cast<double>(b.counts);
    return std::pair{std::max(raw - n * block_background.mean, 0.0),
                     std::max(raw, 1.0) + n * n * block_background.variance};
  };
  const auto [only_p1, var_p1] = blocked(p2_blocked);
  const auto [only_p2, var_p2] = blocked(p1_blocked);

  Vec6 x;
  x << in.offset, in.amplitude, in.phase, out.phase, only_p1, only_p2;
  Mat6 cov = Mat6::Zero();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cov(r, c) = in.covariance[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  cov(3, 3) = out.covariance[2][2];
  cov(4, 4) = var_p1;
  cov(5, 5) = var_p2;

  // The OUT fringe peaks at chi_max = pi/2 - phase_out; the y-eigenstate settings are
  // chi_max + pi/2 and chi_max + 3pi/2, where the IN fit reads offset -+ amplitude sin(delta).
  const auto model = [&](const Vec6& v) {
    const double delta = v(2) - v(3);
    const double i_y_plus = v(0) - v(1) * std::sin(delta);
    const double i_y_minus = v(0) + v(1) * std::sin(delta);
    return invert_intensities(i_y_plus, i_y_minus, v(4), v(5), alpha_deg, inversion);
  };

  const WeakValue z = model(x);
  Eigen::Matrix<double, 2, 6> jac;
  for (int k = 0; k < 6; ++k) {
    const double h = 1e-6 * std::max(std::abs(x(k)), 1.0);
    Vec6 up = x;
    Vec6 down = x;
    up(k) += h;
    down(k) -= h;
    const WeakValue d = (model(up) - model(down)) / (2.0 * h);
    jac(0, k) = d.real();
    jac(1, k) = d.imag();
  }
  const Eigen::Matrix2d zcov = jac * cov * jac.transpose();
  return {0, z.real(), std::sqrt(std::max(zcov(0, 0), 0.0)), z.imag(), std::sqrt(std::max(zcov(1, 1), 0.0))};
}

nlohmann::json to_json(const MeasurementRecord& r) {
  return {{"in", to_json(r.in)},           {"out", to_json(r.out)},
          {"background", to_json(r.background)}, {"block_p1", to_json(r.block_p1)},
          {"block_p2", to_json(r.block_p2)}, {"block_background", to_json(r.block_background)}};
}

MeasurementRecord measurement_record_from_json(const nlohmann::json& j) {
  const auto member = [&](const char* key) {
    if (!j.is_object() || !j.contains(key)) throw DataError(fmt::format("measurement record: missing '{}'", key));
    return interferogram_from_json(j.at(key));
  };
  return {member("in"),       member("out"),      member("background"),
          member("block_p1"), member("block_p2"), member("block_background")};
}

MeasurementRecord simulate_measurement(const MeasurementPlan& plan, const SpinState& pre, const SpinState& post,
                                       std::uint64_t seed) {
  const auto grid = uniform_chi_grid(plan.chi_points);
  const std::vector<double> block_grid(plan.block_exposures, 0.0);
  const auto run = [&](Mode mode, const std::vector<double>& chi, double counts, std::uint64_t stream) {
    CouplingConfig cfg;
    cfg.alpha_deg = plan.alpha_deg;
    cfg.chi_grid = chi;
    cfg.mean_counts = counts;
    cfg.background_rate = plan.background_rate;
    cfg.seed = splitmix64(seed ^ splitmix64(stream));
    cfg.mode = mode;
    cfg.phase_offset = plan.phase_offset;
    return simulate(cfg, pre, post);
  };
  return {run(Mode::In, grid, plan.fringe_counts, 1),
          run(Mode::Out, grid, plan.fringe_counts, 2),
          run(Mode::OrthogonalBg, grid, plan.fringe_counts, 3),
          run(Mode::BlockP1, block_grid, plan.block_counts, 4),
          run(Mode::BlockP2, block_grid, plan.block_counts, 5),
          run(Mode::OrthogonalBg, block_grid, plan.block_counts, 6)};
}

MeasuredZ analyze_measurement(const MeasurementRecord& record, Inversion inversion) {
  const auto fringe_bg = estimate_background(record.background);
  const auto block_bg = estimate_background(record.block_background);
  const SineFit in = fit_fringe(record.in, fringe_bg);
  const SineFit out = fit_fringe(record.out, fringe_bg);
  return extract_weak_value(in, out, blocked_counts(record.block_p1), blocked_counts(record.block_p2), block_bg,
                            record.in.alpha_deg, inversion);
}

}  // namespace pigeon
