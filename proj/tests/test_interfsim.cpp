#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "pigeon/errors.hpp"
#include "pigeon/interfsim.hpp"

using namespace pigeon;

namespace {

constexpr double kPi = std::numbers::pi;

double rad(double deg) { return deg * kPi / 180.0; }

// Closed form of the O-port intensity for a given weak value.
double closed_form_o(double alpha_deg, double chi, WeakValue w, double p0) {
  const double c = std::cos(rad(alpha_deg) / 2), s = std::sin(rad(alpha_deg) / 2);
  return p0 * std::norm(c * std::cos(chi / 2) - s * w * std::sin(chi / 2));
}

FringeData sampled(const std::vector<double>& chi, double o, double a, double phi) {
  FringeData d{chi, {}, std::vector<double>(chi.size(), 1.0)};
  for (double x : chi) d.values.push_back(o + a * std::sin(x + phi));
  return d;
}

// Unweighted-equivalent linear least squares on o + p sin + q cos with the data's weights.
std::array<double, 3> linear_fit(const FringeData& d) {
  Eigen::MatrixXd x(d.chi.size(), 3);
  Eigen::VectorXd y(d.chi.size());
  for (std::size_t i = 0; i < d.chi.size(); ++i) {
    const double w = 1.0 / std::sqrt(d.variances[i]);
    x.row(static_cast<Eigen::Index>(i)) << w, w * std::sin(d.chi[i]), w * std::cos(d.chi[i]);
    y(static_cast<Eigen::Index>(i)) = w * d.values[i];
  }
  const Eigen::Vector3d b = x.colPivHouseholderQr().solve(y);
  double phi = std::atan2(b(2), b(1));
  if (phi < 0) phi += 2 * kPi;
  return {b(0), std::hypot(b(1), b(2)), phi};
}

// Noiseless extraction through the fit route: fringes and blocked intensities scaled by 1e12.
MeasuredZ noiseless_extract(WeakValue z, double alpha_deg, Inversion inv, double offset = 0.0) {
  const auto [pre, post] = oracle::states_for_z(z);
  const double scale = 1e12;
  const auto grid = uniform_chi_grid(16);
  FringeData in{grid, {}, std::vector<double>(grid.size(), 1.0)};
  FringeData out = in;
  for (double chi : grid) {
    in.values.push_back(scale * ideal_intensity(alpha_deg, chi, Mode::In, pre, post, Port::O, offset));
    out.values.push_back(scale * ideal_intensity(alpha_deg, chi, Mode::Out, pre, post, Port::O, offset));
  }
  const auto blocked = [&](Mode m) {
    return BlockedCounts{std::llround(scale * ideal_intensity(alpha_deg, 0.0, m, pre, post)), 1};
  };
  return extract_weak_value(fit_sine(in), fit_sine(out), blocked(Mode::BlockP1), blocked(Mode::BlockP2), {0, 0},
                            alpha_deg, inv);
}

}  // namespace

TEST_CASE("pointer infidelity is sin^2 alpha") {
  CHECK(std::abs(pointer_infidelity(15.0) - 0.067) <= 5e-4);
  for (double a : {0.5, 1.0, 15.0, 45.0, 90.0}) {
    CHECK(std::abs(pointer_infidelity(a) - std::pow(std::sin(rad(a)), 2)) < 1e-14);
    CHECK(std::abs(pointer_overlap_squared(a) - std::pow(std::cos(rad(a)), 2)) < 1e-14);
  }
}

TEST_CASE("ideal intensities follow the closed form") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const WeakValue z(g(rng), g(rng));
    const auto [pre, post] = oracle::states_for_z(z);
    const double p0 = std::norm(inner(post, pre));
    const double alpha = 1.0 + 30.0 * std::abs(g(rng));
    const double c = std::cos(rad(alpha) / 2), s = std::sin(rad(alpha) / 2);
    for (double chi : uniform_chi_grid(12))
      CHECK(std::abs(ideal_intensity(alpha, chi, Mode::In, pre, post) - closed_form_o(alpha, chi, z, p0)) < 1e-13);
    const WeakValue i(0, 1);
    CHECK(std::abs(ideal_intensity(alpha, 0.3, Mode::BlockP2, pre, post) - p0 / 4 * std::norm(c - i * s * z)) <
          1e-13);
    CHECK(std::abs(ideal_intensity(alpha, 0.3, Mode::BlockP1, pre, post) - p0 / 4 * std::norm(c + i * s * z)) <
          1e-13);
  }
}

TEST_CASE("flux is conserved over ports and postselection outcomes") {
  const auto pre = SpinState::plus_x();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int t = 0; t < 40; ++t) {
    const auto post = SpinState::normalized(std::polar(1.0, u(rng)), std::polar(0.7, u(rng)));
    const auto post_perp = post.orthogonal();
    const double chi = u(rng);
    double total = 0.0;
    for (auto port : {Port::O, Port::H})
      for (const auto* f : {&post, &post_perp}) total += ideal_intensity(15.0, chi, Mode::In, pre, *f, port);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("orthogonal background mode carries no signal") {
  const auto pre = SpinState::plus_x(), post = SpinState::plus_y();
  for (double chi : uniform_chi_grid(10))
    CHECK(ideal_intensity(15.0, chi, Mode::OrthogonalBg, pre, post) < 1e-30);
  CouplingConfig cfg;
  cfg.chi_grid = uniform_chi_grid(16);
  cfg.mean_counts = 1e6;
  cfg.mode = Mode::OrthogonalBg;
  const auto g = simulate(cfg, pre, post);
  for (auto c : g.counts) CHECK(c == 0);
}

TEST_CASE("simulation is deterministic per seed") {
  CouplingConfig cfg;
  cfg.chi_grid = uniform_chi_grid(16);
  cfg.mean_counts = 1000;
  cfg.background_rate = 5;
  cfg.seed = 42;
  const auto pre = SpinState::plus_x(), post = SpinState::plus_y();
  const auto a = simulate(cfg, pre, post);
  const auto b = simulate(cfg, pre, post);
  CHECK(a.counts == b.counts);
  cfg.seed = 43;
  CHECK(simulate(cfg, pre, post).counts != a.counts);
  const auto ra = simulate_measurement(MeasurementPlan::paper_like(), pre, post, 9);
  const auto rb = simulate_measurement(MeasurementPlan::paper_like(), pre, post, 9);
  CHECK(ra.in.counts == rb.in.counts);
  CHECK(ra.block_p2.counts == rb.block_p2.counts);
  CHECK(ra.in.counts != ra.out.counts);
}

TEST_CASE("counts converge to the ideal intensity") {
  CouplingConfig cfg;
  cfg.chi_grid = uniform_chi_grid(8);
  cfg.mean_counts = 1e8;  // every setting expects more than 1e6 counts
  cfg.seed = 3;
  const auto pre = SpinState::plus_x(), post = SpinState::plus_y();
  const auto g = simulate(cfg, pre, post);
  for (std::size_t k = 0; k < g.chi.size(); ++k) {
    const double expected = 1e8 * ideal_intensity(15.0, g.chi[k], Mode::In, pre, post);
    CHECK(std::abs(static_cast<double>(g.counts[k]) - expected) <= 0.01 * expected);
  }
}

TEST_CASE("config validation") {
  CouplingConfig cfg;
  cfg.chi_grid = uniform_chi_grid(4);
  cfg.alpha_deg = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg.alpha_deg = 15.0;
  cfg.mean_counts = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg.mean_counts = 1.0;
  cfg.chi_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("interferogram JSON round trip") {
  CouplingConfig cfg;
  cfg.chi_grid = uniform_chi_grid(6);
  cfg.mean_counts = 100;
  cfg.mode = Mode::BlockP2;
  cfg.seed = 17;
  const auto g = simulate(cfg, SpinState::plus_x(), SpinState::plus_y());
  const auto back = interferogram_from_json(nlohmann::json::parse(to_json(g).dump()));
  CHECK(back.mode == Mode::BlockP2);
  CHECK(back.seed == 17);
  CHECK(back.chi == g.chi);
  CHECK(back.counts == g.counts);

  auto bad = to_json(g);
  bad["counts"][0] = -1;
  CHECK_THROWS_AS(interferogram_from_json(bad), DataError);
  bad = to_json(g);
  bad["mode"] = "SIDEWAYS";
  CHECK_THROWS_AS(interferogram_from_json(bad), DataError);
  bad.erase("mode");
  CHECK_THROWS_AS(interferogram_from_json(bad), DataError);
}

TEST_CASE("sine fit recovers noiseless parameters") {
  const auto grid = uniform_chi_grid(16);
  for (double phi : {0.0, 0.4, 2.0, 3.5, 6.1}) {
    const auto fit = fit_sine(sampled(grid, 100.0, 37.0, phi));
    CHECK(std::abs(fit.offset - 100.0) < 1e-9);
    CHECK(std::abs(fit.amplitude - 37.0) < 1e-9);
    const double dphi = std::remainder(fit.phase - phi, 2 * kPi);
    CHECK(std::abs(dphi) < 1e-9);
    CHECK(fit.phase >= 0.0);
    CHECK(fit.phase < 2 * kPi);
    CHECK(fit.phase_identifiable);
    CHECK(std::abs(fit(1.234) - (100.0 + 37.0 * std::sin(1.234 + phi))) < 1e-8);
  }
}

TEST_CASE("sine fit matches the linear least-squares oracle on noisy data") {
  std::mt19937_64 rng(8);
  const auto grid = uniform_chi_grid(20);
  for (int t = 0; t < 30; ++t) {
    CouplingConfig cfg;
    cfg.chi_grid = grid;
    cfg.mean_counts = 500;
    cfg.seed = rng();
    const auto d = poisson_fringe(simulate(cfg, SpinState::plus_x(), SpinState::plus_y()));
    const auto fit = fit_sine(d);
    const auto ref = linear_fit(d);
    CHECK(std::abs(fit.offset - ref[0]) < 1e-7);
    CHECK(std::abs(fit.amplitude - ref[1]) < 1e-7);
    CHECK(std::abs(std::remainder(fit.phase - ref[2], 2 * kPi)) < 1e-7);
  }
}

TEST_CASE("flat data leaves the phase unidentifiable") {
  FringeData flat{uniform_chi_grid(8), std::vector<double>(8, 5.0), std::vector<double>(8, 5.0)};
  const auto fit = fit_sine(flat);
  CHECK_FALSE(fit.phase_identifiable);
  CHECK(fit.amplitude == 0.0);
  CHECK(fit.offset == 5.0);
  CHECK(std::abs(fit.covariance[2][2] - kPi * kPi / 3) < 1e-15);
  CHECK_THROWS_AS(extract_weak_value(fit, fit, {10, 1}, {10, 1}, {0, 0}, 15.0), ExtractionError);
}

TEST_CASE("fit preconditions") {
  CHECK_THROWS_AS(fit_sine(sampled(uniform_chi_grid(5), 1, 1, 0)), DomainError);
  std::vector<double> half;
  for (int k = 0; k < 10; ++k) half.push_back(0.3 * k);
  CHECK_THROWS_AS(fit_sine(sampled(half, 1, 1, 0)), DomainError);
  auto d = sampled(uniform_chi_grid(8), 1, 1, 0);
  d.variances[2] = 0.0;
  CHECK_THROWS_AS(fit_sine(d), DomainError);
  d.variances.pop_back();
  CHECK_THROWS_AS(fit_sine(d), StructuralError);
}

TEST_CASE("fit pulls are unit Gaussian") {
  const auto grid = uniform_chi_grid(16);
  CouplingConfig cfg;
  cfg.chi_grid = grid;
  cfg.mean_counts = 5000;
  const auto pre = SpinState::plus_x(), post = SpinState::plus_y();
  // Truth from the closed-form fringe: offset + amplitude sin(chi + phase).
  FringeData expected{grid, {}, std::vector<double>(grid.size(), 1.0)};
  for (double x : grid) expected.values.push_back(5000 * ideal_intensity(15.0, x, Mode::In, pre, post));
  const auto truth = linear_fit(expected);
  double sum_abs = 0.0;
  const int runs = 500;
  for (int s = 0; s < runs; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto fit = fit_sine(simulate(cfg, pre, post));
    sum_abs += std::abs((fit.amplitude - truth[1]) / fit.sigma(1));
  }
  const double mean_abs = sum_abs / runs;
  CHECK(mean_abs >= 0.7);
  CHECK(mean_abs <= 0.9);
}

TEST_CASE("exact inversion round trip at 15 degrees") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<WeakValue> zs{{0, 1}, {0.5, -0.3}, {-1.2, 0.8}};
  for (int t = 0; t < 20; ++t) zs.emplace_back(g(rng), g(rng));
  for (auto z : zs) {
    const auto m = noiseless_extract(z, 15.0, Inversion::Exact);
    CHECK(std::abs(m.value() - z) <= 1e-6);
  }
  const auto shifted = noiseless_extract({0, 1}, 15.0, Inversion::Exact, 1.1);
  CHECK(std::abs(shifted.value() - WeakValue(0, 1)) <= 1e-6);
}

TEST_CASE("invert_intensities on exact intensities") {
  const auto [pre, post] = oracle::states_for_z({0.3, 0.9});
  const auto at = [&](double chi, Mode m) { return ideal_intensity(40.0, chi, m, pre, post); };
  const auto z = invert_intensities(at(kPi / 2, Mode::In), at(3 * kPi / 2, Mode::In), at(0, Mode::BlockP2),
                                    at(0, Mode::BlockP1), 40.0);
  CHECK(std::abs(z - WeakValue(0.3, 0.9)) < 1e-12);
  CHECK_THROWS_AS(invert_intensities(0, 0, 1, 1, 15.0), ExtractionError);
  CHECK_THROWS_AS(invert_intensities(1, 1, 0, 0, 15.0), ExtractionError);
}

TEST_CASE("linearized inversion is accurate at small coupling") {
  const auto m = noiseless_extract({0, 1}, 1.0, Inversion::Linearized);
  CHECK(std::abs(m.value() - WeakValue(0, 1)) <= 1e-3);
  const auto biased = noiseless_extract({0, 1}, 30.0, Inversion::Linearized);
  CHECK(std::abs(biased.value() - WeakValue(0, 1)) > 1e-2);
}

TEST_CASE("default plan sigmas are near 0.05 (Re) and 0.10 (Im)") {
  const auto m =
      analyze_measurement(simulate_measurement(MeasurementPlan::paper_like(), SpinState::plus_x(),
                                               SpinState::plus_y(), 1));
  CHECK(m.re_sigma > 0.05 / 2);
  CHECK(m.re_sigma < 0.05 * 2);
  CHECK(m.im_sigma > 0.10 / 2);
  CHECK(m.im_sigma < 0.10 * 2);
}

TEST_CASE("500 seeded runs are consistent with the reported sigmas") {
  const auto plan = MeasurementPlan::paper_like();
  const auto pre = SpinState::plus_x(), post = SpinState::plus_y();
  const int runs = 500;
  std::vector<MeasuredZ> ms;
  double sig_re = 0, sig_im = 0, mean_re = 0, mean_im = 0;
  for (int s = 0; s < runs; ++s) {
    ms.push_back(analyze_measurement(simulate_measurement(plan, pre, post, static_cast<std::uint64_t>(s))));
    sig_re += ms.back().re_sigma;
    sig_im += ms.back().im_sigma;
    mean_re += ms.back().re;
    mean_im += ms.back().im;
  }
  sig_re /= runs, sig_im /= runs, mean_re /= runs, mean_im /= runs;
  double var_re = 0, var_im = 0;
  for (const auto& m : ms) {
    var_re += (m.re - mean_re) * (m.re - mean_re);
    var_im += (m.im - mean_im) * (m.im - mean_im);
  }
  const double sd_re = std::sqrt(var_re / (runs - 1)), sd_im = std::sqrt(var_im / (runs - 1));
  CHECK(std::abs(mean_re - 0.0) <= 3 * sd_re / std::sqrt(runs));
  CHECK(std::abs(mean_im - 1.0) <= 3 * sd_im / std::sqrt(runs));
  CHECK(std::abs(sd_re / sig_re - 1.0) <= 0.2);
  CHECK(std::abs(sd_im / sig_im - 1.0) <= 0.2);
}

TEST_CASE("mode names") {
  for (auto m : {Mode::In, Mode::Out, Mode::BlockP1, Mode::BlockP2, Mode::OrthogonalBg})
    CHECK(mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(mode_from_string("in"), DataError);
}
