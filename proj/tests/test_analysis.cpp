#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pigeon/analysis.hpp"
#include "pigeon/errors.hpp"

using namespace pigeon;

namespace {

const std::filesystem::path kData = PIGEON_TEST_DATA_DIR;

DataSetTable bundled() { return load_table(kData / "paper_data.csv"); }

std::vector<MeasuredZ> synthetic_rows(double sigma_scale = 1.0) {
  std::vector<MeasuredZ> rows;
  for (int k = 1; k <= 17; ++k)
    rows.push_back({k, 0.01 * k, 0.05 * sigma_scale, 1.0 - 0.01 * k, 0.1 * sigma_scale});
  return rows;
}

std::vector<int> ids_upto(int n) {
  std::vector<int> v;
  for (int k = 1; k <= n; ++k) v.push_back(k);
  return v;
}

const ReproductionReport& shared_report() {
  static const ReproductionReport r = [] {
    const auto pairs = read_pairwise_csv(kData / "paper_pairwise.csv");
    PropagationConfig cfg;
    cfg.mc_samples = 20000;
    return reproduce_paper(bundled(), cfg, pairs, "paper_data.csv");
  }();
  return r;
}

}  // namespace

TEST_CASE("bundled table") {
  const auto t = bundled();
  CHECK(t.rows().size() == 17);
  CHECK(t.set(1).re == -0.024);
  CHECK(t.set(1).im_sigma == 0.094);
  CHECK(t.set(17).im == 1.003);
  CHECK_THROWS_AS(t.set(0), DomainError);
  CHECK_THROWS_AS(t.set(18), DomainError);
  CHECK(t.first(3).size() == 3);
}

TEST_CASE("table validation") {
  auto rows = synthetic_rows();
  std::swap(rows[0], rows[16]);
  CHECK_NOTHROW(DataSetTable{rows});
  CHECK(DataSetTable{rows}.set(1).set_id == 1);

  auto short_rows = synthetic_rows();
  short_rows.pop_back();
  CHECK_THROWS_AS(DataSetTable{short_rows}, DataError);

  auto dup = synthetic_rows();
  dup[3].set_id = 3;
  CHECK_THROWS_AS(DataSetTable{dup}, DataError);

  auto zero_sigma = synthetic_rows();
  zero_sigma[5].re_sigma = 0.0;
  CHECK_THROWS_AS(DataSetTable{zero_sigma}, DataError);

  CHECK_THROWS_AS(load_table(kData / "does_not_exist.csv"), DataError);
}

TEST_CASE("published pairwise table parses") {
  const auto pairs = read_pairwise_csv(kData / "paper_pairwise.csv");
  REQUIRE(pairs.size() == 24);
  CHECK(pairs[0].a == 1);
  CHECK(pairs[0].b == 2);
  CHECK(pairs[0].re == -1.020);
  std::istringstream bad("a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(read_pairwise_csv(bad), DataError);
}

TEST_CASE("first-order propagation of a linear expression is exact") {
  const DataSetTable t(synthetic_rows());
  const std::vector<WeakValue> coeff{{2.0, 0.0}, {0.0, 1.0}, {-1.0, 3.0}};
  const Expression f = [&](std::span<const WeakValue> zw) {
    WeakValue s{};
    for (std::size_t k = 0; k < zw.size(); ++k) s += coeff[k] * zw[k];
    return s;
  };
  const std::vector<int> ids{1, 2, 3};
  const auto p = propagate(f, t, ids, {});
  double var_re = 0, var_im = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& r = t.set(ids[k]);
    // d(Re)/d(re) = Re c, d(Re)/d(im) = -Im c; d(Im)/d(re) = Im c, d(Im)/d(im) = Re c.
    var_re += std::pow(coeff[k].real() * r.re_sigma, 2) + std::pow(coeff[k].imag() * r.im_sigma, 2);
    var_im += std::pow(coeff[k].imag() * r.re_sigma, 2) + std::pow(coeff[k].real() * r.im_sigma, 2);
  }
  CHECK(p.sigma_re == doctest::Approx(std::sqrt(var_re)).epsilon(1e-8));
  CHECK(p.sigma_im == doctest::Approx(std::sqrt(var_im)).epsilon(1e-8));

  PropagationConfig mc;
  mc.method = Method::MonteCarlo;
  const auto q = propagate(f, t, ids, mc);
  CHECK(q.sigma_re == doctest::Approx(p.sigma_re).epsilon(0.02));
  CHECK(q.sigma_im == doctest::Approx(p.sigma_im).epsilon(0.02));
  CHECK(q.value == p.value);
}

TEST_CASE("sigmas scale with input sigmas and vanish for constant expressions") {
  const Expression constant = [](std::span<const WeakValue>) { return WeakValue(1.0, 2.0); };
  const auto p = propagate(constant, bundled(), ids_upto(5), {});
  CHECK(p.sigma_re == 0.0);
  CHECK(p.sigma_im == 0.0);

  const auto big = propagate(witness_expression(), DataSetTable(synthetic_rows()), ids_upto(5), {});
  const auto small = propagate(witness_expression(), DataSetTable(synthetic_rows(1e-3)), ids_upto(5), {});
  CHECK(small.sigma_re == doctest::Approx(1e-3 * big.sigma_re).epsilon(1e-5));
}

TEST_CASE("Monte Carlo is seeded and thread independent") {
  const auto t = bundled();
  PropagationConfig cfg;
  cfg.method = Method::MonteCarlo;
  cfg.mc_samples = 10000;
  cfg.seed = 5;
  const auto a = propagate(witness_expression(), t, ids_upto(7), cfg);
  cfg.threads = 3;
  const auto b = propagate(witness_expression(), t, ids_upto(7), cfg);
  CHECK(a.sigma_re == b.sigma_re);
  CHECK(a.sigma_im == b.sigma_im);
  cfg.seed = 6;
  CHECK(propagate(witness_expression(), t, ids_upto(7), cfg).sigma_re != a.sigma_re);
}

TEST_CASE("propagation preconditions") {
  const auto t = bundled();
  PropagationConfig cfg;
  cfg.method = Method::MonteCarlo;
  cfg.mc_samples = 999;
  CHECK_THROWS_AS(propagate(witness_expression(), t, ids_upto(3), cfg), DomainError);
  const std::vector<int> bad{1, 18};
  CHECK_THROWS_AS(propagate(witness_expression(), t, bad, {}), DomainError);
  CHECK(method_from_string("monte-carlo") == Method::MonteCarlo);
  CHECK_THROWS_AS(method_from_string("bootstrap"), DomainError);
}

TEST_CASE("published witness values") {
  const auto t = bundled();
  const auto c5 = propagate(witness_expression(), t, ids_upto(5), {});
  CHECK(std::abs(c5.value.real() - (-2.85)) <= 0.01);
  CHECK(c5.sigma_re >= 0.35);
  CHECK(c5.sigma_re <= 0.50);
  const auto p5 = propagate(projector_expression(5, 0), t, ids_upto(5), {});
  CHECK(std::abs(p5.value.real() - (-0.2508)) <= 0.0005);
  CHECK(std::abs(p5.sigma_re - 0.0025) <= 0.0001);
}

TEST_CASE("grouped witness agrees with the direct sum on the table") {
  const auto t = bundled();
  for (int n = 3; n <= 17; n += 2) {
    const auto zw = t.first(static_cast<std::size_t>(n));
    const auto direct = witness_c(zw);
    CHECK(std::abs(witness_expression()(zw) - direct) <= 1e-9 * std::abs(direct));
  }
}

TEST_CASE("stationarity at the ideal point") {
  CHECK(stationarity_check(5, 0) <= 1e-8);
  CHECK(stationarity_check(13, 0) <= 1e-8);
  // Three spins: gradient (0, -1/2) per spin.
  CHECK(stationarity_check(3, 0) == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-6));
  CHECK(stationarity_check(7, 0) >= 0.1);
}

TEST_CASE("report covers every odd N with the chosen projectors") {
  const auto& r = shared_report();
  REQUIRE(r.witnesses.size() == 8);
  const std::vector<std::uint64_t> expected{0, 0, 1, 3, 7, 0, 1, 3};
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(r.witnesses[k].n == static_cast<int>(3 + 2 * k));
    CHECK(r.witnesses[k].proj_index == expected[k]);
    CHECK(r.witnesses[k].witness.value.real() < 0.0);
    CHECK(r.witnesses[k].projector.value.real() < 0.0);
  }
  CHECK_THROWS_AS(r.row(4), DomainError);
  CHECK_THROWS_AS(chosen_projector(19), DomainError);
}

TEST_CASE("N=5 projector violation and method flags") {
  const auto& row = shared_report().row(5);
  CHECK_FALSE(row.projector.first_order_reliable);
  CHECK(row.projector.quoted == Method::MonteCarlo);
  CHECK(row.projector.violation_first_order() > 95.0);
  CHECK(row.projector.violation_monte_carlo() > 50.0);
  CHECK(row.witness.first_order_reliable);
  CHECK(row.witness.sigma_re() == row.witness.sigma_re_first_order);
}

TEST_CASE("property: methods agree away from stationary points") {
  for (const auto& w : shared_report().witnesses)
    for (const auto* e : {&w.witness, &w.projector})
      if (e->first_order_reliable)
        CHECK(std::abs(e->sigma_re_first_order / e->sigma_re_monte_carlo - 1.0) <= 0.10);
}

TEST_CASE("property: reported violation uses the real-part sigma") {
  for (const auto& w : shared_report().witnesses)
    CHECK(w.witness.violation_sigmas() == doctest::Approx(-w.witness.value.real() / w.witness.sigma_re()));
}

TEST_CASE("pair table against the published rows") {
  const auto& r = shared_report();
  REQUIRE(r.pairs.size() == 24);
  CHECK(report_pairs().size() == 24);
  int matched = 0;
  for (const auto& p : r.pairs) {
    REQUIRE(p.published);
    // Published sigmas are first-order products of the rounded single-set values.
    CHECK(thousandths(p.sigma_re) == thousandths(p.published->re_sigma));
    CHECK(thousandths(p.sigma_im) == thousandths(p.published->im_sigma));
    if (p.matches_published()) ++matched;
  }
  // Two rows, (1,11) and (1,15), differ by 4 thousandths from the single-set table.
  CHECK(matched == 22);
  CHECK_FALSE(r.pair(1, 11).matches_published());
  CHECK_FALSE(r.pair(1, 15).matches_published());
  const auto tri = r.three_spin_triple();
  CHECK(thousandths(tri[0]->value.real()) == -972);
  CHECK(thousandths(tri[1]->value.real()) == -1052);
  CHECK(thousandths(tri[2]->value.real()) == -1018);
}

TEST_CASE("thousandths rounds half away from zero") {
  CHECK(thousandths(-1.0204) == -1020);
  CHECK(thousandths(-1.0206) == -1021);
  CHECK(thousandths(1.0206) == 1021);
  CHECK(thousandths(0.0625) == 63);
  CHECK(thousandths(-0.0625) == -63);
}

TEST_CASE("reproduction is deterministic") {
  PropagationConfig cfg;
  cfg.mc_samples = 2000;
  const auto a = to_json(reproduce_paper(bundled(), cfg)).dump();
  const auto b = to_json(reproduce_paper(bundled(), cfg)).dump();
  CHECK(a == b);
}

TEST_CASE("report files") {
  const auto dir = std::filesystem::temp_directory_path() / "pigeon_report_test";
  std::filesystem::remove_all(dir);
  write_report_files(dir, shared_report());
  for (const char* f : {"report.csv", "report.json", "fig1_pairs.csv", "fig3a.svg", "fig3b.svg", "fig3c.svg",
                        "fig3d.svg"})
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "n,witness_re,witness_sigma,proj_index,proj_re,proj_sigma,violation_sigmas,proj_violation_sigmas");
  std::ifstream svg(dir / "fig3a.svg");
  const std::string body((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  CHECK(body.rfind("<svg", 0) == 0);
  CHECK(body.find("stroke-dasharray") != std::string::npos);
  CHECK(body.find("</svg>") != std::string::npos);
  std::ifstream js(dir / "report.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["witnesses"].size() == 8);
  CHECK(j["pairs"].size() == 24);
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary line") {
  CHECK(summary_line(shared_report().row(5)) == "N=5: C=-2.85±0.41 (6.9σ)");
}

TEST_CASE("WHEEL_DATA_DIR overrides the data directory") {
  ::setenv("WHEEL_DATA_DIR", "/tmp/elsewhere", 1);
  CHECK(default_data_dir() == std::filesystem::path("/tmp/elsewhere"));
  ::unsetenv("WHEEL_DATA_DIR");
  CHECK(default_data_dir() != std::filesystem::path("/tmp/elsewhere"));
}
