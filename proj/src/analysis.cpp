#include "pigeon/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pigeon/errors.hpp"
#include "pigeon/svg.hpp"

#ifndef PIGEON_DEFAULT_DATA_DIR
#define PIGEON_DEFAULT_DATA_DIR "data"
#endif

namespace pigeon {

namespace {

constexpr std::size_t kChunk = 4096;
constexpr double kReliabilityFactor = 10.0;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double step_for(double x) { return 1e-6 * std::max(std::abs(x), 1.0); }

// Partial derivatives of f with respect to (Re z_k, Im z_k) for every k.
std::vector<std::pair<WeakValue, WeakValue>> gradient(const Expression& f, std::span<const WeakValue> zw) {
  std::vector<WeakValue> x(zw.begin(), zw.end());
  std::vector<std::pair<WeakValue, WeakValue>> g;
  g.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const WeakValue centre = x[k];
    const double hr = step_for(centre.real());
    x[k] = centre + hr;
    const WeakValue up_r = f(x);
    x[k] = centre - hr;
    const WeakValue dn_r = f(x);
    const double hi = step_for(centre.imag());
    x[k] = centre + WeakValue(0, hi);
    const WeakValue up_i = f(x);
    x[k] = centre - WeakValue(0, hi);
    const WeakValue dn_i = f(x);
    x[k] = centre;
    g.emplace_back((up_r - dn_r) / (2 * hr), (up_i - dn_i) / (2 * hi));
  }
  return g;
}

struct Moments {
  double n = 0.0;
  double mean_re = 0.0, m2_re = 0.0;
  double mean_im = 0.0, m2_im = 0.0;

  void add(WeakValue v) {
    n += 1.0;
    const double dr = v.real() - mean_re;
    mean_re += dr / n;
    m2_re += dr * (v.real() - mean_re);
    const double di = v.imag() - mean_im;
    mean_im += di / n;
    m2_im += di * (v.imag() - mean_im);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double dr = o.mean_re - mean_re, di = o.mean_im - mean_im;
    mean_re += dr * o.n / total;
    mean_im += di * o.n / total;
    m2_re += o.m2_re + dr * dr * n * o.n / total;
    m2_im += o.m2_im + di * di * n * o.n / total;
    n = total;
  }
};

Moments monte_carlo_chunk(const Expression& f, std::span<const MeasuredZ> rows, std::size_t count,
                          std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<WeakValue> x(rows.size());
  Moments m;
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double re = rows[k].re + rows[k].re_sigma * gauss(rng);
      const double im = rows[k].im + rows[k].im_sigma * gauss(rng);
      x[k] = {re, im};
    }
    m.add(f(x));
  }
  return m;
}

std::vector<MeasuredZ> select(const DataSetTable& table, std::span<const int> subset) {
  std::vector<MeasuredZ> rows;
  for (int id : subset) rows.push_back(table.set(id));
  return rows;
}

std::vector<int> first_ids(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) ids[static_cast<std::size_t>(k)] = k + 1;
  return ids;
}

PropagatedEntry evaluate(const Expression& f, const DataSetTable& table, std::span<const int> ids,
                         const PropagationConfig& cfg, std::uint64_t stream) {
  PropagationConfig fo = cfg;
  fo.method = Method::FirstOrder;
  PropagationConfig mc = cfg;
  mc.method = Method::MonteCarlo;
  mc.seed = mix(cfg.seed ^ mix(stream));
  const auto a = propagate(f, table, ids, fo);
  const auto b = propagate(f, table, ids, mc);

  PropagatedEntry e;
  e.value = a.value;
  e.sigma_re_first_order = a.sigma_re;
  e.sigma_im_first_order = a.sigma_im;
  e.sigma_re_monte_carlo = b.sigma_re;
  e.sigma_im_monte_carlo = b.sigma_im;

  const auto rows = select(table, ids);
  std::vector<WeakValue> zw;
  double sum_sq = 0.0;
  for (const auto& r : rows) {
    zw.push_back(r.value());
    sum_sq += r.re_sigma * r.re_sigma + r.im_sigma * r.im_sigma;
  }
  const double rms_sigma = std::sqrt(sum_sq / (2.0 * static_cast<double>(rows.size())));
  e.gradient_norm = gradient_norm_re(f, zw);
  e.first_order_reliable = e.gradient_norm > kReliabilityFactor * rms_sigma;
  e.quoted = (cfg.method == Method::MonteCarlo || !e.first_order_reliable) ? Method::MonteCarlo : Method::FirstOrder;
  return e;
}

double violation(double re, double sigma) {
  if (re >= 0.0) return 0.0;
  return sigma > 0.0 ? -re / sigma : std::numeric_limits<double>::infinity();
}

nlohmann::json entry_json(const PropagatedEntry& e) {
  return {{"re", e.value.real()},
          {"im", e.value.imag()},
          {"sigma_re", e.sigma_re()},
          {"sigma_im", e.sigma_im()},
          {"quoted_method", to_string(e.quoted)},
          {"first_order", {{"sigma_re", e.sigma_re_first_order}, {"sigma_im", e.sigma_im_first_order}}},
          {"monte_carlo", {{"sigma_re", e.sigma_re_monte_carlo}, {"sigma_im", e.sigma_im_monte_carlo}}},
          {"gradient_norm", e.gradient_norm},
          {"first_order_reliable", e.first_order_reliable},
          {"violation_sigmas", e.violation_sigmas()},
          {"violation_sigmas_first_order", e.violation_first_order()},
          {"violation_sigmas_monte_carlo", e.violation_monte_carlo()}};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", p.string()));
  out << content;
  if (!out) throw DataError(fmt::format("write failed for {}", p.string()));
}

}  // namespace

DataSetTable::DataSetTable(std::vector<MeasuredZ> rows) : rows_(std::move(rows)) {
  if (rows_.size() != kTableRows)
    throw DataError(fmt::format("data table needs exactly {} rows (got {})", kTableRows, rows_.size()));
  std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) { return a.set_id < b.set_id; });
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    const auto& r = rows_[k];
    if (r.set_id != static_cast<int>(k) + 1)
      throw DataError(fmt::format("data table set ids must be 1..{} without repeats", kTableRows));
    if (!(r.re_sigma > 0.0) || !(r.im_sigma > 0.0))
      throw DataError(fmt::format("set {}: sigmas must be positive", r.set_id));
    if (!std::isfinite(r.re) || !std::isfinite(r.im) || !std::isfinite(r.re_sigma) || !std::isfinite(r.im_sigma))
      throw DataError(fmt::format("set {}: non-finite value", r.set_id));
  }
}

const MeasuredZ& DataSetTable::set(int id) const {
  if (id < 1 || id > static_cast<int>(rows_.size())) throw DomainError(fmt::format("no data set {}", id));
  return rows_[static_cast<std::size_t>(id - 1)];
}

std::vector<WeakValue> DataSetTable::first(std::size_t n) const {
  if (n > rows_.size()) throw DomainError(fmt::format("table has only {} sets", rows_.size()));
  std::vector<WeakValue> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(rows_[k].value());
  return out;
}

DataSetTable load_table(const std::filesystem::path& path) { return DataSetTable(read_measured_csv(path)); }

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("WHEEL_DATA_DIR"); env && *env) return env;
  return PIGEON_DEFAULT_DATA_DIR;
}

std::vector<PublishedPair> read_pairwise_csv(std::istream& in) {
  std::vector<PublishedPair> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    const auto f = split_csv_line(line);
    if (!header_seen) {
      if (f != std::vector<std::string>{"set_a", "set_b", "re", "re_sigma", "im", "im_sigma"})
        throw DataError(fmt::format("line {}: expected header set_a,set_b,re,re_sigma,im,im_sigma", lineno));
      header_seen = true;
      continue;
    }
    if (f.size() != 6) throw DataError(fmt::format("line {}: expected 6 fields, got {}", lineno, f.size()));
    rows.push_back({parse_csv_int(f[0], lineno), parse_csv_int(f[1], lineno), parse_csv_double(f[2], lineno),
                    parse_csv_double(f[3], lineno), parse_csv_double(f[4], lineno),
                    parse_csv_double(f[5], lineno)});
  }
  if (!header_seen) throw DataError("empty pairwise CSV");
  return rows;
}

std::vector<PublishedPair> read_pairwise_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_pairwise_csv(in);
}

const char* to_string(Method m) { return m == Method::FirstOrder ? "first-order" : "monte-carlo"; }

Method method_from_string(std::string_view s) {
  if (s == "first-order") return Method::FirstOrder;
  if (s == "monte-carlo") return Method::MonteCarlo;
  throw DomainError(fmt::format("unknown propagation method '{}'", s));
}

void PropagationConfig::validate() const {
  if (method == Method::MonteCarlo && mc_samples < 1000)
    throw DomainError(fmt::format("Monte Carlo needs at least 1000 samples (got {})", mc_samples));
  if (threads < 1) throw DomainError("threads must be at least 1");
}

Propagated propagate(const Expression& f, const DataSetTable& table, std::span<const int> subset,
                     const PropagationConfig& cfg) {
  cfg.validate();
  const auto rows = select(table, subset);
  std::vector<WeakValue> zw;
  for (const auto& r : rows) zw.push_back(r.value());
  Propagated out;
  out.value = f(zw);

  if (cfg.method == Method::FirstOrder) {
    const auto g = gradient(f, zw);
    double var_re = 0.0, var_im = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double sr2 = rows[k].re_sigma * rows[k].re_sigma, si2 = rows[k].im_sigma * rows[k].im_sigma;
      var_re += std::pow(g[k].first.real(), 2) * sr2 + std::pow(g[k].second.real(), 2) * si2;
      var_im += std::pow(g[k].first.imag(), 2) * sr2 + std::pow(g[k].second.imag(), 2) * si2;
    }
    out.sigma_re = std::sqrt(var_re);
    out.sigma_im = std::sqrt(var_im);
    return out;
  }

  const std::size_t chunks = (cfg.mc_samples + kChunk - 1) / kChunk;
  std::vector<Moments> parts(chunks);
  const auto work = [&](std::size_t first) {
    for (std::size_t c = first; c < chunks; c += static_cast<std::size_t>(cfg.threads)) {
      const std::size_t count = std::min(kChunk, cfg.mc_samples - c * kChunk);
      parts[c] = monte_carlo_chunk(f, rows, count, cfg.seed, c);
    }
  };
  if (cfg.threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(work, static_cast<std::size_t>(t));
  }
  Moments total;
  for (const auto& p : parts) total.merge(p);
  out.sigma_re = std::sqrt(total.m2_re / (total.n - 1.0));
  out.sigma_im = std::sqrt(total.m2_im / (total.n - 1.0));
  return out;
}

Expression witness_expression() {
  return [](std::span<const WeakValue> zw) { return witness_c_by_weight(zw); };
}

Expression projector_expression(int n, std::uint64_t j) {
  const BasisIndex idx(n, j);
  return [idx](std::span<const WeakValue> zw) { return forbidden_projector_wv(idx, zw); };
}

double gradient_norm_re(const Expression& f, std::span<const WeakValue> zw) {
  double sum = 0.0;
  for (const auto& [d_re, d_im] : gradient(f, zw)) sum += d_re.real() * d_re.real() + d_im.real() * d_im.real();
  return std::sqrt(sum);
}

double stationarity_check(int n, std::uint64_t j) {
  const std::vector<WeakValue> ideal(static_cast<std::size_t>(n), kIdealZ);
  return gradient_norm_re(projector_expression(n, j), ideal);
}

std::uint64_t chosen_projector(int n) {
  switch (n) {
    case 3: return 0;
    case 5: return 0;
    case 7: return 1;
    case 9: return 3;
    case 11: return 7;
    case 13: return 0;
    case 15: return 1;
    case 17: return 3;
    default: throw DomainError(fmt::format("no projector chosen for N={}", n));
  }
}

double PropagatedEntry::violation_sigmas() const { return violation(value.real(), sigma_re()); }
double PropagatedEntry::violation_first_order() const { return violation(value.real(), sigma_re_first_order); }
double PropagatedEntry::violation_monte_carlo() const { return violation(value.real(), sigma_re_monte_carlo); }

long long thousandths(double x) { return std::llround(x * 1000.0); }

bool PairRow::matches_published() const {
  if (!published) return false;
  return std::llabs(thousandths(value.real()) - thousandths(published->re)) <= 2 &&
         std::llabs(thousandths(value.imag()) - thousandths(published->im)) <= 2;
}

const WitnessRow& ReproductionReport::row(int n) const {
  for (const auto& r : witnesses)
    if (r.n == n) return r;
  throw DomainError(fmt::format("report has no row for N={}", n));
}

const PairRow& ReproductionReport::pair(int a, int b) const {
  for (const auto& p : pairs)
    if (p.a == a && p.b == b) return p;
  throw DomainError(fmt::format("report has no pair ({}, {})", a, b));
}

std::array<const PairRow*, 3> ReproductionReport::three_spin_triple() const {
  return {&pair(1, 3), &pair(2, 3), &pair(1, 2)};
}

std::vector<std::pair<int, int>> report_pairs() {
  std::vector<std::pair<int, int>> out;
  for (int k = 1; k < static_cast<int>(kTableRows); ++k) out.emplace_back(k, k + 1);
  for (int n = 3; n <= static_cast<int>(kTableRows); n += 2) out.emplace_back(1, n);
  return out;
}

ReproductionReport reproduce_paper(const DataSetTable& table, const PropagationConfig& cfg,
                                   std::span<const PublishedPair> published, std::string data_source) {
  cfg.validate();
  ReproductionReport report;
  report.config = cfg;
  report.data_source = std::move(data_source);

  for (int n = 3; n <= static_cast<int>(kTableRows); n += 2) {
    const auto ids = first_ids(n);
    WitnessRow row;
    row.n = n;
    row.ideal_witness = ideal_witness(n);
    row.witness = evaluate(witness_expression(), table, ids, cfg, static_cast<std::uint64_t>(2 * n));
    row.proj_index = chosen_projector(n);
    row.proj_sign = sign_pattern(n, row.proj_index);
    const BasisIndex idx(n, row.proj_index);
    const std::vector<WeakValue> ideal(static_cast<std::size_t>(n), kIdealZ);
    row.ideal_projector = forbidden_projector_wv(idx, ideal).real();
    row.projector =
        evaluate(projector_expression(n, row.proj_index), table, ids, cfg, static_cast<std::uint64_t>(2 * n + 1));
    report.witnesses.push_back(row);
  }

  PropagationConfig fo = cfg;
  fo.method = Method::FirstOrder;
  const Expression product = [](std::span<const WeakValue> zw) { return pairwise_zz_wv(zw[0], zw[1]); };
  for (const auto& [a, b] : report_pairs()) {
    const std::array<int, 2> ids{a, b};
    const auto p = propagate(product, table, ids, fo);
    PairRow row{a, b, p.value, p.sigma_re, p.sigma_im, std::nullopt};
    for (const auto& pub : published)
      if (pub.a == a && pub.b == b) row.published = pub;
    report.pairs.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const ReproductionReport& r) {
  nlohmann::json j;
  j["provenance"] = {{"data_source", r.data_source},
                     {"rows", kTableRows},
                     {"method", to_string(r.config.method)},
                     {"mc_samples", r.config.mc_samples},
                     {"seed", r.config.seed},
                     {"threads", r.config.threads},
                     {"subsets", "sets 1..N for each N"}};
  j["witnesses"] = nlohmann::json::array();
  for (const auto& w : r.witnesses)
    j["witnesses"].push_back({{"n", w.n},
                              {"witness", entry_json(w.witness)},
                              {"witness_ideal", w.ideal_witness},
                              {"proj_index", w.proj_index},
                              {"proj_sign", w.proj_sign},
                              {"projector", entry_json(w.projector)},
                              {"projector_ideal", w.ideal_projector}});
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : r.pairs) {
    nlohmann::json row{{"set_a", p.a},       {"set_b", p.b},           {"re", p.value.real()},
                       {"im", p.value.imag()}, {"sigma_re", p.sigma_re}, {"sigma_im", p.sigma_im}};
    if (p.published) {
      row["published"] = {{"re", p.published->re},
                          {"re_sigma", p.published->re_sigma},
                          {"im", p.published->im},
                          {"im_sigma", p.published->im_sigma}};
      row["matches_published"] = p.matches_published();
    }
    j["pairs"].push_back(row);
  }
  j["three_spin_triple"] = nlohmann::json::array();
  for (const auto* p : r.three_spin_triple())
    j["three_spin_triple"].push_back({{"set_a", p->a}, {"set_b", p->b}, {"re", p->value.real()}});
  return j;
}

void write_report_csv(std::ostream& out, const ReproductionReport& r) {
  out << "n,witness_re,witness_sigma,proj_index,proj_re,proj_sigma,violation_sigmas,proj_violation_sigmas\n";
  for (const auto& w : r.witnesses)
    fmt::print(out, "{},{:.6g},{:.6g},{},{:.6g},{:.6g},{:.6g},{:.6g}\n", w.n, w.witness.value.real(),
               w.witness.sigma_re(), w.proj_index, w.projector.value.real(), w.projector.sigma_re(),
               w.witness.violation_sigmas(), w.projector.violation_sigmas());
}

void write_pairs_csv(std::ostream& out, const ReproductionReport& r) {
  out << "set_a,set_b,re,re_sigma,im,im_sigma,published_re,published_im\n";
  for (const auto& p : r.pairs) {
    fmt::print(out, "{},{},{:.6g},{:.6g},{:.6g},{:.6g},", p.a, p.b, p.value.real(), p.sigma_re, p.value.imag(),
               p.sigma_im);
    if (p.published)
      fmt::print(out, "{:.3f},{:.3f}\n", p.published->re, p.published->im);
    else
      out << ",\n";
  }
}

void write_report_files(const std::filesystem::path& dir, const ReproductionReport& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  std::ostringstream csv;
  write_report_csv(csv, r);
  write_file(dir / "report.csv", csv.str());
  write_file(dir / "report.json", to_json(r).dump(2) + "\n");
  std::ostringstream pairs;
  write_pairs_csv(pairs, r);
  write_file(dir / "fig1_pairs.csv", pairs.str());

  svg::Plot a{"Witness Re C(N)", "N", "Re C", {}, {}, 0.0};
  svg::Plot b{"Witness violation", "N", "violation (sigma)", {}, {}, 0.0};
  svg::Plot c{"Projector Re Pi_j(N)", "N", "Re Pi", {}, {}, 0.0};
  svg::Plot d{"Projector violation", "N", "violation (sigma)", {}, {}, 0.0};
  for (const auto& w : r.witnesses) {
    const double n = w.n;
    a.data.push_back({n, w.witness.value.real(), w.witness.sigma_re()});
    a.model.emplace_back(n, w.ideal_witness);
    b.data.push_back({n, w.witness.violation_sigmas(), 0.0});
    c.data.push_back({n, w.projector.value.real(), w.projector.sigma_re()});
    c.model.emplace_back(n, w.ideal_projector);
    d.data.push_back({n, w.projector.violation_sigmas(), 0.0});
  }
  write_file(dir / "fig3a.svg", svg::render(a));
  write_file(dir / "fig3b.svg", svg::render(b));
  write_file(dir / "fig3c.svg", svg::render(c));
  write_file(dir / "fig3d.svg", svg::render(d));
}

std::string summary_line(const WitnessRow& row) {
  return fmt::format("N={}: C={:.2f}±{:.2f} ({:.1f}σ)", row.n, row.witness.value.real(), row.witness.sigma_re(),
                     row.witness.violation_sigmas());
}

}  // namespace pigeon
