#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pigeon/measured.hpp"
#include "pigeon/weakval.hpp"

namespace pigeon {

inline constexpr std::size_t kTableRows = 17;

/// The 17 measured single-spin weak values, set ids 1..17.
class DataSetTable {
 public:
  /// Throws DataError unless there are exactly 17 rows with ids 1..17 (any order, no repeats)
  /// and every sigma is positive.
  explicit DataSetTable(std::vector<MeasuredZ> rows);

  const MeasuredZ& set(int id) const;
  const std::vector<MeasuredZ>& rows() const { return rows_; }
  /// Central values of sets 1..n.
  std::vector<WeakValue> first(std::size_t n) const;

 private:
  std::vector<MeasuredZ> rows_;  // sorted by id
};

DataSetTable load_table(const std::filesystem::path& path);

/// WHEEL_DATA_DIR when set, otherwise the data directory of the source tree.
std::filesystem::path default_data_dir();

struct PublishedPair {
  int a = 0;
  int b = 0;
  double re = 0.0;
  double re_sigma = 0.0;
  double im = 0.0;
  double im_sigma = 0.0;
};

/// Header "set_a,set_b,re,re_sigma,im,im_sigma". Throws DataError.
std::vector<PublishedPair> read_pairwise_csv(std::istream& in);
std::vector<PublishedPair> read_pairwise_csv(const std::filesystem::path& path);

enum class Method : std::uint8_t { FirstOrder, MonteCarlo };
const char* to_string(Method m);
/// "first-order" or "monte-carlo"; throws DomainError otherwise.
Method method_from_string(std::string_view s);

struct PropagationConfig {
  Method method = Method::FirstOrder;
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws DomainError when mc_samples < 1000 for Monte Carlo or threads < 1.
  void validate() const;
};

using Expression = std::function<WeakValue(std::span<const WeakValue>)>;

struct Propagated {
  WeakValue value;  // f at the central values
  double sigma_re = 0.0;
  double sigma_im = 0.0;
};

/// Propagates independent Gaussian errors on Re and Im of each listed set through f.
/// First order: central differences with step 1e-6 * max(|x|, 1). Monte Carlo: sample
/// standard deviation over mc_samples seeded draws; the result does not depend on threads.
Propagated propagate(const Expression& f, const DataSetTable& table, std::span<const int> subset,
                     const PropagationConfig& cfg);

/// C^(n) over the list it is given (grouped by Hamming weight).
Expression witness_expression();
/// (Pi_j^(n))_w over a list of n weak values.
Expression projector_expression(int n, std::uint64_t j);

/// Norm of the central-difference gradient of Re f over the 2n real inputs at zw.
double gradient_norm_re(const Expression& f, std::span<const WeakValue> zw);

/// gradient_norm_re of Re (Pi_j^(n))_w at Z_w = i for every spin.
double stationarity_check(int n, std::uint64_t j);

/// Projector index shown for each odd n in 3..17.
std::uint64_t chosen_projector(int n);

struct PropagatedEntry {
  WeakValue value;
  double sigma_re_first_order = 0.0;
  double sigma_im_first_order = 0.0;
  double sigma_re_monte_carlo = 0.0;
  double sigma_im_monte_carlo = 0.0;
  double gradient_norm = 0.0;
  /// False when the gradient norm is at most 10x the RMS input sigma.
  bool first_order_reliable = true;
  /// The configured method, except that an unreliable first-order sigma is replaced by Monte Carlo.
  Method quoted = Method::FirstOrder;

  double sigma_re() const { return quoted == Method::FirstOrder ? sigma_re_first_order : sigma_re_monte_carlo; }
  double sigma_im() const { return quoted == Method::FirstOrder ? sigma_im_first_order : sigma_im_monte_carlo; }
  /// max(0, -Re / sigma_re) for the quoted and for each method's sigma.
  double violation_sigmas() const;
  double violation_first_order() const;
  double violation_monte_carlo() const;
};

struct WitnessRow {
  int n = 0;
  double ideal_witness = 0.0;
  PropagatedEntry witness;
  std::uint64_t proj_index = 0;
  int proj_sign = 0;
  double ideal_projector = 0.0;
  PropagatedEntry projector;
};

struct PairRow {
  int a = 0;
  int b = 0;
  WeakValue value;
  double sigma_re = 0.0;  // first order
  double sigma_im = 0.0;
  std::optional<PublishedPair> published;
  /// Re and Im agree with the published central values within 2 thousandths after rounding.
  bool matches_published() const;
};

struct ReproductionReport {
  std::vector<WitnessRow> witnesses;  // n = 3, 5, ..., 17
  std::vector<PairRow> pairs;         // neighbours (k, k+1), then (1, n) for odd n
  PropagationConfig config;
  std::string data_source;

  /// Throw DomainError when absent.
  const WitnessRow& row(int n) const;
  const PairRow& pair(int a, int b) const;
  /// Pairs (1,3), (2,3), (1,2) of the three-spin ring.
  std::array<const PairRow*, 3> three_spin_triple() const;
};

/// Pairs listed in the report: (k, k+1) for k = 1..16, then (1, n) for odd n = 3..17.
std::vector<std::pair<int, int>> report_pairs();

/// Witnesses for every odd n in 3..17 from sets 1..n, both propagation methods, and the pair
/// table. `published` rows are attached to matching pairs.
ReproductionReport reproduce_paper(const DataSetTable& table, const PropagationConfig& cfg,
                                   std::span<const PublishedPair> published = {}, std::string data_source = {});

/// Half away from zero to 3 decimals, as an integer number of thousandths.
long long thousandths(double x);

nlohmann::json to_json(const ReproductionReport& r);
/// n, witness_re, witness_sigma, proj_index, proj_re, proj_sigma, violation_sigmas,
/// proj_violation_sigmas
void write_report_csv(std::ostream& out, const ReproductionReport& r);
/// set_a, set_b, re, re_sigma, im, im_sigma, published_re, published_im
void write_pairs_csv(std::ostream& out, const ReproductionReport& r);
/// report.csv, report.json, fig1_pairs.csv, fig3a.svg .. fig3d.svg
void write_report_files(const std::filesystem::path& dir, const ReproductionReport& r);
/// "N=5: C=-2.85±0.41 (6.9σ)"
std::string summary_line(const WitnessRow& row);

}  // namespace pigeon
