#include "pigeon/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "pigeon/analysis.hpp"
#include "pigeon/errors.hpp"
#include "pigeon/interfsim.hpp"
#include "pigeon/wheel.hpp"

namespace pigeon::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommandConfig {
  std::string subcommand;
  int n = 5;
  std::uint64_t j = 0;
  double alpha_deg = 15.0;
  std::uint64_t seed = 0;
  std::size_t samples = 100000;
  std::string method = "first-order";
  std::string data;
  std::string pairs;
  std::string out;
  std::string input;
  std::string format = "csv";
  bool ideal = false;
  int threads = 1;
  std::string prover = "gf2";
  std::optional<std::size_t> flip;
  std::string mode = "ALL";
  std::optional<double> counts;
  std::optional<double> block_counts;
  double background = MeasurementPlan::paper_like().background_rate;
  std::size_t chi_points = 16;
  double z_re = 0.0;
  double z_im = 1.0;
  std::string inversion = "exact";
};

std::string g6(double x) { return fmt::format("{:.6g}", x + 0.0); }  // no "-0"

struct Emitter {
  const CommandConfig& cfg;
  std::ostream& out;
  void operator()(const std::string& text) const {
    if (cfg.out.empty() || cfg.subcommand == "reproduce") {
      out << text;
      return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write {}", cfg.out));
    f << text;
  }
};

fs::path resolve_data(const std::string& given, const char* fallback) {
  if (given.empty()) return default_data_dir() / fallback;
  fs::path p(given);
  if (p.is_relative() && !fs::exists(p) && fs::exists(default_data_dir() / p)) return default_data_dir() / p;
  return p;
}

PropagationConfig propagation(const CommandConfig& c) {
  PropagationConfig p;
  p.method = method_from_string(c.method);
  p.mc_samples = c.samples;
  p.seed = c.seed;
  p.threads = c.threads;
  p.validate();
  return p;
}

void check_odd(int n) {
  if (n < 3 || n % 2 == 0) throw DomainError(fmt::format("--n must be odd and at least 3 (got {})", n));
}

std::string wheel_build(const CommandConfig& c) {
  const auto w = build_wheel(c.n);
  if (c.format == "json") return to_json(w).dump(2) + "\n";
  std::string s = "context,required_sign,observables\n";
  for (const auto& ctx : w.contexts()) {
    std::vector<std::string> names;
    for (auto id : ctx.observables) names.push_back(w.observables()[id].to_string());
    s += fmt::format("{},{},{}\n", ctx.label, ctx.required_sign, fmt::join(names, ";"));
  }
  return s;
}

WheelSet load_or_build(const CommandConfig& c) {
  if (c.input.empty()) return build_wheel(c.n);
  std::ifstream in(c.input);
  if (!in) throw DataError(fmt::format("cannot open {}", c.input));
  try {
    return wheel_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", c.input, e.what()));
  }
}

std::string wheel_verify(const CommandConfig& c, bool& all_ok) {
  const auto w = load_or_build(c);
  const auto checks = verify_context_products(w);
  const bool incidence = has_ring_spoke_incidence(w);
  all_ok = incidence && std::all_of(checks.begin(), checks.end(), [](const auto& k) { return k.ok; });
  if (c.format == "json") {
    json j{{"n", w.n()}, {"incidence", incidence}, {"ok", all_ok}, {"contexts", json::array()}};
    for (const auto& k : checks)
      j["contexts"].push_back({{"label", k.label},
                               {"product", k.product.to_string()},
                               {"required_sign", k.required_sign},
                               {"commuting", k.commuting},
                               {"ok", k.ok}});
    return j.dump(2) + "\n";
  }
  std::string s = "label,product,required_sign,commuting,ok\n";
  for (const auto& k : checks)
    s += fmt::format("{},{},{},{},{}\n", k.label, k.product.to_string(), k.required_sign, k.commuting, k.ok);
  return s;
}

std::string nchv_prove(const CommandConfig& c) {
  auto w = load_or_build(c);
  if (c.flip) {
    if (*c.flip >= w.contexts().size()) throw DomainError(fmt::format("--flip {} out of range", *c.flip));
    w = w.with_flipped_sign(*c.flip);
  }
  if (c.prover == "exhaustive") {
    const auto r = prove_no_nchv_exhaustive(w, c.threads);
    const char* verdict = r.no_assignment ? "INCONSISTENT" : "SATISFIABLE";
    if (c.format == "json")
      return json{{"n", w.n()},
                  {"prover", "exhaustive"},
                  {"result", verdict},
                  {"candidates", r.candidates},
                  {"satisfying", r.satisfying},
                  {"max_satisfied_contexts", r.max_satisfied_contexts},
                  {"contexts", r.contexts}}
                 .dump(2) +
             "\n";
    return fmt::format("{}\nn,candidates,satisfying,max_satisfied_contexts,contexts\n{},{},{},{},{}\n", verdict,
                       w.n(), r.candidates, r.satisfying, r.max_satisfied_contexts, r.contexts);
  }
  const auto r = prove_no_nchv_gf2(w);
  const char* verdict = r.inconsistent ? "INCONSISTENT" : "SATISFIABLE";
  std::vector<std::string> labels;
  for (auto k : r.certificate) labels.push_back(w.contexts()[k].label);
  if (c.format == "json")
    return json{{"n", w.n()},
                {"prover", "gf2"},
                {"result", verdict},
                {"certificate", labels},
                {"certificate_indices", r.certificate},
                {"solution", r.solution},
                {"rank", r.rank},
                {"equations", r.equations},
                {"variables", r.variables}}
               .dump(2) +
           "\n";
  std::string s = fmt::format("{}\n", verdict);
  if (r.inconsistent) s += fmt::format("certificate: {}\n", fmt::join(labels, "; "));
  s += fmt::format("rank {} of {} equations in {} variables\n", r.rank, r.equations, r.variables);
  return s;
}

struct Evaluated {
  WeakValue value;
  double sigma_re = 0.0;
  double sigma_im = 0.0;
};

Evaluated evaluate(const CommandConfig& c, const Expression& f) {
  if (c.ideal) {
    const std::vector<WeakValue> zw(static_cast<std::size_t>(c.n), kIdealZ);
    return {f(zw), 0.0, 0.0};
  }
  if (c.n > static_cast<int>(kTableRows))
    throw DomainError(fmt::format("--n {} exceeds the {} bundled data sets", c.n, kTableRows));
  const auto table = load_table(resolve_data(c.data, "paper_data.csv"));
  std::vector<int> ids(static_cast<std::size_t>(c.n));
  for (int k = 0; k < c.n; ++k) ids[static_cast<std::size_t>(k)] = k + 1;
  const auto p = propagate(f, table, ids, propagation(c));
  return {p.value, p.sigma_re, p.sigma_im};
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double violation(const Evaluated& e) {
  if (e.value.real() >= 0.0) return 0.0;
  return e.sigma_re > 0.0 ? -e.value.real() / e.sigma_re : std::numeric_limits<double>::infinity();
}

std::string weak_value(const CommandConfig& c) {
  check_odd(c.n);
  const int sign = sign_pattern(c.n, c.j);
  const auto e = evaluate(c, projector_expression(c.n, c.j));
  if (c.format == "json")
    return json{{"n", c.n},
                {"j", c.j},
                {"sign", sign},
                {"re", e.value.real()},
                {"im", e.value.imag()},
                {"sigma_re", e.sigma_re},
                {"sigma_im", e.sigma_im},
                {"violation_sigmas", number_or_null(violation(e))}}
               .dump(2) +
           "\n";
  return fmt::format("n,j,sign,re,im,sigma_re,sigma_im,violation_sigmas\n{},{},{},{},{},{},{},{}\n", c.n, c.j, sign,
                     g6(e.value.real()), g6(e.value.imag()), g6(e.sigma_re), g6(e.sigma_im), g6(violation(e)));
}

std::string witness(const CommandConfig& c) {
  check_odd(c.n);
  const auto e = evaluate(c, witness_expression());
  if (c.format == "json")
    return json{{"n", c.n},
                {"re", e.value.real()},
                {"im", e.value.imag()},
                {"sigma_re", e.sigma_re},
                {"sigma_im", e.sigma_im},
                {"ideal", ideal_witness(c.n)},
                {"violation_sigmas", number_or_null(violation(e))}}
               .dump(2) +
           "\n";
  return fmt::format("n,re,im,sigma_re,sigma_im,violation_sigmas\n{},{},{},{},{},{}\n", c.n, g6(e.value.real()),
                     g6(e.value.imag()), g6(e.sigma_re), g6(e.sigma_im), g6(violation(e)));
}

std::string simulate_cmd(const CommandConfig& c) {
  const auto [pre, post] = states_for_weak_value({c.z_re, c.z_im});
  if (c.mode == "ALL") {
    auto plan = MeasurementPlan::paper_like();
    plan.alpha_deg = c.alpha_deg;
    plan.chi_points = c.chi_points;
    plan.background_rate = c.background;
    if (c.counts) plan.fringe_counts = *c.counts;
    if (c.block_counts) plan.block_counts = *c.block_counts;
    return to_json(simulate_measurement(plan, pre, post, c.seed)).dump(2) + "\n";
  }
  CouplingConfig cfg;
  cfg.alpha_deg = c.alpha_deg;
  cfg.chi_grid = uniform_chi_grid(c.chi_points);
  cfg.mean_counts = c.counts.value_or(MeasurementPlan::paper_like().fringe_counts);
  cfg.background_rate = c.background;
  cfg.seed = c.seed;
  try {
    cfg.mode = mode_from_string(c.mode);
  } catch (const DataError& e) {
    throw DomainError(e.what());
  }
  const auto g = simulate(cfg, pre, post);
  if (c.format == "json") return to_json(g).dump(2) + "\n";
  std::string s = "chi,count\n";
  for (std::size_t k = 0; k < g.chi.size(); ++k) s += fmt::format("{},{}\n", g6(g.chi[k]), g.counts[k]);
  return s;
}

std::string extract(const CommandConfig& c) {
  if (c.input.empty()) throw DomainError("extract needs --input RECORD.json");
  std::ifstream in(c.input);
  if (!in) throw DataError(fmt::format("cannot open {}", c.input));
  MeasurementRecord record;
  try {
    record = measurement_record_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", c.input, e.what()));
  }
  Inversion inv = Inversion::Exact;
  if (c.inversion == "linearized") inv = Inversion::Linearized;
  const auto z = analyze_measurement(record, inv);
  if (c.format == "json")
    return json{{"re", z.re}, {"re_sigma", z.re_sigma}, {"im", z.im}, {"im_sigma", z.im_sigma}}.dump(2) + "\n";
  return fmt::format("re,re_sigma,im,im_sigma\n{},{},{},{}\n", g6(z.re), g6(z.re_sigma), g6(z.im), g6(z.im_sigma));
}

std::string reproduce(const CommandConfig& c) {
  const auto data_path = resolve_data(c.data, "paper_data.csv");
  const auto table = load_table(data_path);
  std::vector<PublishedPair> published;
  const auto pairs_path =
      c.pairs.empty() ? data_path.parent_path() / "paper_pairwise.csv" : resolve_data(c.pairs, "paper_pairwise.csv");
  if (!c.pairs.empty() || fs::exists(pairs_path)) published = read_pairwise_csv(pairs_path);
  const auto report = reproduce_paper(table, propagation(c), published, data_path.filename().string());
  if (c.out.empty()) {
    if (c.format == "json") return to_json(report).dump(2) + "\n";
    std::ostringstream s;
    write_report_csv(s, report);
    return s.str();
  }
  write_report_files(c.out, report);
  std::string s;
  for (const auto& row : report.witnesses) s += summary_line(row) + "\n";
  return s;
}

void add_common(CLI::App* sub, CommandConfig& c) {
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--out", c.out, "Write output to this file (directory for reproduce)");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

void add_propagation(CLI::App* sub, CommandConfig& c) {
  sub->add_option("--method", c.method, "Error propagation")->check(CLI::IsMember({"first-order", "monte-carlo"}));
  sub->add_option("--samples", c.samples, "Monte Carlo samples (>= 1000)");
  sub->add_option("--seed", c.seed, "Monte Carlo seed");
  sub->add_option("--data", c.data, "MeasuredZ CSV (default: bundled table)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CommandConfig c;
  CLI::App app{"Wheel contextuality witnesses from weak values", "pigeon-cli"};
  app.require_subcommand(1);

  auto* wb = app.add_subcommand("wheel-build", "Print the N-spin Wheel contexts");
  wb->add_option("--n", c.n, "Number of spins")->required();
  add_common(wb, c);

  auto* wv = app.add_subcommand("wheel-verify", "Check every context product symbolically");
  wv->add_option("--n", c.n, "Number of spins");
  wv->add_option("--input", c.input, "Wheel JSON to verify instead of building one");
  add_common(wv, c);

  auto* np = app.add_subcommand("nchv-prove", "Show that no noncontextual assignment exists");
  np->add_option("--n", c.n, "Number of spins");
  np->add_option("--input", c.input, "Wheel JSON instead of building one");
  np->add_option("--prover", c.prover, "gf2 or exhaustive")->check(CLI::IsMember({"gf2", "exhaustive"}));
  np->add_option("--flip", c.flip, "Negate the required sign of this context index first");
  add_common(np, c);

  auto* wk = app.add_subcommand("weak-value", "Forbidden projector weak value from sets 1..N");
  wk->add_option("--n", c.n, "Number of spins")->required();
  wk->add_option("--j", c.j, "Projector index")->required();
  wk->add_flag("--ideal", c.ideal, "Use Z_w = i for every spin");
  add_propagation(wk, c);
  add_common(wk, c);

  auto* wi = app.add_subcommand("witness", "Contextuality witness C from sets 1..N");
  wi->add_option("--n", c.n, "Number of spins")->required();
  wi->add_flag("--ideal", c.ideal, "Use Z_w = i for every spin");
  add_propagation(wi, c);
  add_common(wi, c);

  auto* si = app.add_subcommand("simulate", "Simulate interferometer counts");
  si->add_option("--alpha-deg", c.alpha_deg, "Coupling angle in degrees");
  si->add_option("--seed", c.seed, "RNG seed");
  si->add_option("--mode", c.mode, "IN, OUT, BLOCK_P1, BLOCK_P2, ORTHOGONAL_BG or ALL (full record)");
  si->add_option("--counts", c.counts, "Mean counts per setting at unit detection probability");
  si->add_option("--block-counts", c.block_counts, "Mean counts per blocked exposure (ALL)");
  si->add_option("--background", c.background, "Background counts per setting");
  si->add_option("--chi-points", c.chi_points, "Phase-shifter settings")->check(CLI::Range(1, 100000));
  si->add_option("--re", c.z_re, "Re Z_w of the simulated spin");
  si->add_option("--im", c.z_im, "Im Z_w of the simulated spin");
  add_common(si, c);

  auto* ex = app.add_subcommand("extract", "Extract Z_w from a simulated measurement record");
  ex->add_option("--input", c.input, "Record JSON from simulate --mode ALL")->required();
  ex->add_option("--inversion", c.inversion, "exact or linearized")
      ->check(CLI::IsMember({"exact", "linearized"}));
  add_common(ex, c);

  auto* re = app.add_subcommand("reproduce", "Recompute every witness and the pair table");
  re->add_option("--pairs", c.pairs, "Published pairwise CSV (default: next to --data)");
  add_propagation(re, c);
  add_common(re, c);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  c.subcommand = app.get_subcommands().front()->get_name();

  try {
    const Emitter emit{c, out};
    if (c.subcommand == "wheel-build") {
      emit(wheel_build(c));
    } else if (c.subcommand == "wheel-verify") {
      bool ok = false;
      emit(wheel_verify(c, ok));
      if (!ok) {
        err << "error: context verification failed\n";
        return kNumerical;
      }
    } else if (c.subcommand == "nchv-prove") {
      emit(nchv_prove(c));
    } else if (c.subcommand == "weak-value") {
      emit(weak_value(c));
    } else if (c.subcommand == "witness") {
      emit(witness(c));
    } else if (c.subcommand == "simulate") {
      emit(simulate_cmd(c));
    } else if (c.subcommand == "extract") {
      emit(extract(c));
    } else if (c.subcommand == "reproduce") {
      emit(reproduce(c));
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}

}  // namespace pigeon::cli
