#pragma once

// The work behind each CLI subcommand, separated from argument parsing so it
// can be driven from tests. Every command returns a JSON document plus the
// tables that the text and CSV formats print.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "medscale/dc.hpp"
#include "medscale/harness/config.hpp"
#include "medscale/harness/csv.hpp"
#include "medscale/harness/report.hpp"
#include "medscale/harness/studies.hpp"
#include "medscale/mediation.hpp"
#include "medscale/sdb.hpp"
#include "medscale/simgen.hpp"

namespace medscale::harness {

struct CommandOutput {
  Json document;
  std::vector<Table> tables;
};

enum class OutputFormat { json, table, csv };

inline OutputFormat parse_format(const std::string& text) {
  if (text == "json") return OutputFormat::json;
  if (text == "table") return OutputFormat::table;
  if (text == "csv") return OutputFormat::csv;
  fail(ErrorKind::invalid_argument, "unknown format '" + text + "' (expected json, table or csv)");
}

/// JSON: one line. Table: every table, blank-line separated. CSV: the table
/// named `only` (matched by prefix of its title), or every table separated by
/// blank lines when `only` is empty.
inline void emit(std::ostream& out, const CommandOutput& result, OutputFormat format, const std::string& only = {}) {
  if (format == OutputFormat::json) {
    out << result.document.dump() << '\n';
    return;
  }
  bool first = true;
  bool matched = false;
  for (const auto& t : result.tables) {
    if (!only.empty() && t.name.rfind(only, 0) != 0) continue;
    matched = true;
    if (!first) out << '\n';
    first = false;
    if (format == OutputFormat::table) {
      render_text(out, t);
    } else {
      render_csv(out, t);
    }
  }
  require(matched || result.tables.empty(), ErrorKind::lookup, "no table named '" + only + "'");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string scenario = "ci/linear/case1";
  /// Key-value scenario file; overrides `scenario` when set.
  std::string scenario_file;
  std::optional<std::int64_t> n;
  std::uint64_t seed = 1;
  NormalReading reading = NormalReading::variance;
};

inline SimScenario resolve_scenario(const SimulateOptions& opts) {
  SimScenario s = opts.scenario_file.empty() ? lookup_scenario(opts.scenario, opts.reading)
                                             : scenario_from_key_values(load_key_values(opts.scenario_file));
  if (opts.n) s.n = *opts.n;
  s.validate();
  return s;
}

/// One dataset from RngStream(seed, 0), the same stream a study uses for repetition 0.
inline Dataset simulate(const SimulateOptions& opts) {
  RngStream rng(opts.seed, 0);
  Dataset data = generate(resolve_scenario(opts), rng);
  data.fill_default_names();
  return data;
}

// ---------------------------------------------------------------------------
// analyze

enum class AnalyzeMethod { sdb, dc, both };

inline AnalyzeMethod parse_analyze_method(const std::string& text) {
  if (text == "sdb") return AnalyzeMethod::sdb;
  if (text == "dc") return AnalyzeMethod::dc;
  if (text == "both") return AnalyzeMethod::both;
  fail(ErrorKind::invalid_argument, "unknown method '" + text + "' (expected sdb, dc or both)");
}

inline std::string to_string(AnalyzeMethod m) {
  return m == AnalyzeMethod::sdb ? "sdb" : m == AnalyzeMethod::dc ? "dc" : "both";
}

struct AnalyzeOptions {
  AnalyzeMethod method = AnalyzeMethod::both;
  double subset_exponent = 0.7;
  std::optional<std::int64_t> subset_size;
  std::int64_t replicates = 500;
  RootCentering centering = RootCentering::subset;
  bool baseline = false;
  std::vector<std::int64_t> blocks = {1};
  bool shuffle = true;
  double level = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

namespace detail {

inline Json coefficient_rows(const FitResult& fit, const std::vector<std::string>& terms) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    rows.push_back(Json{{"term", terms[i]}, {"estimate", real(fit.coefficients(c))}, {"std_error", real(fit.std_errors(c))}});
  }
  return rows;
}

inline void coefficient_table(Table& t, const std::string& equation, const FitResult& fit,
                              const std::vector<std::string>& terms) {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    t.add({equation, terms[i], format_real(fit.coefficients(c)), format_real(fit.std_errors(c))});
  }
}

}  // namespace detail

/// Point fit, effect summaries, SDB intervals and/or divide-and-conquer tests
/// for one loaded dataset.
inline CommandOutput analyze(const LoadResult& loaded, const ColumnMapping& mapping, const AnalyzeOptions& opts,
                             const std::string& source = "<memory>") {
  const Dataset& data = loaded.data;
  const OutcomeKind kind = mapping.outcome_kind;
  const auto& names = mapping.mediators;
  const bool want_sdb = opts.method != AnalyzeMethod::dc;
  const bool want_dc = opts.method != AnalyzeMethod::sdb;
  const std::uint64_t bootstrap_seed = derived_seed(opts.seed, 0, 2);
  const std::uint64_t shuffle_seed = derived_seed(opts.seed, 0, 3);

  CommandOutput out;
  Json& doc = out.document;
  doc["schema"] = "medscale.analyze/1";
  doc["config"] = {{"input", source},
                   {"mapping",
                    {{"outcome", mapping.outcome},
                     {"exposure", mapping.exposure},
                     {"mediators", mapping.mediators},
                     {"covariates", mapping.covariates}}},
                   {"outcome_kind", std::string(to_string(kind))},
                   {"method", to_string(opts.method)},
                   {"level", opts.level},
                   {"seed", opts.seed}};
  if (want_sdb) {
    doc["config"]["subset_exponent"] = opts.subset_exponent;
    doc["config"]["subset_size"] = optional_int(opts.subset_size);
    doc["config"]["replicates"] = opts.replicates;
    doc["config"]["centering"] = medscale::to_string(opts.centering);
    doc["config"]["baseline_bootstrap"] = opts.baseline;
    if (opts.baseline) doc["config"]["bootstrap_seed"] = bootstrap_seed;
  }
  if (want_dc) {
    doc["config"]["blocks"] = opts.blocks;
    doc["config"]["shuffle"] = opts.shuffle;
    doc["config"]["shuffle_seed"] = shuffle_seed;
  }
  doc["data"] = {{"rows_read", loaded.rows_read}, {"rows_dropped", loaded.rows_dropped}, {"n", data.rows()}};

  // Point fit and coefficient tables.
  const MediationFit fit = fit_mediation(data, kind);
  std::vector<std::string> outcome_terms{"(intercept)", mapping.exposure};
  std::vector<std::string> mediator_terms{"(intercept)", mapping.exposure};
  for (const auto& m : mapping.mediators) outcome_terms.push_back(m);
  for (const auto& z : mapping.covariates) {
    outcome_terms.push_back(z);
    mediator_terms.push_back(z);
  }
  Json mediator_eqs = Json::array();
  Table coef{"coefficients", {"equation", "term", "estimate", "std_error"}, {}};
  detail::coefficient_table(coef, mapping.outcome, fit.outcome_fit, outcome_terms);
  for (std::size_t k = 0; k < names.size(); ++k) {
    mediator_eqs.push_back(
        Json{{"response", names[k]}, {"coefficients", detail::coefficient_rows(fit.mediator_fits[k], mediator_terms)}});
    detail::coefficient_table(coef, names[k], fit.mediator_fits[k], mediator_terms);
  }
  Json paths = Json::array();
  Table path_table{"mediation paths", {"mediator", "alpha", "se_alpha", "beta", "se_beta", "product", "sobel_se"}, {}};
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& m = fit.mediators[k];
    paths.push_back(Json{{"mediator", names[k]},
                         {"alpha", real(m.alpha_hat)},
                         {"se_alpha", real(m.se_alpha)},
                         {"beta", real(m.beta_hat)},
                         {"se_beta", real(m.se_beta)},
                         {"product", real(m.product)},
                         {"sobel_se", real(m.sobel_se)}});
    path_table.add({names[k], format_real(m.alpha_hat), format_real(m.se_alpha), format_real(m.beta_hat),
                    format_real(m.se_beta), format_real(m.product), format_real(m.sobel_se)});
  }
  doc["fit"] = {{"outcome_model", kind == OutcomeKind::continuous ? "linear" : "logistic"},
                {"gamma", real(fit.gamma_hat)},
                {"paths", std::move(paths)},
                {"outcome_equation",
                 {{"response", mapping.outcome}, {"coefficients", detail::coefficient_rows(fit.outcome_fit, outcome_terms)}}},
                {"mediator_equations", std::move(mediator_eqs)}};
  out.tables.push_back(coef);
  out.tables.push_back(path_table);

  // Effects for a unit exposure contrast.
  const ModelParams est = estimated_params(fit, data);
  Table effects{"effects (x=1 vs x*=0)", {"effect", "value"}, {}};
  if (kind == OutcomeKind::continuous) {
    const LinearEffects e = effects_linear(est);
    doc["effects"] = {{"scale", "difference"},
                      {"nde", real(e.nde)},
                      {"nie", real(e.nie)},
                      {"te", real(e.te)},
                      {"nie_by_mediator", reals(e.per_mediator_nie)}};
    effects.add({"nde", format_real(e.nde)});
    effects.add({"nie", format_real(e.nie)});
    effects.add({"te", format_real(e.te)});
  } else {
    const OddsRatioEffects e = effects_logistic_or(est);
    const RareOutcomeCheck rare = rare_outcome_check(est, data);
    doc["effects"] = {{"scale", "odds_ratio"},
                      {"nde_or", real(e.nde_or)},
                      {"nie_or", real(e.nie_or)},
                      {"te_or", real(e.te_or)},
                      {"log_nde", real(e.log_nde)},
                      {"log_nie", real(e.log_nie)},
                      {"log_te", real(e.log_te)},
                      {"rare_outcome",
                       {{"prevalence", rare.prevalence},
                        {"threshold", RareOutcomeCheck::threshold},
                        {"warning", rare.warning}}}};
    effects.add({"nde_or", format_real(e.nde_or)});
    effects.add({"nie_or", format_real(e.nie_or)});
    effects.add({"te_or", format_real(e.te_or)});
    effects.add({"outcome_prevalence", format_real(rare.prevalence)});
  }
  out.tables.push_back(effects);
  doc["assumptions"] = identification_assumptions();

  if (want_sdb) {
    SdbConfig cfg;
    cfg.subset_exponent = opts.subset_exponent;
    cfg.subset_size = opts.subset_size;
    cfg.replicates = opts.replicates;
    cfg.level = opts.level;
    cfg.master_seed = opts.seed;
    cfg.threads = opts.threads;
    cfg.centering = opts.centering;
    const IntervalReport sdb = run_sdb(data, kind, cfg);
    doc["sdb"] = to_json(sdb, names);
    out.tables.push_back(interval_table(sdb, names));
    if (opts.baseline) {
      const IntervalReport boot =
          run_full_bootstrap(data, kind, opts.replicates, opts.level, bootstrap_seed, opts.threads);
      doc["bootstrap"] = to_json(boot, names);
      out.tables.push_back(interval_table(boot, names));
    }
  }
  if (want_dc) {
    Json reports = Json::array();
    for (const auto j : opts.blocks) {
      DcConfig cfg;
      cfg.blocks = j;
      cfg.shuffle_seed = shuffle_seed;
      cfg.shuffle = opts.shuffle;
      cfg.significance = opts.level;
      cfg.threads = opts.threads;
      const DcTestReport report = run_dc_sobel(data, kind, cfg);
      reports.push_back(to_json(report, names));
      out.tables.push_back(dc_table(report, names));
    }
    doc["dc"] = std::move(reports);
  }
  doc["runtime"] = {{"threads", opts.threads}};
  return out;
}

inline CommandOutput analyze_file(const std::string& path, const ColumnMapping& mapping, const AnalyzeOptions& opts) {
  return analyze(load_csv(path, mapping), mapping, opts, path);
}

// ---------------------------------------------------------------------------
// Studies

inline CommandOutput ci_study_output(const CiStudyResult& r) { return {to_json(r), tables(r)}; }
inline CommandOutput test_study_output(const TestStudyResult& r) { return {to_json(r), tables(r)}; }
inline CommandOutput timing_output(const TimingResult& r) { return {to_json(r), tables(r)}; }

/// Per-repetition records as JSON lines.
template <typename Record>
void write_records(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

/// Reads JSON-lines records written by `write_records`.
inline std::vector<CiRepRecord> read_ci_records(std::istream& in) {
  std::vector<CiRepRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(ci_record_from(Json::parse(line)));
  }
  return out;
}

inline std::vector<TestRepRecord> read_test_records(std::istream& in) {
  std::vector<TestRepRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(test_record_from(Json::parse(line)));
  }
  return out;
}

}  // namespace medscale::harness
