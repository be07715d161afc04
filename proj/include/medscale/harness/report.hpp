#pragma once

// Serialization of engine and study results.
//
// JSON documents use insertion-ordered keys and carry a "schema" tag. Every
// wall-clock figure sits under a key named "timing" and the thread budget
// under "runtime", so two runs can be compared by dropping those keys
// (`strip_nondeterministic`). Doubles are written with round-trip precision;
// NaN and infinities become null.
//
// Tables are named row sets rendered either as aligned text or as CSV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medscale/dc.hpp"
#include "medscale/harness/metrics.hpp"
#include "medscale/harness/studies.hpp"
#include "medscale/mediation.hpp"
#include "medscale/sdb.hpp"

namespace medscale::harness {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  if (!std::isfinite(v)) return format_real(v);
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

/// Display form of a p-value; values under 1e-5 print as "<1e-05".
inline std::string p_display(double p) {
  if (p < 1e-5) return "<1e-05";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", std::min(p, 1.0));
  return buf;
}

inline void render_text(std::ostream& out, const Table& t) {
  std::vector<std::size_t> width(t.columns.size(), 0);
  for (std::size_t c = 0; c < t.columns.size(); ++c) width[c] = t.columns[c].size();
  for (const auto& row : t.rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());

  out << t.name << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& s = c < cells.size() ? cells[c] : std::string{};
      if (c > 0) out << "  ";
      // First column left-aligned, the rest right-aligned.
      out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << s;
    }
    out << '\n';
  };
  line(t.columns);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
  for (const auto& row : t.rows) line(row);
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

inline void render_csv(std::ostream& out, const Table& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << csv_cell(cells[c]);
    out << '\n';
  };
  line(t.columns);
  for (const auto& row : t.rows) line(row);
}

// ---------------------------------------------------------------------------
// JSON helpers

inline Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double real_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Json reals(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

inline std::vector<double> reals_from(const Json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(real_from(x));
  return out;
}

/// Removes every "timing" and "runtime" member, recursively.
inline Json strip_nondeterministic(Json j) {
  if (j.is_object()) {
    j.erase("timing");
    j.erase("runtime");
    for (auto& [key, value] : j.items()) value = strip_nondeterministic(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_nondeterministic(value);
  }
  return j;
}

inline std::vector<std::string> mediator_labels(std::size_t d, const std::vector<std::string>& names = {}) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < d; ++k) out.push_back(k < names.size() ? names[k] : "M" + std::to_string(k + 1));
  return out;
}

inline Json interval_json(const Interval& iv) { return Json{{"lo", real(iv.lo)}, {"hi", real(iv.hi)}}; }

inline Interval interval_from(const Json& j) { return {real_from(j.at("lo")), real_from(j.at("hi"))}; }

// ---------------------------------------------------------------------------
// Engine reports

inline Json to_json(const IntervalReport& r, const std::vector<std::string>& names = {}) {
  const auto labels = mediator_labels(r.mediators.size(), names);
  Json j;
  j["method"] = r.method;
  if (r.method == "sdb") j["centering"] = r.centering;
  j["n"] = r.n;
  j["subset_size"] = r.subset_size;
  j["replicates"] = r.replicates;
  j["level"] = r.level;
  j["seed"] = r.master_seed;
  j["failed_replicates"] = r.failed_replicates;
  j["retried_attempts"] = r.retried_attempts;
  Json meds = Json::array();
  for (std::size_t k = 0; k < r.mediators.size(); ++k) {
    const auto& m = r.mediators[k];
    meds.push_back(Json{{"mediator", labels[k]},
                        {"estimate", real(m.estimate)},
                        {"ci", interval_json(m.single)},
                        {"ci_adjusted", interval_json(m.adjusted)},
                        {"quantiles",
                         {{"lower", real(m.q_lower_single)},
                          {"upper", real(m.q_upper_single)},
                          {"lower_adjusted", real(m.q_lower_adjusted)},
                          {"upper_adjusted", real(m.q_upper_adjusted)}}}});
  }
  j["mediators"] = std::move(meds);
  j["timing"] = {{"full_fit_seconds", r.full_fit_seconds}, {"replicate_seconds", r.replicate_seconds}};
  return j;
}

inline Json to_json(const DcTestReport& r, const std::vector<std::string>& names = {}) {
  const auto labels = mediator_labels(r.mediators.size(), names);
  Json j;
  j["blocks"] = r.blocks;
  j["n"] = r.n;
  j["shuffled"] = r.shuffled;
  j["shuffle_seed"] = r.shuffle_seed;
  j["significance"] = r.significance;
  Json meds = Json::array();
  for (std::size_t k = 0; k < r.mediators.size(); ++k) {
    const auto& m = r.mediators[k];
    meds.push_back(Json{{"mediator", labels[k]},
                        {"estimate", real(m.estimate)},
                        {"std_error", real(m.std_error)},
                        {"statistic", real(m.statistic)},
                        {"p_value", real(m.p_value)},
                        {"p_value_capped", real(m.p_value_capped)},
                        {"p_display", p_display(m.p_value)},
                        {"rejected", m.rejected},
                        {"degenerate", m.degenerate}});
  }
  j["mediators"] = std::move(meds);
  Json sig = Json::array();
  for (auto k : r.significant) sig.push_back(labels[k]);
  j["significant"] = std::move(sig);
  j["timing"] = {{"seconds", r.seconds}};
  return j;
}

inline Table interval_table(const IntervalReport& r, const std::vector<std::string>& names = {}) {
  const auto labels = mediator_labels(r.mediators.size(), names);
  Table t{r.method + " intervals (level " + format_real(r.level) + ", S=" + std::to_string(r.replicates) +
              ", b=" + std::to_string(r.subset_size) + ")",
          {"mediator", "estimate", "ci_lo", "ci_hi", "ci_adj_lo", "ci_adj_hi"},
          {}};
  for (std::size_t k = 0; k < r.mediators.size(); ++k) {
    const auto& m = r.mediators[k];
    t.add({labels[k], format_real(m.estimate), format_real(m.single.lo), format_real(m.single.hi),
           format_real(m.adjusted.lo), format_real(m.adjusted.hi)});
  }
  return t;
}

inline Table dc_table(const DcTestReport& r, const std::vector<std::string>& names = {}) {
  const auto labels = mediator_labels(r.mediators.size(), names);
  Table t{"divide-and-conquer Sobel test (J=" + std::to_string(r.blocks) + ")",
          {"mediator", "estimate", "std_error", "statistic", "p_value", "p_display", "rejected"},
          {}};
  for (std::size_t k = 0; k < r.mediators.size(); ++k) {
    const auto& m = r.mediators[k];
    t.add({labels[k], format_real(m.estimate), format_real(m.std_error), format_real(m.statistic),
           format_real(m.p_value), p_display(m.p_value), m.rejected ? "yes" : "no"});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Study configs

inline std::string to_string(NormalReading r) { return r == NormalReading::variance ? "variance" : "sd"; }

inline NormalReading parse_reading(const std::string& text) {
  if (text == "variance" || text == "var") return NormalReading::variance;
  if (text == "sd" || text == "standard_deviation") return NormalReading::standard_deviation;
  fail(ErrorKind::invalid_argument, "unknown normal reading '" + text + "' (expected variance or sd)");
}

inline Json optional_int(const std::optional<std::int64_t>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const CiStudyConfig& c) {
  return Json{{"scenario", c.scenario},
              {"n", c.n},
              {"replicates", c.replicates},
              {"repetitions", c.repetitions},
              {"subset_exponent", c.subset_exponent},
              {"subset_size", optional_int(c.subset_size)},
              {"level", c.level},
              {"seed", c.seed},
              {"baseline_bootstrap", c.baseline},
              {"centering", medscale::to_string(c.centering)},
              {"reading", to_string(c.reading)}};
}

inline Json to_json(const TestStudyConfig& c) {
  return Json{{"scenario", c.scenario},       {"n", c.n},       {"blocks", c.blocks},
              {"repetitions", c.repetitions}, {"level", c.significance}, {"seed", c.seed},
              {"reading", to_string(c.reading)}};
}

inline Json to_json(const TimingConfig& c) {
  return Json{{"scenario", c.scenario},
              {"n", c.n},
              {"methods", c.methods},
              {"repetitions", c.repetitions},
              {"replicates", c.replicates},
              {"subset_exponent", c.subset_exponent},
              {"subset_size", optional_int(c.subset_size)},
              {"level", c.level},
              {"seed", c.seed},
              {"centering", medscale::to_string(c.centering)},
              {"reading", to_string(c.reading)}};
}

// ---------------------------------------------------------------------------
// Per-repetition records (JSON lines). `from_json` inverts `to_json` exactly.

inline Json to_json(const CiMethodRecord& r) {
  Json single = Json::array(), adjusted = Json::array();
  for (const auto& iv : r.single) single.push_back(interval_json(iv));
  for (const auto& iv : r.adjusted) adjusted.push_back(interval_json(iv));
  return Json{{"estimate", reals(r.estimate)},
              {"ci", std::move(single)},
              {"ci_adjusted", std::move(adjusted)},
              {"failed_replicates", r.failed_replicates},
              {"timing", {{"full_fit_seconds", r.full_fit_seconds}, {"replicate_seconds", r.replicate_seconds}}}};
}

inline CiMethodRecord ci_method_record_from(const Json& j) {
  CiMethodRecord r;
  r.estimate = reals_from(j.at("estimate"));
  for (const auto& iv : j.at("ci")) r.single.push_back(interval_from(iv));
  for (const auto& iv : j.at("ci_adjusted")) r.adjusted.push_back(interval_from(iv));
  r.failed_replicates = j.at("failed_replicates").get<std::int64_t>();
  if (j.contains("timing")) {
    r.full_fit_seconds = j["timing"].at("full_fit_seconds").get<double>();
    r.replicate_seconds = j["timing"].at("replicate_seconds").get<double>();
  }
  return r;
}

inline Json to_json(const CiRepRecord& r) {
  Json j{{"record", "ci"}, {"repetition", r.repetition}, {"sdb", to_json(r.sdb)}};
  j["bootstrap"] = r.bootstrap ? to_json(*r.bootstrap) : Json(nullptr);
  return j;
}

inline CiRepRecord ci_record_from(const Json& j) {
  CiRepRecord r;
  r.repetition = j.at("repetition").get<std::int64_t>();
  r.sdb = ci_method_record_from(j.at("sdb"));
  if (j.contains("bootstrap") && !j["bootstrap"].is_null()) r.bootstrap = ci_method_record_from(j["bootstrap"]);
  return r;
}

inline Json to_json(const TestRepRecord& r) {
  Json blocks = Json::array();
  for (const auto& b : r.by_blocks) {
    std::vector<bool> rejected = b.rejected;
    blocks.push_back(Json{{"blocks", b.blocks},
                          {"estimate", reals(b.estimate)},
                          {"std_error", reals(b.std_error)},
                          {"p_value", reals(b.p_value)},
                          {"rejected", rejected},
                          {"timing", {{"seconds", b.seconds}}}});
  }
  return Json{{"record", "test"}, {"repetition", r.repetition}, {"by_blocks", std::move(blocks)}};
}

inline TestRepRecord test_record_from(const Json& j) {
  TestRepRecord r;
  r.repetition = j.at("repetition").get<std::int64_t>();
  for (const auto& bj : j.at("by_blocks")) {
    TestBlockRecord b;
    b.blocks = bj.at("blocks").get<std::int64_t>();
    b.estimate = reals_from(bj.at("estimate"));
    b.std_error = reals_from(bj.at("std_error"));
    b.p_value = reals_from(bj.at("p_value"));
    for (const auto& x : bj.at("rejected")) b.rejected.push_back(x.get<bool>());
    if (bj.contains("timing")) b.seconds = bj["timing"].at("seconds").get<double>();
    r.by_blocks.push_back(std::move(b));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Study summaries

inline Json to_json(const CiMethodSummary& s) {
  return Json{{"coverage", reals(s.coverage_single)},
              {"coverage_adjusted", reals(s.coverage_adjusted)},
              {"simultaneous_coverage_adjusted", s.simultaneous_coverage_adjusted},
              {"mean_length", reals(s.mean_length_single)},
              {"mean_length_adjusted", reals(s.mean_length_adjusted)},
              {"bias", reals(s.bias)},
              {"mse", reals(s.mse)},
              {"failed_replicates", s.failed_replicates},
              {"timing",
               {{"mean_full_fit_seconds", s.mean_full_fit_seconds},
                {"mean_replicate_seconds", s.mean_replicate_seconds}}}};
}

inline Json to_json(const CiStudyResult& r) {
  Json j{{"schema", "medscale.ci-study/1"}, {"config", to_json(r.config)}};
  j["repetitions"] = r.summary.repetitions;
  j["mediators"] = mediator_labels(r.summary.truth.size());
  j["truth"] = reals(r.summary.truth);
  j["sdb"] = to_json(r.summary.sdb);
  j["bootstrap"] = r.summary.bootstrap ? to_json(*r.summary.bootstrap) : Json(nullptr);
  j["runtime"] = {{"threads", r.config.threads}};
  return j;
}

inline std::vector<Table> tables(const CiStudyResult& r) {
  const auto labels = mediator_labels(r.summary.truth.size());
  Table t{"coverage and mean length (x1e4), " + r.config.scenario + ", n=" + std::to_string(r.config.n) +
              ", reps=" + std::to_string(r.summary.repetitions),
          {"mediator", "truth", "sdb_coverage", "sdb_coverage_adj", "sdb_length", "sdb_bias", "sdb_mse"},
          {}};
  const bool base = r.summary.bootstrap.has_value();
  if (base) {
    for (const char* c : {"boot_coverage", "boot_coverage_adj", "boot_length", "length_ratio"}) t.columns.push_back(c);
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& s = r.summary.sdb;
    std::vector<std::string> row{labels[k],
                                 format_real(r.summary.truth[k]),
                                 format_fixed(s.coverage_single[k], 3),
                                 format_fixed(s.coverage_adjusted[k], 3),
                                 format_fixed(1e4 * s.mean_length_single[k], 3),
                                 format_real(s.bias[k]),
                                 format_real(s.mse[k])};
    if (base) {
      const auto& b = *r.summary.bootstrap;
      row.push_back(format_fixed(b.coverage_single[k], 3));
      row.push_back(format_fixed(b.coverage_adjusted[k], 3));
      row.push_back(format_fixed(1e4 * b.mean_length_single[k], 3));
      row.push_back(format_fixed(s.mean_length_single[k] / b.mean_length_single[k], 3));
    }
    t.add(std::move(row));
  }
  Table g{"simultaneous coverage and cost", {"method", "simultaneous_coverage_adj", "failed_replicates",
                                             "mean_replicate_seconds"}, {}};
  g.add({"sdb", format_fixed(r.summary.sdb.simultaneous_coverage_adjusted, 3),
         std::to_string(r.summary.sdb.failed_replicates), format_fixed(r.summary.sdb.mean_replicate_seconds, 4)});
  if (base) {
    const auto& b = *r.summary.bootstrap;
    g.add({"bootstrap", format_fixed(b.simultaneous_coverage_adjusted, 3), std::to_string(b.failed_replicates),
           format_fixed(b.mean_replicate_seconds, 4)});
  }
  return {t, g};
}

inline Json to_json(const TestStudyResult& r) {
  Json j{{"schema", "medscale.test-study/1"}, {"config", to_json(r.config)}};
  j["repetitions"] = r.summary.repetitions;
  j["mediators"] = mediator_labels(r.summary.truth.size());
  j["truth"] = reals(r.summary.truth);
  Json signal = Json::array();
  for (auto k : r.summary.signal) signal.push_back(k + 1);
  j["signal"] = std::move(signal);  // 1-based mediator numbers
  Json rows = Json::array();
  for (const auto& b : r.summary.by_blocks) {
    rows.push_back(Json{{"blocks", b.blocks},
                        {"power", real(b.power)},
                        {"fwer", b.fwer},
                        {"rejection_rate", reals(b.rejection_rate)},
                        {"bias", reals(b.bias)},
                        {"bias_mc_se", reals(b.bias_mc_se)},
                        {"mse", reals(b.mse)},
                        {"timing", {{"mean_seconds", b.mean_seconds}}}});
  }
  j["by_blocks"] = std::move(rows);
  j["runtime"] = {{"threads", r.config.threads}};
  return j;
}

inline std::vector<Table> tables(const TestStudyResult& r) {
  const auto labels = mediator_labels(r.summary.truth.size());
  Table power{"power and FWER, " + r.config.scenario + ", n=" + std::to_string(r.config.n) +
                  ", reps=" + std::to_string(r.summary.repetitions),
              {"J", "power", "fwer", "mean_seconds"},
              {}};
  Table bias{"bias and MSE (x1e6) of aggregated products", {"J", "mediator", "truth", "bias", "bias_mc_se", "mse"}, {}};
  for (const auto& b : r.summary.by_blocks) {
    power.add({std::to_string(b.blocks), format_fixed(b.power, 4), format_fixed(b.fwer, 4),
               format_fixed(b.mean_seconds, 4)});
    for (std::size_t k = 0; k < labels.size(); ++k) {
      bias.add({std::to_string(b.blocks), labels[k], format_real(r.summary.truth[k]), format_fixed(1e6 * b.bias[k], 3),
                format_fixed(1e6 * b.bias_mc_se[k], 3), format_fixed(1e6 * b.mse[k], 3)});
    }
  }
  return {power, bias};
}

inline Json to_json(const TimingResult& r) {
  Json methods = Json::array();
  for (const auto& s : r.summary) {
    methods.push_back(Json{{"method", s.method},
                           {"timing",
                            {{"mean_seconds", s.mean_seconds},
                             {"median_seconds", s.median_seconds},
                             {"mean_replicate_seconds", s.mean_replicate_seconds},
                             {"median_replicate_seconds", s.median_replicate_seconds}}}});
  }
  return Json{{"schema", "medscale.timing/1"},
              {"config", to_json(r.config)},
              {"methods", std::move(methods)},
              {"runtime", {{"threads", r.config.threads}}}};
}

inline std::vector<Table> tables(const TimingResult& r) {
  Table t{"wall-clock seconds, " + r.config.scenario + ", n=" + std::to_string(r.config.n) +
              ", reps=" + std::to_string(r.config.repetitions),
          {"method", "mean", "median", "mean_replicate_loop", "median_replicate_loop"},
          {}};
  for (const auto& s : r.summary) {
    t.add({s.method, format_fixed(s.mean_seconds, 4), format_fixed(s.median_seconds, 4),
           format_fixed(s.mean_replicate_seconds, 4), format_fixed(s.median_replicate_seconds, 4)});
  }
  return {t};
}

}  // namespace medscale::harness
