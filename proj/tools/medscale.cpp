// medscale command-line front end.
//
// Option precedence: command line, then --config file, then MEDSCALE_SEED
// (seed only), then built-in defaults.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medscale/harness/commands.hpp"

namespace {

using namespace medscale;
using namespace medscale::harness;

constexpr int kUsageExit = 1;
constexpr int kInternalExit = 2;

struct OutputFlags {
  std::string format = "json";
  std::string output;
  std::string table;
};

void add_output_flags(CLI::App* cmd, OutputFlags& o) {
  cmd->add_option("--format", o.format, "json | table | csv")
      ->check(CLI::IsMember({"json", "table", "csv"}))
      ->capture_default_str();
  cmd->add_option("--output,-o", o.output, "write to this file instead of stdout");
  cmd->add_option("--table", o.table, "csv/table formats: print only the table whose title starts with this");
}

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "master seed")->envname("MEDSCALE_SEED")->capture_default_str();
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write '" + path + "'");
  fn(out);
  require(out.good(), ErrorKind::io, "write to '" + path + "' failed");
}

void print(const CommandOutput& result, const OutputFlags& o) {
  with_output(o.output, [&](std::ostream& out) { emit(out, result, parse_format(o.format), o.table); });
}

std::vector<std::int64_t> parse_blocks(const std::vector<std::string>& items) {
  std::vector<std::int64_t> out;
  for (const auto& item : items) {
    for (const auto& piece : split_list(item)) {
      std::int64_t j = 0;
      const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), j);
      require(ec == std::errc{} && ptr == piece.data() + piece.size() && j >= 1, ErrorKind::invalid_argument,
              "bad block count '" + piece + "'");
      out.push_back(j);
    }
  }
  return out;
}

/// Strips `--config FILE` / `--config=FILE` from args and returns the path.
std::optional<std::string> take_config(std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return path;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

/// Appends `--key=value` for every config key the chosen subcommand accepts
/// and the command line did not set. Keys no subcommand knows are rejected.
void apply_config(CLI::App& app, std::vector<std::string>& args, const std::string& path) {
  const KeyValues kv = load_key_values(path);
  CLI::App* chosen = nullptr;
  for (const auto& a : args) {
    if (!a.empty() && a.front() != '-') {
      chosen = app.get_subcommand_no_throw(a);
      if (chosen) break;
    }
  }
  for (const auto& [raw_key, value] : kv) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_option_no_throw(flag) != nullptr;
    require(known, ErrorKind::invalid_argument, path + ": unknown config key '" + raw_key + "'");
    if (!chosen || !chosen->get_option_no_throw(flag) || given_on_command_line(args, flag)) continue;
    args.push_back(flag + "=" + value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medscale: mediation analysis for massive data (SDB intervals, divide-and-conquer Sobel tests)"};
  app.require_subcommand(1);
  app.add_option("--config", "key = value file supplying defaults for the subcommand's options");

  // simulate ---------------------------------------------------------------
  SimulateOptions sim;
  std::string sim_reading = "variance";
  std::optional<std::int64_t> sim_n;
  bool sim_describe = false, sim_list = false;
  std::string sim_output;
  auto* simulate_cmd = app.add_subcommand("simulate", "generate a dataset from a scenario and write it as CSV");
  simulate_cmd->add_option("--scenario", sim.scenario, "catalog key, e.g. ci/linear/case1")->capture_default_str();
  simulate_cmd->add_option("--scenario-file", sim.scenario_file, "key = value scenario file (see --describe)");
  simulate_cmd->add_option("--n", sim_n, "rows (default: scenario's n)");
  add_seed(simulate_cmd, sim.seed);
  simulate_cmd->add_option("--reading", sim_reading, "second argument of N(mu, s): variance | sd")->capture_default_str();
  simulate_cmd->add_option("--output,-o", sim_output, "CSV path (default stdout)");
  simulate_cmd->add_flag("--describe", sim_describe, "print the resolved scenario as a key = value file");
  simulate_cmd->add_flag("--list", sim_list, "list catalog keys");

  // analyze ----------------------------------------------------------------
  AnalyzeOptions an;
  OutputFlags an_out;
  std::string an_input, an_mapping, an_kind, an_method = "both", an_centering = "subset";
  std::vector<std::string> an_blocks;
  bool an_no_shuffle = false;
  std::optional<std::int64_t> an_subset_size;
  auto* analyze_cmd = app.add_subcommand("analyze", "SDB intervals and divide-and-conquer Sobel tests for a CSV file");
  analyze_cmd->add_option("--input", an_input, "CSV file with a header row")->required();
  analyze_cmd->add_option("--mapping", an_mapping,
                          "mapping file, or inline 'outcome=Y;exposure=X;mediators=M1,M2;covariates=Z1'")
      ->required();
  analyze_cmd->add_option("--outcome-kind", an_kind, "continuous | binary (overrides the mapping)");
  analyze_cmd->add_option("--method", an_method, "sdb | dc | both")->capture_default_str();
  analyze_cmd->add_option("--subset-exponent", an.subset_exponent, "b = floor(n^r)")->capture_default_str();
  analyze_cmd->add_option("--subset-size", an_subset_size, "explicit b (overrides --subset-exponent)");
  analyze_cmd->add_option("--replicates", an.replicates, "S")->capture_default_str();
  analyze_cmd->add_option("--centering", an_centering, "SDB root centre: subset | full_data")->capture_default_str();
  analyze_cmd->add_flag("--baseline-bootstrap", an.baseline, "also run the full percentile bootstrap");
  analyze_cmd->add_option("--blocks", an_blocks, "block counts J, e.g. 1,3,5,10")->delimiter(',');
  analyze_cmd->add_flag("--no-shuffle", an_no_shuffle, "keep file order when partitioning into blocks");
  analyze_cmd->add_option("--level", an.level, "delta for intervals and tests")->capture_default_str();
  add_seed(analyze_cmd, an.seed);
  analyze_cmd->add_option("--threads", an.threads, "thread budget")->capture_default_str();
  add_output_flags(analyze_cmd, an_out);

  // ci-study ---------------------------------------------------------------
  CiStudyConfig ci;
  OutputFlags ci_out;
  std::string ci_records, ci_reading = "variance", ci_centering = "subset";
  auto* ci_cmd = app.add_subcommand("ci-study", "coverage and length of SDB intervals over simulated repetitions");
  ci_cmd->add_option("--scenario", ci.scenario)->capture_default_str();
  ci_cmd->add_option("--n", ci.n)->capture_default_str();
  ci_cmd->add_option("--replicates", ci.replicates, "S")->capture_default_str();
  ci_cmd->add_option("--repetitions", ci.repetitions)->capture_default_str();
  ci_cmd->add_option("--subset-exponent", ci.subset_exponent)->capture_default_str();
  ci_cmd->add_option("--subset-size", ci.subset_size);
  ci_cmd->add_option("--level", ci.level)->capture_default_str();
  ci_cmd->add_option("--centering", ci_centering, "subset | full_data")->capture_default_str();
  ci_cmd->add_flag("--baseline-bootstrap", ci.baseline, "also run the full percentile bootstrap");
  ci_cmd->add_option("--reading", ci_reading, "variance | sd")->capture_default_str();
  add_seed(ci_cmd, ci.seed);
  ci_cmd->add_option("--threads", ci.threads)->capture_default_str();
  ci_cmd->add_option("--records", ci_records, "write per-repetition records (JSON lines) here");
  add_output_flags(ci_cmd, ci_out);

  // test-study -------------------------------------------------------------
  TestStudyConfig ts;
  OutputFlags ts_out;
  std::string ts_records, ts_reading = "variance";
  std::vector<std::string> ts_blocks;
  auto* ts_cmd = app.add_subcommand("test-study", "bias, MSE, power and FWER of divide-and-conquer Sobel tests");
  ts_cmd->add_option("--scenario", ts.scenario)->capture_default_str();
  ts_cmd->add_option("--n", ts.n)->capture_default_str();
  ts_cmd->add_option("--blocks", ts_blocks, "block counts J (default 1,5,50,100)")->delimiter(',');
  ts_cmd->add_option("--repetitions", ts.repetitions)->capture_default_str();
  ts_cmd->add_option("--level", ts.significance, "significance level")->capture_default_str();
  ts_cmd->add_option("--reading", ts_reading, "variance | sd")->capture_default_str();
  add_seed(ts_cmd, ts.seed);
  ts_cmd->add_option("--threads", ts.threads)->capture_default_str();
  ts_cmd->add_option("--records", ts_records, "write per-repetition records (JSON lines) here");
  add_output_flags(ts_cmd, ts_out);

  // timing -----------------------------------------------------------------
  TimingConfig tm;
  OutputFlags tm_out;
  std::string tm_reading = "variance", tm_centering = "subset";
  std::vector<std::string> tm_methods, tm_blocks;
  auto* tm_cmd = app.add_subcommand("timing", "wall-clock comparison of SDB, full bootstrap and per-node DC cost");
  tm_cmd->add_option("--scenario", tm.scenario)->capture_default_str();
  tm_cmd->add_option("--n", tm.n)->capture_default_str();
  tm_cmd->add_option("--methods", tm_methods, "sdb, bootstrap, dc:J (default sdb,bootstrap)")->delimiter(',');
  tm_cmd->add_option("--blocks", tm_blocks, "shorthand adding dc:J for each J")->delimiter(',');
  tm_cmd->add_option("--repetitions", tm.repetitions)->capture_default_str();
  tm_cmd->add_option("--replicates", tm.replicates, "S")->capture_default_str();
  tm_cmd->add_option("--subset-exponent", tm.subset_exponent)->capture_default_str();
  tm_cmd->add_option("--subset-size", tm.subset_size);
  tm_cmd->add_option("--level", tm.level)->capture_default_str();
  tm_cmd->add_option("--centering", tm_centering, "subset | full_data")->capture_default_str();
  tm_cmd->add_option("--reading", tm_reading, "variance | sd")->capture_default_str();
  tm_cmd->add_option("--threads", tm.threads, "workers for the replicate loops")->capture_default_str();
  add_seed(tm_cmd, tm.seed);
  add_output_flags(tm_cmd, tm_out);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (const auto cfg = take_config(args)) apply_config(app, args, *cfg);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  try {
    if (*simulate_cmd) {
      if (sim_list) {
        for (const auto& [key, _] : scenario_catalog()) std::cout << key << '\n';
        return 0;
      }
      sim.reading = parse_reading(sim_reading);
      sim.n = sim_n;
      if (sim_describe) {
        with_output(sim_output, [&](std::ostream& out) { write_key_values(out, scenario_to_key_values(resolve_scenario(sim))); });
        return 0;
      }
      const Dataset data = simulate(sim);
      with_output(sim_output, [&](std::ostream& out) { write_csv(out, data); });
    } else if (*analyze_cmd) {
      ColumnMapping mapping = load_mapping(an_mapping);
      if (!an_kind.empty()) mapping.outcome_kind = parse_outcome_kind(an_kind);
      an.method = parse_analyze_method(an_method);
      an.centering = parse_root_centering(an_centering);
      an.subset_size = an_subset_size;
      an.shuffle = !an_no_shuffle;
      if (!an_blocks.empty()) an.blocks = parse_blocks(an_blocks);
      print(analyze_file(an_input, mapping, an), an_out);
    } else if (*ci_cmd) {
      ci.reading = parse_reading(ci_reading);
      ci.centering = parse_root_centering(ci_centering);
      const CiStudyResult result = run_ci_study(ci);
      if (!ci_records.empty()) with_output(ci_records, [&](std::ostream& out) { write_records(out, result.records); });
      print(ci_study_output(result), ci_out);
    } else if (*ts_cmd) {
      ts.reading = parse_reading(ts_reading);
      if (!ts_blocks.empty()) ts.blocks = parse_blocks(ts_blocks);
      const TestStudyResult result = run_test_study(ts);
      if (!ts_records.empty()) with_output(ts_records, [&](std::ostream& out) { write_records(out, result.records); });
      print(test_study_output(result), ts_out);
    } else if (*tm_cmd) {
      tm.reading = parse_reading(tm_reading);
      tm.centering = parse_root_centering(tm_centering);
      if (!tm_methods.empty()) tm.methods = tm_methods;
      for (const auto j : parse_blocks(tm_blocks)) tm.methods.push_back("dc:" + std::to_string(j));
      print(timing_output(run_timing(tm)), tm_out);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalExit;
  }
  return 0;
}
