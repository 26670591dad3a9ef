#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iht/error.hpp"
#include "iht/report.hpp"
#include "iht/simulation.hpp"
#include "iht/study_io.hpp"

namespace iht {

namespace cli_detail {

namespace fs = std::filesystem;

/// --out wins; otherwise IHT_OUTPUT_DIR; otherwise nothing is written to disk.
inline std::optional<fs::path> output_dir(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv("IHT_OUTPUT_DIR"); env && *env) return fs::path(env);
  return std::nullopt;
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(what + " is not valid JSON: " + e.what());
  }
}

inline std::string diagnostics_csv(const Report& r) {
  std::string out = r.iht_predictors.cols() > 1 ? "iht1,iht2,residual\n" : "iht1,residual\n";
  for (Index i = 0; i < r.residuals.size(); ++i) {
    for (Index c = 0; c < r.iht_predictors.cols(); ++c) out += detail::fmt(r.iht_predictors(i, c)) + ',';
    out += detail::fmt(r.residuals(i)) + '\n';
  }
  return out;
}

struct TestOptions {
  std::string input;
  std::string response;
  double alpha = 0.05;
  std::string reference = "weighted";
  std::vector<std::string> log_columns;
  std::string delimiter = ",";
  std::string out;
  bool json = false;
};

inline int cmd_test(const TestOptions& o, std::ostream& out) {
  if (o.delimiter.size() != 1) throw std::invalid_argument("--delimiter must be one character");
  const auto ref = parse_reference(o.reference);
  if (ref == Reference::both) throw std::invalid_argument("--reference must be chisq or weighted");
  auto d = load_dataset(o.input, o.response, o.delimiter[0]);
  apply_log(d, o.log_columns);
  const auto report = make_report(d, o.alpha, ref, o.log_columns);
  const auto js = to_json(report).dump(2) + "\n";
  out << (o.json ? js : render_text(report));
  if (const auto dir = output_dir(o.out)) {
    write_file(*dir / "report.json", js);
    write_file(*dir / "diagnostics.csv", diagnostics_csv(report));
  }
  return 0;
}

struct SimulateOptions {
  int table = 0;
  std::string config;
  std::string study = "level";
  std::string model = "model22";
  Index n = 100;
  Index p = 4;
  double sigma = 0.4;
  std::optional<Index> j_test;
  Index k_fixed = 2;
  std::vector<double> alphas;
  int reps = 1000;
  std::uint64_t seed = 42;
  unsigned workers = 0;
  std::string out;
  bool reps_set = false;
  bool seed_set = false;
  bool workers_set = false;
};

struct StudyOutput {
  std::string level_csv, khat_csv, direction_csv;
  nlohmann::json json = nlohmann::json::array();
};

inline void run_study(const StudySpec& s, StudyOutput& o) {
  switch (s.kind) {
    case StudyKind::level: {
      const auto t = level_study(s.config);
      o.level_csv += to_csv_rows(t);
      o.json.push_back(to_json(t));
      break;
    }
    case StudyKind::khat: {
      const auto t = khat_study(s.config, s.config.alphas);
      o.khat_csv += to_csv_rows(t);
      o.json.push_back(to_json(t));
      break;
    }
    case StudyKind::direction: {
      const auto t = direction_accuracy(s.config);
      o.direction_csv += to_csv_rows(t);
      o.json.push_back(to_json(t));
      break;
    }
  }
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  std::vector<StudySpec> studies;
  std::string stem = "study";
  if (o.table != 0 && !o.config.empty())
    throw std::invalid_argument("--table and --config are mutually exclusive");
  if (o.table != 0) {
    studies = table_preset(o.table, o.reps, o.seed, o.workers);
    stem = "table" + std::to_string(o.table);
  } else if (!o.config.empty()) {
    studies = studies_from_json(parse_json(read_file(o.config), "'" + o.config + "'"));
    for (auto& s : studies) {
      if (o.reps_set) s.config.reps = o.reps;
      if (o.seed_set) s.config.seed = o.seed;
      if (o.workers_set) s.config.workers = o.workers;
    }
  } else {
    StudySpec s;
    s.kind = parse_study_kind(o.study);
    auto& c = s.config;
    c.model = parse_model(o.model);
    c.n = o.n;
    c.p = o.p;
    c.sigma = o.sigma;
    c.j_test = o.j_test.value_or(true_dimension(c.model));
    c.k_fixed = o.k_fixed;
    c.reps = o.reps;
    c.seed = o.seed;
    c.workers = o.workers;
    if (!o.alphas.empty())
      c.alphas = o.alphas;
    else if (s.kind == StudyKind::khat)
      c.alphas = {0.001, 0.01, 0.05, 0.10, 0.15};
    c.validate();
    studies.push_back(s);
  }

  StudyOutput res;
  for (const auto& s : studies) run_study(s, res);

  std::string csv;
  auto section = [&](const std::string& header, const std::string& rows) {
    if (rows.empty()) return;
    if (!csv.empty()) csv += '\n';
    csv += header + rows;
  };
  section(level_csv_header(), res.level_csv);
  section(khat_csv_header(), res.khat_csv);
  section(direction_csv_header(), res.direction_csv);
  out << csv;

  if (const auto dir = output_dir(o.out)) {
    if (!res.level_csv.empty()) write_file(*dir / (stem + "_level.csv"), level_csv_header() + res.level_csv);
    if (!res.khat_csv.empty()) write_file(*dir / (stem + "_khat.csv"), khat_csv_header() + res.khat_csv);
    if (!res.direction_csv.empty())
      write_file(*dir / (stem + "_direction.csv"), direction_csv_header() + res.direction_csv);
    write_file(*dir / (stem + ".json"), res.json.dump(2) + "\n");
  }
  return 0;
}

inline int cmd_report(const std::string& path, const std::string& format, std::ostream& out) {
  const auto report = report_from_json(parse_json(read_file(path), "'" + path + "'"));
  if (format == "json")
    out << to_json(report).dump(2) << "\n";
  else
    out << render_text(report);
  return 0;
}

}  // namespace cli_detail

/// Entry point of the `iht` command. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Dimension tests and directions from the invariant iterative Hessian transformation"};
  app.require_subcommand(1);

  TestOptions t;
  auto* test = app.add_subcommand("test", "Sequential dimension tests on a delimited data file");
  test->add_option("input", t.input, "CSV file with a header row")->required();
  test->add_option("-r,--response", t.response, "Response column name")->required();
  test->add_option("-a,--alpha", t.alpha, "Level of each sequential test")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  test->add_option("--reference", t.reference, "Decision reference: chisq or weighted")
      ->check(CLI::IsMember({"chisq", "weighted"}))->capture_default_str();
  test->add_option("--log-columns", t.log_columns, "Predictors replaced by their natural log")
      ->delimiter(',');
  test->add_option("-d,--delimiter", t.delimiter, "Field delimiter")->capture_default_str();
  test->add_option("-o,--out", t.out, "Output directory (default: $IHT_OUTPUT_DIR)");
  test->add_flag("--json", t.json, "Print the JSON report instead of the text table");

  SimulateOptions s;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo level, k-hat and direction studies");
  sim->add_option("--table", s.table, "Preset grid of a published table (1-7)")->check(CLI::Range(1, 7));
  sim->add_option("--config", s.config, "JSON study file (object or array of objects)");
  sim->add_option("--study", s.study, "level, khat or direction")
      ->check(CLI::IsMember({"level", "khat", "direction"}))->capture_default_str();
  sim->add_option("--model", s.model, "null, model22, model22_chisq_err, model23, linear")
      ->capture_default_str();
  sim->add_option("-n", s.n, "Sample size")->capture_default_str();
  sim->add_option("-p", s.p, "Number of predictors")->capture_default_str();
  sim->add_option("--sigma", s.sigma, "Error scale")->capture_default_str();
  sim->add_option("--j-test", s.j_test, "Hypothesis rank tested (default: true dimension)");
  sim->add_option("--k-fixed", s.k_fixed, "Directions used by the direction study")->capture_default_str();
  sim->add_option("--alphas", s.alphas, "Nominal levels")->delimiter(',');
  auto* reps = sim->add_option("--reps", s.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  auto* seed = sim->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  auto* workers = sim->add_option("--workers", s.workers, "Threads (0: all cores)")->capture_default_str();
  sim->add_option("-o,--out", s.out, "Output directory (default: $IHT_OUTPUT_DIR)");

  std::string report_path;
  std::string report_format = "text";
  auto* rep = app.add_subcommand("report", "Render a saved JSON report");
  rep->add_option("report", report_path, "report.json written by `test`")->required();
  rep->add_option("--format", report_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }
  s.reps_set = reps->count() > 0;
  s.seed_set = seed->count() > 0;
  s.workers_set = workers->count() > 0;

  try {
    if (test->parsed()) return cmd_test(t, out);
    if (sim->parsed()) return cmd_simulate(s, out);
    return cmd_report(report_path, report_format, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }
}

}  // namespace iht
