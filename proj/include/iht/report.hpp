#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iht/dimension_tests.hpp"
#include "iht/inference.hpp"
#include "iht/standardize.hpp"

namespace iht {

inline constexpr int report_schema_version = 1;

struct DatasetSummary {
  Index n = 0;
  Index p = 0;
  std::string response;
  std::vector<std::string> columns;
  std::vector<std::string> log_columns;
};

/// Everything `iht test` produces for one dataset. The trail always covers
/// j = 0..p-1, past the stopping point, so both references can be read off.
struct Report {
  int schema_version = report_schema_version;
  DatasetSummary dataset;
  double alpha = 0.05;
  Reference reference = Reference::weighted;
  std::vector<TestResult> trail;
  Index k_hat_chisq = 0;
  Index k_hat_weighted = 0;
  VectorXd lambdas;
  MatrixXd directions_z;  // p x p, column j is v_j
  MatrixXd directions_x;  // p x p, unit columns
  // Plot coordinates: first two IHT predictors v_j^T Z_hat and OLS residuals.
  MatrixXd iht_predictors;  // n x min(p, 2)
  VectorXd residuals;

  Index k_hat() const { return reference == Reference::chisq ? k_hat_chisq : k_hat_weighted; }
};

inline Report make_report(const Dataset& d, double alpha, Reference reference,
                          std::vector<std::string> log_columns = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (reference == Reference::both)
    throw std::invalid_argument("report reference must be chisq or weighted");
  const auto a = analyze(d);
  const Index p = d.p();

  Report r;
  r.dataset = {d.n(), p, d.response_name, d.column_names, std::move(log_columns)};
  r.alpha = alpha;
  r.reference = reference;
  for (Index j = 0; j < p; ++j) {
    try {
      r.trail.push_back(run_test(a.sample, a.fit, a.spectrum, j, Reference::both));
    } catch (const NumericError& e) {
      throw DimensionEstimateError("test j = " + std::to_string(j) + ": " + e.what(), r.trail);
    }
  }
  r.k_hat_chisq = sequential_khat(r.trail, alpha, Reference::chisq);
  r.k_hat_weighted = sequential_khat(r.trail, alpha, Reference::weighted);
  r.lambdas = a.spectrum.lambdas;
  std::tie(r.directions_z, r.directions_x) = directions(a.spectrum, p, a.sample.sigma_inv_sqrt);
  r.iht_predictors = a.sample.Z_hat * a.spectrum.left_vectors.leftCols(std::min<Index>(p, 2));
  r.residuals = a.fit.e_hat;
  return r;
}

namespace detail {

// JSON has no NaN or infinity; they travel as null / strings.
inline nlohmann::json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DataError("bad number '" + s + "' in report");
  }
  return j.get<double>();
}

inline nlohmann::json to_json_matrix(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(num(m(i, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatrixXd from_json_matrix(const nlohmann::json& j, Index cols) {
  MatrixXd m(static_cast<Index>(j.size()), cols);
  for (Index i = 0; i < m.rows(); ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols) throw DataError("ragged matrix in report");
    for (Index c = 0; c < cols; ++c) m(i, c) = num(row.at(static_cast<std::size_t>(c)));
  }
  return m;
}

inline nlohmann::json to_json_vector(const VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline VectorXd from_json_vector(const nlohmann::json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = num(j.at(static_cast<std::size_t>(i)));
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const Report& r) {
  using nlohmann::json;
  json trail = json::array();
  for (const auto& t : r.trail) {
    json w = json::array();
    for (double v : t.weights) w.push_back(detail::num(v));
    trail.push_back({{"j", t.j},
                     {"T", detail::num(t.T)},
                     {"c2_hat", detail::num(t.c2_hat)},
                     {"df", t.df},
                     {"p_chisq", detail::num(t.p_chisq)},
                     {"p_weighted", detail::num(t.p_weighted)},
                     {"weights", std::move(w)}});
  }
  return {{"schema_version", r.schema_version},
          {"dataset",
           {{"n", r.dataset.n},
            {"p", r.dataset.p},
            {"response", r.dataset.response},
            {"columns", r.dataset.columns},
            {"log_columns", r.dataset.log_columns}}},
          {"alpha", r.alpha},
          {"reference", std::string(to_string(r.reference))},
          {"trail", std::move(trail)},
          {"k_hat", {{"chisq", r.k_hat_chisq}, {"weighted", r.k_hat_weighted}}},
          {"lambdas", detail::to_json_vector(r.lambdas)},
          {"directions_z", detail::to_json_matrix(r.directions_z)},
          {"directions_x", detail::to_json_matrix(r.directions_x)},
          {"diagnostics",
           {{"iht_predictors", detail::to_json_matrix(r.iht_predictors)},
            {"residuals", detail::to_json_vector(r.residuals)}}}};
}

/// Inverse of to_json. Unknown schema versions and missing fields are data errors.
inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != report_schema_version)
      throw DataError("unsupported report schema_version " + std::to_string(r.schema_version));
    const auto& ds = j.at("dataset");
    r.dataset.n = ds.at("n").get<Index>();
    r.dataset.p = ds.at("p").get<Index>();
    r.dataset.response = ds.at("response").get<std::string>();
    r.dataset.columns = ds.at("columns").get<std::vector<std::string>>();
    r.dataset.log_columns = ds.at("log_columns").get<std::vector<std::string>>();
    r.alpha = j.at("alpha").get<double>();
    r.reference = parse_reference(j.at("reference").get<std::string>());
    for (const auto& t : j.at("trail")) {
      TestResult x;
      x.j = t.at("j").get<Index>();
      x.T = detail::num(t.at("T"));
      x.c2_hat = detail::num(t.at("c2_hat"));
      x.df = t.at("df").get<Index>();
      x.p_chisq = detail::num(t.at("p_chisq"));
      x.p_weighted = detail::num(t.at("p_weighted"));
      for (const auto& w : t.at("weights")) x.weights.push_back(detail::num(w));
      r.trail.push_back(std::move(x));
    }
    r.k_hat_chisq = j.at("k_hat").at("chisq").get<Index>();
    r.k_hat_weighted = j.at("k_hat").at("weighted").get<Index>();
    const Index p = r.dataset.p;
    r.lambdas = detail::from_json_vector(j.at("lambdas"));
    r.directions_z = detail::from_json_matrix(j.at("directions_z"), p);
    r.directions_x = detail::from_json_matrix(j.at("directions_x"), p);
    const auto& diag = j.at("diagnostics");
    r.iht_predictors = detail::from_json_matrix(diag.at("iht_predictors"), std::min<Index>(p, 2));
    r.residuals = detail::from_json_vector(diag.at("residuals"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

inline std::string format_p(double p) {
  if (std::isnan(p)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", p);
  return buf;
}

/// Human-readable report: the test table (p-values to three decimals), the
/// estimated dimension under each reference and the leading directions.
inline std::string render_text(const Report& r) {
  std::ostringstream out;
  char buf[160];
  out << "n = " << r.dataset.n << ", p = " << r.dataset.p << ", response: " << r.dataset.response
      << "\n";
  if (!r.dataset.log_columns.empty()) {
    out << "log-transformed:";
    for (const auto& c : r.dataset.log_columns) out << ' ' << c;
    out << "\n";
  }
  out << "\n";
  std::snprintf(buf, sizeof buf, "%3s %12s %4s %10s %10s\n", "j", "T_j", "df", "chi2", "weighted");
  out << buf;
  for (const auto& t : r.trail) {
    std::snprintf(buf, sizeof buf, "%3ld %12.4g %4ld %10s %10s\n", static_cast<long>(t.j), t.T,
                  static_cast<long>(t.df), format_p(t.p_chisq).c_str(),
                  format_p(t.p_weighted).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "\nalpha = %g: k_hat = %ld (chi2), %ld (weighted); decision uses %s\n",
                r.alpha, static_cast<long>(r.k_hat_chisq), static_cast<long>(r.k_hat_weighted),
                std::string(to_string(r.reference)).c_str());
  out << buf;

  const Index k = r.k_hat();
  if (k > 0) {
    out << "\ndirections (original predictor scale, unit length)\n";
    std::snprintf(buf, sizeof buf, "%-12s", "");
    out << buf;
    for (Index c = 0; c < k; ++c) {
      std::snprintf(buf, sizeof buf, " %10s", ("eta" + std::to_string(c + 1)).c_str());
      out << buf;
    }
    out << "\n";
    for (Index i = 0; i < r.dataset.p; ++i) {
      const auto& name = static_cast<std::size_t>(i) < r.dataset.columns.size()
                             ? r.dataset.columns[static_cast<std::size_t>(i)]
                             : "x" + std::to_string(i + 1);
      std::snprintf(buf, sizeof buf, "%-12s", name.c_str());
      out << buf;
      for (Index c = 0; c < k; ++c) {
        std::snprintf(buf, sizeof buf, " %10.4f", r.directions_x(i, c));
        out << buf;
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace iht
