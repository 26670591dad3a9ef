#pragma once

#include <algorithm>
#include <charconv>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iht/simulation.hpp"

namespace iht {

// CSV columns shared by every study table.
inline constexpr const char* config_columns = "model,n,p,sigma,j_test,reps,seed,reps_used,failures";

namespace detail {

// Shortest representation that reads back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string config_prefix(const SimConfig& c, int reps_used, int failures) {
  std::ostringstream s;
  s << to_string(c.model) << ',' << c.n << ',' << c.p << ',' << fmt(c.sigma) << ',' << c.j_test
    << ',' << c.reps << ',' << c.seed << ',' << reps_used << ',' << failures;
  return s.str();
}

inline nlohmann::json config_json(const SimConfig& c) {
  return {{"model", std::string(to_string(c.model))},
          {"n", c.n},
          {"p", c.p},
          {"sigma", c.sigma},
          {"reps", c.reps},
          {"seed", c.seed},
          {"alphas", c.alphas},
          {"j_test", c.j_test},
          {"k_fixed", c.k_fixed}};
}

}  // namespace detail

/// Columns: config..., reference, alpha, rate_pct, se, nominal_se.
inline std::string level_csv_header() {
  return std::string(config_columns) + ",reference,alpha,rate_pct,se,nominal_se\n";
}

inline std::string to_csv_rows(const LevelTable& t) {
  std::string out;
  const auto prefix = detail::config_prefix(t.config, t.reps_used, t.failures);
  for (const auto& r : t.rows)
    out += prefix + ',' + std::string(to_string(r.reference)) + ',' + detail::fmt(r.alpha) + ',' +
           detail::fmt(r.rate) + ',' + detail::fmt(r.se) + ',' + detail::fmt(r.nominal_se) + '\n';
  return out;
}

/// Columns: config..., reference, alpha, k0, k1, k2, k3plus.
inline std::string khat_csv_header() {
  return std::string(config_columns) + ",reference,alpha,k0,k1,k2,k3plus\n";
}

inline std::string to_csv_rows(const KhatTable& t) {
  std::string out;
  const auto prefix = detail::config_prefix(t.config, t.reps_used, t.failures);
  for (const auto& r : t.rows) {
    out += prefix + ',' + std::string(to_string(r.reference)) + ',' + detail::fmt(r.alpha);
    for (int c : r.counts) out += ',' + std::to_string(c);
    out += '\n';
  }
  return out;
}

/// Columns: config..., coordinate, q05, q50, q95.
inline std::string direction_csv_header() {
  return std::string(config_columns) + ",coordinate,q05,q50,q95\n";
}

inline std::string to_csv_rows(const DirectionTable& t) {
  std::string out;
  const auto prefix = detail::config_prefix(t.config, t.reps_used, t.failures);
  for (const auto& r : t.rows)
    out += prefix + ",Z" + std::to_string(r.coordinate) + ',' + detail::fmt(r.q05) + ',' +
           detail::fmt(r.q50) + ',' + detail::fmt(r.q95) + '\n';
  return out;
}

inline nlohmann::json to_json(const LevelTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"reference", std::string(to_string(r.reference))},
                    {"alpha", r.alpha},
                    {"rate_pct", r.rate},
                    {"se", r.se},
                    {"nominal_se", r.nominal_se}});
  return {{"study", "level"},
          {"config", detail::config_json(t.config)},
          {"reps_used", t.reps_used},
          {"failures", t.failures},
          {"rows", std::move(rows)}};
}

inline nlohmann::json to_json(const KhatTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"reference", std::string(to_string(r.reference))},
                    {"alpha", r.alpha},
                    {"counts", r.counts}});
  return {{"study", "khat"},
          {"config", detail::config_json(t.config)},
          {"reps_used", t.reps_used},
          {"failures", t.failures},
          {"rows", std::move(rows)}};
}

inline nlohmann::json to_json(const DirectionTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"coordinate", "Z" + std::to_string(r.coordinate)},
                    {"q05", r.q05},
                    {"q50", r.q50},
                    {"q95", r.q95}});
  return {{"study", "direction"},
          {"config", detail::config_json(t.config)},
          {"reps_used", t.reps_used},
          {"failures", t.failures},
          {"rows", std::move(rows)}};
}

inline StudyKind parse_study_kind(const std::string& s) {
  if (s == "level") return StudyKind::level;
  if (s == "khat") return StudyKind::khat;
  if (s == "direction") return StudyKind::direction;
  throw std::invalid_argument("unknown study '" + s + "' (level, khat, direction)");
}

/// Declarative study file: either one object or an array of objects with
/// keys study, model, n, p, sigma, reps, seed, alphas, j_test, k_fixed, workers.
/// Missing keys keep the SimConfig defaults; j_test defaults to the model's
/// true dimension.
inline std::vector<StudySpec> studies_from_json(const nlohmann::json& j) {
  auto one = [](const nlohmann::json& o) {
    if (!o.is_object()) throw std::invalid_argument("study entry must be an object");
    for (const auto& [key, _] : o.items()) {
      static const std::vector<std::string> known = {"study", "model", "n", "p", "sigma", "reps",
                                                      "seed", "alphas", "j_test", "k_fixed",
                                                      "workers"};
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw std::invalid_argument("unknown study key '" + key + "'");
    }
    StudySpec s;
    s.kind = parse_study_kind(o.value("study", std::string("level")));
    auto& c = s.config;
    c.model = parse_model(o.value("model", std::string(to_string(c.model))));
    if (c.model == Model::model23) c.p = 5;
    c.j_test = true_dimension(c.model);
    c.n = o.value("n", c.n);
    c.p = o.value("p", c.p);
    c.sigma = o.value("sigma", c.sigma);
    c.reps = o.value("reps", c.reps);
    c.seed = o.value("seed", c.seed);
    c.alphas = o.value("alphas", c.alphas);
    c.j_test = o.value("j_test", c.j_test);
    c.k_fixed = o.value("k_fixed", c.k_fixed);
    c.workers = o.value("workers", c.workers);
    c.validate();
    return s;
  };
  std::vector<StudySpec> out;
  try {
    if (j.is_array())
      for (const auto& o : j) out.push_back(one(o));
    else
      out.push_back(one(j));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad study config: ") + e.what());
  }
  return out;
}

}  // namespace iht
