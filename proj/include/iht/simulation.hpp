#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "iht/dimension_tests.hpp"
#include "iht/inference.hpp"
#include "iht/standardize.hpp"

namespace iht {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The key is the 64-bit master seed and the upper half of the counter is a
/// 64-bit stream id, so every (seed, stream) pair is an independent sequence
/// that can be produced on any thread in any order.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }

  static Block bijection(Block ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += w0;
        key[1] += w1;
      }
      const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  result_type operator()() {
    if (used_ == 4) {
      buffer_ = bijection({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                           static_cast<std::uint32_t>(stream_),
                           static_cast<std::uint32_t>(stream_ >> 32)},
                          key_);
      ++block_;
      used_ = 0;
    }
    return buffer_[used_++];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;
    const std::uint64_t lo = (*this)() >> 6;
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inversion of the uniform draw.
  double normal() { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * uniform()); }

 private:
  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
};

enum class Model { null_model, model22, model22_chisq_err, model23, linear };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::null_model: return "null";
    case Model::model22: return "model22";
    case Model::model22_chisq_err: return "model22_chisq_err";
    case Model::model23: return "model23";
    case Model::linear: return "linear";
  }
  return "?";
}

inline Model parse_model(std::string_view s) {
  for (auto m : {Model::null_model, Model::model22, Model::model22_chisq_err, Model::model23,
                 Model::linear})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown model '" + std::string(s) + "'");
}

/// Dimension of the IHT subspace under each model.
inline Index true_dimension(Model m) {
  switch (m) {
    case Model::null_model: return 0;
    case Model::linear: return 1;
    default: return 2;
  }
}

struct SimConfig {
  Model model = Model::model22;
  Index n = 100;
  Index p = 4;
  double sigma = 0.4;
  int reps = 1000;
  std::uint64_t seed = 42;
  std::vector<double> alphas = {0.01, 0.05, 0.10, 0.15};
  Index j_test = 2;
  Index k_fixed = 2;  // directions used by direction_accuracy
  unsigned workers = 0;  // 0: hardware concurrency

  void validate() const {
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if ((model == Model::model22 || model == Model::model22_chisq_err) && p < 2)
      throw std::invalid_argument("model22 needs p >= 2");
    if (model == Model::model23 && p != 5) throw std::invalid_argument("model23 fixes p = 5");
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    if (n < p + 2) throw std::invalid_argument("n must be >= p + 2");
    if (j_test < 0 || j_test > p - 1) throw std::invalid_argument("j_test outside [0, p-1]");
    for (double a : alphas)
      if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("alphas must lie in (0, 1]");
  }
};

/// Replication `rep_index` of the configured model; depends only on
/// (seed, rep_index, model, n, p, sigma).
inline Dataset generate(const SimConfig& cfg, std::uint64_t rep_index) {
  Philox4x32 rng(cfg.seed, rep_index);
  const Index n = cfg.n;
  const Index p = cfg.p;
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < p; ++c) d.X(i, c) = rng.normal();
  for (Index c = 0; c < p; ++c) d.column_names.push_back("Z" + std::to_string(c + 1));
  d.response_name = "Y";

  for (Index i = 0; i < n; ++i) {
    const double z1 = d.X(i, 0);
    const double z2 = p > 1 ? d.X(i, 1) : 0.0;
    switch (cfg.model) {
      case Model::null_model: d.y(i) = rng.normal(); break;
      case Model::linear: d.y(i) = z1 + cfg.sigma * rng.normal(); break;
      case Model::model22:
        d.y(i) = z1 + 0.2 * (z1 + z2) * (z1 + z2) + cfg.sigma * rng.normal();
        break;
      case Model::model22_chisq_err: {
        const double a = rng.normal();
        const double b = rng.normal();
        d.y(i) = z1 + 0.2 * (z1 + z2) * (z1 + z2) + 0.5 * (a * a + b * b - 2.0);
        break;
      }
      case Model::model23:
        d.y(i) = std::exp(0.3 * (2.0 * z1 + 3.0 * z2)) + 1.6 * std::sin(z1 - z2) +
                 cfg.sigma * rng.normal();
        break;
    }
  }
  return d;
}

namespace detail {

inline unsigned worker_count(unsigned requested, int reps) {
  unsigned w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::min<unsigned>(w, static_cast<unsigned>(std::max(reps, 1)));
}

/// Runs body(rep) for rep in [0, reps) on `workers` threads. Returns the
/// number of replications whose body threw an iht::Error; other exceptions
/// are rethrown.
template <class Body>
int for_each_rep(int reps, unsigned workers, Body body) {
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto work = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        body(r);
      } catch (const Error&) {
        ++failures;
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const unsigned w = worker_count(workers, reps);
  if (w <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(work);
  }
  if (fatal) std::rethrow_exception(fatal);
  return failures.load();
}

}  // namespace detail

struct LevelRow {
  double alpha = 0.0;
  Reference reference = Reference::chisq;
  double rate = 0.0;        // percent
  double se = 0.0;          // sqrt(r (100 - r) / reps) at the estimated rate
  double nominal_se = 0.0;  // same at r = 100 alpha
};

struct LevelTable {
  SimConfig config;
  std::vector<LevelRow> rows;
  int reps_used = 0;
  int failures = 0;

  const LevelRow& at(double alpha, Reference ref) const {
    for (const auto& r : rows)
      if (r.reference == ref && std::abs(r.alpha - alpha) < 1e-12) return r;
    throw std::out_of_range("no level row for that alpha/reference");
  }
};

/// Rejection rates of the test of H_{0, j_test} under both references,
/// computed on the same data in every replication.
inline LevelTable level_study(const SimConfig& cfg) {
  cfg.validate();
  std::vector<double> pc(static_cast<std::size_t>(cfg.reps), std::nan(""));
  std::vector<double> pw(static_cast<std::size_t>(cfg.reps), std::nan(""));
  LevelTable out;
  out.config = cfg;
  out.failures = detail::for_each_rep(cfg.reps, cfg.workers, [&](int rep) {
    const auto a = analyze(generate(cfg, static_cast<std::uint64_t>(rep)));
    const auto t = run_test(a.sample, a.fit, a.spectrum, cfg.j_test, Reference::both);
    pc[static_cast<std::size_t>(rep)] = t.p_chisq;
    pw[static_cast<std::size_t>(rep)] = t.p_weighted;
  });
  out.reps_used = cfg.reps - out.failures;
  const double m = std::max(out.reps_used, 1);
  for (auto ref : {Reference::chisq, Reference::weighted}) {
    const auto& pv = ref == Reference::chisq ? pc : pw;
    for (double alpha : cfg.alphas) {
      const auto hits = std::count_if(pv.begin(), pv.end(), [&](double v) { return v <= alpha; });
      LevelRow row;
      row.alpha = alpha;
      row.reference = ref;
      row.rate = 100.0 * static_cast<double>(hits) / m;
      row.se = std::sqrt(row.rate * (100.0 - row.rate) / m);
      row.nominal_se = std::sqrt(100.0 * alpha * (100.0 - 100.0 * alpha) / m);
      out.rows.push_back(row);
    }
  }
  return out;
}

struct KhatRow {
  double alpha = 0.0;
  Reference reference = Reference::chisq;
  std::array<int, 4> counts{};  // k_hat = 0, 1, 2, >= 3
};

struct KhatTable {
  SimConfig config;
  std::vector<KhatRow> rows;
  int reps_used = 0;
  int failures = 0;

  const KhatRow& at(double alpha, Reference ref) const {
    for (const auto& r : rows)
      if (r.reference == ref && std::abs(r.alpha - alpha) < 1e-12) return r;
    throw std::out_of_range("no k-hat row for that alpha/reference");
  }
};

/// Distribution of the sequential estimate k_hat (bucketed 0, 1, 2, >= 3)
/// for every alpha and both references.
inline KhatTable khat_study(const SimConfig& cfg, const std::vector<double>& alphas) {
  cfg.validate();
  const double top_alpha = *std::max_element(alphas.begin(), alphas.end());
  std::vector<std::vector<TestResult>> trails(static_cast<std::size_t>(cfg.reps));
  std::vector<char> ok(static_cast<std::size_t>(cfg.reps), 0);
  KhatTable out;
  out.config = cfg;
  out.config.alphas = alphas;
  out.failures = detail::for_each_rep(cfg.reps, cfg.workers, [&](int rep) {
    const auto a = analyze(generate(cfg, static_cast<std::uint64_t>(rep)));
    std::vector<TestResult> trail;
    // Tests beyond j = 2 only matter for the ">= 3" bucket.
    for (Index j = 0; j < std::min<Index>(cfg.p, 3); ++j) {
      trail.push_back(run_test(a.sample, a.fit, a.spectrum, j, Reference::both));
      if (trail.back().p_chisq > top_alpha && trail.back().p_weighted > top_alpha) break;
    }
    trails[static_cast<std::size_t>(rep)] = std::move(trail);
    ok[static_cast<std::size_t>(rep)] = 1;
  });
  out.reps_used = cfg.reps - out.failures;
  for (auto ref : {Reference::chisq, Reference::weighted}) {
    for (double alpha : alphas) {
      KhatRow row;
      row.alpha = alpha;
      row.reference = ref;
      for (std::size_t r = 0; r < trails.size(); ++r) {
        if (!ok[r]) continue;
        const auto k = sequential_khat(trails[r], alpha, ref);
        ++row.counts[static_cast<std::size_t>(std::min<Index>(k, 3))];
      }
      out.rows.push_back(row);
    }
  }
  return out;
}

/// Type-7 empirical quantile (linear interpolation between order statistics)
/// of an already sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// |corr(x, fitted)| where fitted is the least-squares fit of x on [1, P].
inline double fitted_abs_correlation(const VectorXd& x, const MatrixXd& P) {
  MatrixXd design(P.rows(), P.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(P.cols()) = P;
  const VectorXd coef = design.colPivHouseholderQr().solve(x);
  const VectorXd fitted = design * coef;
  const VectorXd xc = x.array() - x.mean();
  const VectorXd fc = fitted.array() - fitted.mean();
  const double denom = std::sqrt(xc.squaredNorm() * fc.squaredNorm());
  if (!(denom > 0.0)) return 0.0;
  return std::abs(xc.dot(fc)) / denom;
}

struct DirectionQuantiles {
  Index coordinate = 1;  // 1-based predictor index
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  std::vector<double> sorted_values;
};

struct DirectionTable {
  SimConfig config;
  std::vector<DirectionQuantiles> rows;
  int reps_used = 0;
  int failures = 0;
};

/// Quantiles over replications of |corr(Z_c, fitted)|, c = 1, 2, where fitted
/// regresses Z_c on the first k_fixed IHT predictors v_j^T Z_hat.
inline DirectionTable direction_accuracy(const SimConfig& cfg) {
  cfg.validate();
  const Index k = cfg.k_fixed;
  if (k < 1 || k > cfg.p) throw std::invalid_argument("k_fixed outside [1, p]");
  const Index targets = std::min<Index>(cfg.p, 2);
  std::vector<std::array<double, 2>> values(static_cast<std::size_t>(cfg.reps),
                                           {std::nan(""), std::nan("")});
  DirectionTable out;
  out.config = cfg;
  out.failures = detail::for_each_rep(cfg.reps, cfg.workers, [&](int rep) {
    const auto d = generate(cfg, static_cast<std::uint64_t>(rep));
    const auto a = analyze(d);
    const MatrixXd predictors = a.sample.Z_hat * a.spectrum.left_vectors.leftCols(k);
    for (Index c = 0; c < targets; ++c)
      values[static_cast<std::size_t>(rep)][static_cast<std::size_t>(c)] =
          fitted_abs_correlation(d.X.col(c), predictors);
  });
  out.reps_used = cfg.reps - out.failures;
  for (Index c = 0; c < targets; ++c) {
    DirectionQuantiles q;
    q.coordinate = c + 1;
    for (const auto& v : values)
      if (std::isfinite(v[static_cast<std::size_t>(c)])) q.sorted_values.push_back(v[static_cast<std::size_t>(c)]);
    std::sort(q.sorted_values.begin(), q.sorted_values.end());
    if (!q.sorted_values.empty()) {
      q.q05 = sorted_quantile(q.sorted_values, 0.05);
      q.q50 = sorted_quantile(q.sorted_values, 0.50);
      q.q95 = sorted_quantile(q.sorted_values, 0.95);
    }
    out.rows.push_back(std::move(q));
  }
  return out;
}

enum class StudyKind { level, khat, direction };

struct StudySpec {
  StudyKind kind = StudyKind::level;
  SimConfig config;
};

/// Configuration grids of the published simulation tables 1-7.
inline std::vector<StudySpec> table_preset(int table, int reps, std::uint64_t seed,
                                           unsigned workers = 0) {
  std::vector<StudySpec> out;
  auto add = [&](StudyKind kind, Model m, Index n, Index p, double sigma, Index j) {
    SimConfig c;
    c.model = m;
    c.n = n;
    c.p = p;
    c.sigma = sigma;
    c.reps = reps;
    c.seed = seed;
    c.j_test = j;
    c.workers = workers;
    if (kind == StudyKind::khat) c.alphas = {0.001, 0.01, 0.05, 0.10, 0.15};
    out.push_back({kind, c});
  };
  switch (table) {
    case 1:
      for (Index n : {25, 50, 100, 200}) add(StudyKind::level, Model::null_model, n, 4, 1.0, 0);
      break;
    case 2:
      for (double s : {0.0, 0.2, 0.4, 0.8, 1.6}) add(StudyKind::level, Model::model22, 50, 4, s, 2);
      for (Index n : {100, 200, 400}) add(StudyKind::level, Model::model22, n, 4, 1.6, 2);
      break;
    case 3:
      for (Index p : {4, 6, 8, 12, 16}) add(StudyKind::level, Model::model22, 100, p, 0.2, 2);
      break;
    case 4:
      for (Index n : {50, 100, 200}) add(StudyKind::level, Model::model22_chisq_err, n, 4, 0.0, 2);
      break;
    case 5:
      for (Index n : {50, 100, 200}) add(StudyKind::level, Model::model23, n, 5, 0.2, 2);
      break;
    case 6:
      for (Index n : {50, 100}) add(StudyKind::khat, Model::model22, n, 4, 0.4, 2);
      break;
    case 7:
      for (double s : {0.2, 0.4, 0.8})
        for (Index n : {50, 100}) add(StudyKind::direction, Model::model22, n, 4, s, 2);
      break;
    default: throw std::invalid_argument("table must be 1..7");
  }
  return out;
}

}  // namespace iht
