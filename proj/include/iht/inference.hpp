#pragma once

#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "iht/dimension_tests.hpp"
#include "iht/iht_core.hpp"
#include "iht/standardize.hpp"

namespace iht {

struct DimensionEstimate {
  Index k_hat = 0;
  double alpha = 0.05;
  Reference reference = Reference::weighted;
  std::vector<TestResult> trail;
  MatrixXd directions_z;  // p x k_hat, orthonormal
  MatrixXd directions_x;  // p x k_hat, unit columns
};

/// Numeric failure part-way through the sequence; carries the tests that did finish.
class DimensionEstimateError : public NumericError {
 public:
  DimensionEstimateError(const std::string& what, std::vector<TestResult> partial)
      : NumericError(what), partial_trail_(std::move(partial)) {}
  const std::vector<TestResult>& partial_trail() const noexcept { return partial_trail_; }

 private:
  std::vector<TestResult> partial_trail_;
};

/// Standardized sample, fit and spectrum for one dataset.
struct Analysis {
  StandardizedSample sample;
  IhtFit fit;
  IhtSpectrum spectrum;
};

inline Analysis analyze(const Dataset& d) {
  Analysis a;
  a.sample = standardize(d);
  a.fit = fit_iht(a.sample);
  a.spectrum = iht_spectrum(a.fit);
  return a;
}

/// Leading k left singular vectors, and their images Sigma^{-1/2} v scaled to
/// unit length on the original predictor scale.
inline std::pair<MatrixXd, MatrixXd> directions(const IhtSpectrum& sp, Index k,
                                                const MatrixXd& sigma_inv_sqrt) {
  if (k < 1 || k > sp.p())
    throw std::out_of_range("directions: k = " + std::to_string(k) + " outside [1, " +
                            std::to_string(sp.p()) + "]");
  MatrixXd dz = sp.left_vectors.leftCols(k);
  MatrixXd dx = sigma_inv_sqrt * dz;
  dx.colwise().normalize();
  return {std::move(dz), std::move(dx)};
}

/// First-non-rejection rule applied to an already computed trail: the index
/// of the first p-value above alpha, or the trail length when all reject.
inline Index sequential_khat(std::span<const TestResult> trail, double alpha, Reference ref) {
  for (const auto& t : trail)
    if (!(t.p_value(ref) <= alpha)) return t.j;
  return static_cast<Index>(trail.size());
}

/// Sequential tests of H_{0,0}, H_{0,1}, ... stopping at the first p-value
/// above alpha under `reference`. Both p-values are recorded in the trail.
inline DimensionEstimate estimate_dimension(const Analysis& a, double alpha,
                                            Reference reference = Reference::weighted) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (reference == Reference::both)
    throw std::invalid_argument("estimate_dimension: choose chisq or weighted");
  const Index p = a.sample.p();

  DimensionEstimate est;
  est.alpha = alpha;
  est.reference = reference;
  est.k_hat = p;
  for (Index j = 0; j < p; ++j) {
    try {
      est.trail.push_back(run_test(a.sample, a.fit, a.spectrum, j, Reference::both));
    } catch (const NumericError& e) {
      throw DimensionEstimateError(std::string("test j = ") + std::to_string(j) + ": " + e.what(),
                                   est.trail);
    }
    if (!(est.trail.back().p_value(reference) <= alpha)) {
      est.k_hat = j;
      break;
    }
  }
  if (est.k_hat > 0) {
    std::tie(est.directions_z, est.directions_x) =
        directions(a.spectrum, est.k_hat, a.sample.sigma_inv_sqrt);
  } else {
    est.directions_z.resize(p, 0);
    est.directions_x.resize(p, 0);
  }
  return est;
}

inline DimensionEstimate estimate_dimension(const Dataset& d, double alpha,
                                            Reference reference = Reference::weighted) {
  return estimate_dimension(analyze(d), alpha, reference);
}

}  // namespace iht
