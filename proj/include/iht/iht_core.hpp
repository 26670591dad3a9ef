#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "iht/error.hpp"
#include "iht/standardize.hpp"

namespace iht {

/// OLS seed, residuals, residual-based Hessian and the iterated matrix
/// B = (beta, H beta, ..., H^{p-1} beta) on the standardized scale.
struct IhtFit {
  VectorXd beta_hat;
  VectorXd e_hat;
  MatrixXd H_hat;
  MatrixXd B_hat;   // p x p
  MatrixXd B0_hat;  // p x (p-1): leading columns of B_hat
  Index n = 0;

  Index p() const { return beta_hat.size(); }
};

/// Spectrum of n B B^T. left_vectors / right_vectors are the left and right
/// singular bases of B, ordered by descending eigenvalue.
struct IhtSpectrum {
  VectorXd lambdas;
  MatrixXd left_vectors;
  MatrixXd right_vectors;
  Index n = 0;

  Index p() const { return lambdas.size(); }
};

/// Bases of the trailing p - j singular directions under H_{0,j}.
struct NullBases {
  Index j = 0;
  MatrixXd Gamma0;
  MatrixXd Psi0;
};

inline IhtFit fit_iht(const StandardizedSample& s) {
  const Index n = s.n();
  const Index p = s.p();
  const double inv_n = 1.0 / static_cast<double>(n);

  IhtFit f;
  f.n = n;
  f.beta_hat = s.Z_hat.transpose() * s.Y_hat * inv_n;
  f.e_hat = s.Y_hat - s.Z_hat * f.beta_hat;
  f.H_hat = s.Z_hat.transpose() * f.e_hat.asDiagonal() * s.Z_hat * inv_n;
  f.H_hat = 0.5 * (f.H_hat + f.H_hat.transpose()).eval();

  f.B_hat.resize(p, p);
  f.B_hat.col(0) = f.beta_hat;
  for (Index c = 1; c < p; ++c) f.B_hat.col(c) = f.H_hat * f.B_hat.col(c - 1);
  f.B0_hat = f.B_hat.leftCols(p - 1);
  return f;
}

inline IhtSpectrum iht_spectrum(const IhtFit& f) {
  const Index p = f.p();
  IhtSpectrum sp;
  sp.n = f.n;

  if (f.B_hat.isZero(0.0)) {
    sp.lambdas = VectorXd::Zero(p);
    sp.left_vectors = MatrixXd::Identity(p, p);
    sp.right_vectors = MatrixXd::Identity(p, p);
    return sp;
  }

  Eigen::JacobiSVD<MatrixXd> svd(f.B_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD of B did not converge");
  MatrixXd U = svd.matrixU();
  MatrixXd V = svd.matrixV();
  const VectorXd& sv = svd.singularValues();

  for (Index c = 0; c < p; ++c) {
    Index arg = 0;
    U.col(c).cwiseAbs().maxCoeff(&arg);
    if (U(arg, c) < 0.0) {
      U.col(c) *= -1.0;
      V.col(c) *= -1.0;
    }
  }

  // Squared singular values are nonnegative, so no clamp is needed here.
  sp.lambdas = static_cast<double>(f.n) * sv.array().square();
  sp.left_vectors = std::move(U);
  sp.right_vectors = std::move(V);
  return sp;
}

inline NullBases null_bases(const IhtSpectrum& sp, Index j) {
  const Index p = sp.p();
  if (j < 0 || j > p - 1)
    throw std::out_of_range("null_bases: j = " + std::to_string(j) + " outside [0, " +
                            std::to_string(p - 1) + "]");
  return {j, sp.left_vectors.rightCols(p - j), sp.right_vectors.rightCols(p - j)};
}

}  // namespace iht
