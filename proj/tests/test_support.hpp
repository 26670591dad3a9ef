#pragma once

// Dense reference implementations and fixtures shared by the test binaries.
// The oracles transliterate the defining formulas with explicit loops and
// full-size matrices; they share no code with the library beyond the inputs.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "iht/iht_core.hpp"
#include "iht/simulation.hpp"
#include "iht/standardize.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd mat_pow(const MatrixXd& H, int k) {
  MatrixXd out = MatrixXd::Identity(H.rows(), H.cols());
  for (int i = 0; i < k; ++i) out = out * H;
  return out;
}

/// tr{Psi0^T D^T E_n(W W^T) D Psi0} with the (p+1) x (p+1) moment matrix formed explicitly.
inline double c2(const iht::StandardizedSample& s, const iht::IhtFit& f, const iht::NullBases& nb) {
  const Index n = s.n(), p = s.p();
  MatrixXd EWW = MatrixXd::Zero(p + 1, p + 1);
  for (Index i = 0; i < n; ++i) {
    VectorXd W(p + 1);
    W(0) = s.Y_hat(i);
    for (Index c = 0; c < p; ++c) W(c + 1) = f.e_hat(i) * s.Z_hat(i, c);
    for (Index a = 0; a <= p; ++a)
      for (Index b = 0; b <= p; ++b) EWW(a, b) += W(a) * W(b) / static_cast<double>(n);
  }
  MatrixXd D = MatrixXd::Zero(p + 1, p);
  D(0, 0) = 1.0;
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b + 1 < p; ++b) D(a + 1, b + 1) = f.B0_hat(a, b);
  return (nb.Psi0.transpose() * D.transpose() * EWW * D * nb.Psi0).trace();
}

/// Full n x p^2 xi matrix from the matrix form of the influence functions.
inline MatrixXd xi(const iht::StandardizedSample& s, const iht::IhtFit& f) {
  const Index n = s.n(), p = s.p();
  const MatrixXd I = MatrixXd::Identity(p, p);
  const MatrixXd& H = f.H_hat;
  const VectorXd& b = f.beta_hat;
  MatrixXd out(n, p * p);
  for (Index i = 0; i < n; ++i) {
    const VectorXd z = s.Z_hat.row(i).transpose();
    const double y = s.Y_hat(i), e = f.e_hat(i);
    const MatrixXd W = z * z.transpose() - I;
    out.row(i).head(p) = (z * y - b - W * b / 2 - (y * y - 1) * b / 2).transpose();
    const MatrixXd G = e * W - H - W * H / 2 - H * W / 2 - (y * y - 1) * H / 2;
    for (Index m = 2; m <= p; ++m)
      out.row(i).segment((m - 1) * p, p) = (G * mat_pow(H, static_cast<int>(m - 2)) * b).transpose();
  }
  return out;
}

inline MatrixXd m_matrix(const MatrixXd& H) {
  const Index p = H.rows();
  MatrixXd M = MatrixXd::Zero(p * p, p * p);
  for (Index r = 0; r < p; ++r)
    for (Index c = 0; c <= r; ++c) M.block(r * p, c * p, p, p) = mat_pow(H, static_cast<int>(r - c));
  return M;
}

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      for (Index k = 0; k < B.rows(); ++k)
        for (Index l = 0; l < B.cols(); ++l) K(i * B.rows() + k, j * B.cols() + l) = A(i, j) * B(k, l);
  return K;
}

/// The weight matrix built from p^2 x p^2 dense intermediates. The products
/// run in long double: forming E_n(xi xi^T) before projecting loses about
/// cond^2 digits, and the oracle must stay more accurate than the code it checks.
using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline LMatrix weight_matrix(const iht::StandardizedSample& s, const iht::IhtFit& f,
                             const iht::NullBases& nb, double c2) {
  const LMatrix X = xi(s, f).cast<long double>();
  const LMatrix Exx = X.transpose() * X / static_cast<long double>(s.n());
  const LMatrix M = m_matrix(f.H_hat).cast<long double>();
  const LMatrix K = kron(nb.Psi0, nb.Gamma0).cast<long double>();
  return K.transpose() * M * Exx * M.transpose() * K / static_cast<long double>(c2);
}

inline std::vector<double> weights(const iht::StandardizedSample& s, const iht::IhtFit& f,
                                   const iht::NullBases& nb, double c2) {
  Eigen::SelfAdjointEigenSolver<LMatrix> eig(weight_matrix(s, f, nb, c2));
  std::vector<double> w;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) w.push_back(static_cast<double>(eig.eigenvalues()(i)));
  std::sort(w.begin(), w.end(), std::greater<>());
  const double top = w.front();
  for (double& v : w)
    if (v < 1e-10 * top) v = 0.0;
  return w;
}

}  // namespace oracle

namespace fixture {

inline iht::Dataset model22(Eigen::Index n, Eigen::Index p, double sigma, std::uint64_t seed,
                            std::uint64_t rep = 0) {
  iht::SimConfig c;
  c.model = iht::Model::model22;
  c.n = n;
  c.p = p;
  c.sigma = sigma;
  c.seed = seed;
  c.j_test = std::min<Eigen::Index>(2, p - 1);
  return iht::generate(c, rep);
}

/// Random affine map X -> X A + 1 b^T, y -> c y + d with a well-conditioned A.
struct Affine {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 1.0;
  double d = 0.0;

  iht::Dataset apply(const iht::Dataset& in) const {
    iht::Dataset out = in;
    out.X = (in.X * A).rowwise() + b.transpose();
    out.y = (c * in.y).array() + d;
    return out;
  }
};

inline Affine random_affine(Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.2, 5.0);
  Affine t;
  // Q diag(s) with Q orthogonal keeps the condition number below 25.
  Eigen::MatrixXd G(p, p);
  for (Eigen::Index i = 0; i < p * p; ++i) G.data()[i] = N(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  Eigen::VectorXd sc(p);
  for (Eigen::Index i = 0; i < p; ++i) sc(i) = U(rng);
  t.A = Q * sc.asDiagonal();
  t.b.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) t.b(i) = 10.0 * N(rng);
  t.c = (N(rng) < 0 ? -1.0 : 1.0) * U(rng);
  t.d = 10.0 * N(rng);
  return t;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Eigen::MatrixXd G(k, k);
  for (Eigen::Index i = 0; i < k * k; ++i) G.data()[i] = N(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
}

}  // namespace fixture
