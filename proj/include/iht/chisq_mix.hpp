#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "iht/error.hpp"

namespace iht {

/// Law of sum_i w_i K_i with K_i independent chi-squared(1).
struct MixtureSpec {
  std::vector<double> weights;
  double quad_rel_tol = 1e-8;
  int max_subdivisions = 200;
};

/// P(chi2_df > x); 1 for x <= 0.
inline double chisq_sf(double x, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("chisq_sf: df must be positive");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Upper quantile: the x with chisq_sf(x, df) = prob.
inline double chisq_isf(double prob, double df) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("chisq_isf: prob outside (0, 1)");
  return 2.0 * boost::math::gamma_q_inv(0.5 * df, prob);
}

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kronrod_weights[7];
  double gauss = fc * gauss_weights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kronrod_nodes[i];
    const double sum = f(c - dx) + f(c + dx);
    kron += kronrod_weights[i] * sum;
    if (i % 2 == 1) gauss += gauss_weights[i / 2] * sum;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

/// Imhof's integrand and the pieces of its tail bound for nonnegative weights.
class ImhofIntegrand {
 public:
  ImhofIntegrand(std::span<const double> w, double x) : w_(w.begin(), w.end()), x_(x) {}

  double theta(double u) const {
    double s = 0.0;
    for (double l : w_) s += std::atan(l * u);
    return 0.5 * (s - x_ * u);
  }
  double log_rho(double u) const {
    double s = 0.0;
    for (double l : w_) s += std::log1p(l * l * u * u);
    return 0.25 * s;
  }
  double dtheta(double u) const {
    double s = 0.0;
    for (double l : w_) s += l / (1.0 + l * l * u * u);
    return 0.5 * (s - x_);
  }
  double operator()(double u) const {
    return std::sin(theta(u)) / (u * std::exp(log_rho(u)));
  }

  /// Bound on |int_U^inf f| (probability scale, i.e. already divided by pi).
  double tail_bound(double U) const {
    // |sin| <= 1 with rho >= prod_{top r} sqrt(w u).
    double best = std::numeric_limits<double>::infinity();
    double log_prod = 0.0;
    for (std::size_t r = 0; r < w_.size(); ++r) {
      log_prod += 0.5 * std::log(w_[r] * U);
      const double k = 0.5 * static_cast<double>(r + 1);
      best = std::min(best, 1.0 / (std::numbers::pi * k * std::exp(log_prod)));
    }
    // Oscillation: theta' < 0 and decreasing beyond U, so by the second mean
    // value theorem |int_U^inf sin(theta) g| <= 2 g(U) / |theta'(U)|.
    const double d = dtheta(U);
    if (d < 0.0) {
      const double g = 1.0 / (U * std::exp(log_rho(U)));
      best = std::min(best, 2.0 * g / (std::numbers::pi * -d));
    }
    return best;
  }

  std::span<const double> weights() const { return w_; }

 private:
  std::vector<double> w_;  // sorted descending, all > 0
  double x_;
};

}  // namespace detail

/// P(sum_i w_i K_i > x) by Imhof's inversion formula
///   P = 1/2 + (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du,
/// integrated with adaptive Gauss-Kronrod on [0, U], where U is chosen from a
/// rigorous bound on the neglected tail. Weights below 1e-12 * max are
/// dropped; equal weights reduce to a scaled chi-squared.
inline double mixture_sf(double x, const MixtureSpec& spec) {
  if (spec.weights.empty()) throw std::invalid_argument("mixture_sf: no weights");
  double top = 0.0;
  for (double w : spec.weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("mixture_sf: weights must be finite and nonnegative");
    top = std::max(top, w);
  }
  if (!(top > 0.0)) throw std::invalid_argument("mixture_sf: all weights are zero");
  if (!std::isfinite(x)) {
    if (x > 0) return 0.0;
    throw std::invalid_argument("mixture_sf: x must be finite");
  }
  if (x <= 0.0) return 1.0;

  std::vector<double> w;
  for (double v : spec.weights)
    if (v >= 1e-12 * top) w.push_back(v);
  std::sort(w.begin(), w.end(), std::greater<>());
  if (w.front() - w.back() <= 1e-12 * w.front())
    return chisq_sf(x / w.front(), static_cast<double>(w.size()));

  // Scale so the largest weight is 1; the probability is scale invariant.
  const double scale = w.front();
  for (double& v : w) v /= scale;
  const double xs = x / scale;
  const detail::ImhofIntegrand f(w, xs);

  const double tol = spec.quad_rel_tol;
  const double tail_tol = 0.25 * tol;
  double U = 1.0;
  while (f.tail_bound(U) > tail_tol) {
    U *= 1.5;
    if (U > 1e12) throw AccuracyError(f.tail_bound(U), tail_tol);
  }

  // Initial partition: pieces no longer than one period of sin(theta),
  // using the local bound |theta'(u)| <= (sum_i w_i / (1 + w_i^2 u^2) + x) / 2.
  std::priority_queue<detail::Segment> heap;
  double total = 0.0;
  double err = 0.0;
  long pieces = 0;
  for (double a = 0.0; a < U;) {
    const double rate = f.dtheta(a) + xs;  // decreasing in u
    double b = std::min(U, a + 2.0 * std::numbers::pi / rate);
    if (U - b < 1e-9 * U) b = U;
    const auto seg = detail::gauss_kronrod15(f, a, b);
    total += seg.value;
    err += seg.error;
    heap.push(seg);
    a = b;
    if (++pieces > 2'000'000) throw AccuracyError(f.tail_bound(a), tail_tol);
  }

  // Quadrature error budget on the probability scale.
  const double quad_tol = 0.5 * tol * std::numbers::pi;
  int subdivisions = 0;
  while (err > quad_tol) {
    if (subdivisions >= spec.max_subdivisions)
      throw AccuracyError(err / std::numbers::pi + tail_tol, tol);
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gauss_kronrod15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++subdivisions;
  }

  return std::clamp(0.5 + total / std::numbers::pi, 0.0, 1.0);
}

inline double mixture_sf(double x, std::span<const double> weights) {
  return mixture_sf(x, MixtureSpec{{weights.begin(), weights.end()}});
}

/// Satterthwaite moment match a * chi2_nu; a cross-check, not a reported p-value.
inline double satterthwaite_sf(double x, std::span<const double> weights) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (double w : weights) {
    s1 += w;
    s2 += w * w;
  }
  if (!(s1 > 0.0)) throw std::invalid_argument("satterthwaite_sf: all weights are zero");
  return chisq_sf(x * s1 / s2, s1 * s1 / s2);
}

/// Upper quantile of the mixture by bisection on mixture_sf.
inline double mixture_isf(double prob, const MixtureSpec& spec, double tol = 1e-8) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("mixture_isf: prob outside (0, 1)");
  double hi = std::max(1.0, std::accumulate(spec.weights.begin(), spec.weights.end(), 0.0));
  while (mixture_sf(hi, spec) > prob) hi *= 2.0;
  double lo = 0.0;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (mixture_sf(mid, spec) > prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace iht
