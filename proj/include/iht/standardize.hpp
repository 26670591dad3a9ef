#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iht/error.hpp"

namespace iht {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raw predictors (n x p) and response (n).
struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::vector<std::string> column_names;
  std::string response_name;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

/// Affine-standardized sample together with the transforms that produced it.
///
/// Moments use divisor n throughout, so (1/n) Z_hat^T Z_hat = I and
/// (1/n) sum Y_hat^2 = 1.
struct StandardizedSample {
  MatrixXd Z_hat;
  VectorXd Y_hat;
  VectorXd x_mean;
  MatrixXd sigma_inv_sqrt;
  double y_mean = 0.0;
  double y_sd = 1.0;

  Index n() const { return Z_hat.rows(); }
  Index p() const { return Z_hat.cols(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col,
                         std::string_view column) {
  auto where = [&] {
    return " at row " + std::to_string(row) + ", column " + std::to_string(col) + " (" +
           std::string(column) + ")";
  };
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
    throw DataError("non-numeric cell '" + std::string(cell) + "'" + where());
  if (!std::isfinite(v)) throw DataError("non-finite value '" + std::string(cell) + "'" + where());
  return v;
}

}  // namespace detail

/// Parse a delimited table with a header row. The response column is
/// extracted; all remaining columns become predictors in file order.
inline Dataset parse_dataset(std::istream& in, const std::string& response, char delimiter = ',') {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    for (auto h : detail::split(line, delimiter)) header.emplace_back(h);
    break;
  }
  if (header.empty()) throw DataError("empty input: no header row");

  const auto hits = std::count(header.begin(), header.end(), response);
  if (hits == 0) throw DataError("response column '" + response + "' not found");
  if (hits > 1) throw DataError("response column '" + response + "' appears more than once");
  const auto response_col = static_cast<std::size_t>(
      std::find(header.begin(), header.end(), response) - header.begin());

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, delimiter);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      values[c] = detail::parse_cell(cells[c], row_no, c + 1, header[c]);
    rows.push_back(std::move(values));
  }

  Dataset d;
  d.response_name = response;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != response_col) d.column_names.push_back(header[c]);
  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(d.column_names.size());
  if (n < p + 2)
    throw DataError("n < p + 2: " + std::to_string(n) + " rows for " + std::to_string(p) +
                    " predictors");
  d.X.resize(n, p);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == response_col)
        d.y(i) = rows[i][c];
      else
        d.X(i, k++) = rows[i][c];
    }
  }
  return d;
}

inline Dataset load_dataset(const std::string& path, const std::string& response,
                            char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_dataset(in, response, delimiter);
}

/// Replace the named predictor columns by their natural logarithm.
inline void apply_log(Dataset& d, std::span<const std::string> columns) {
  for (const auto& name : columns) {
    const auto it = std::find(d.column_names.begin(), d.column_names.end(), name);
    if (it == d.column_names.end()) throw DataError("log column '" + name + "' not found");
    const auto c = static_cast<Index>(it - d.column_names.begin());
    for (Index i = 0; i < d.n(); ++i) {
      if (!(d.X(i, c) > 0.0))
        throw DataError("log of non-positive value " + std::to_string(d.X(i, c)) + " in column '" +
                        name + "' at data row " + std::to_string(i + 1));
      d.X(i, c) = std::log(d.X(i, c));
    }
  }
}

/// Symmetric positive-definite inverse square root S^{-1/2} via the
/// symmetric eigendecomposition. Throws SingularCovarianceError when an
/// eigenvalue is at or below tol * (largest eigenvalue).
inline MatrixXd inv_sqrt_spd(const MatrixXd& S, double tol = 1e-12) {
  if (S.rows() != S.cols() || S.rows() == 0) throw NumericError("inv_sqrt_spd: matrix not square");
  const double scale = std::max(S.norm(), 1e-300);
  if ((S - S.transpose()).norm() > 1e-8 * scale)
    throw NumericError("inv_sqrt_spd: matrix not symmetric");

  const MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("inv_sqrt_spd: eigensolver failed");
  const VectorXd& ev = eig.eigenvalues();  // ascending
  const double top = ev.maxCoeff();
  for (Index i = 0; i < ev.size(); ++i)
    if (!(ev(i) > tol * top) || !(top > 0.0)) throw SingularCovarianceError(ev(i), i);

  const MatrixXd& V = eig.eigenvectors();
  MatrixXd R = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  return 0.5 * (R + R.transpose());
}

inline StandardizedSample standardize(const Dataset& d, double tol = 1e-12) {
  const Index n = d.n();
  const Index p = d.p();
  if (d.y.size() != n) throw DataError("response length does not match predictor rows");
  if (n < p + 2) throw DataError("n < p + 2");

  StandardizedSample s;
  s.x_mean = d.X.colwise().mean().transpose();
  const MatrixXd Xc = d.X.rowwise() - s.x_mean.transpose();
  for (Index c = 0; c < p; ++c) {
    const double var = Xc.col(c).squaredNorm() / static_cast<double>(n);
    const double mag = d.X.col(c).cwiseAbs().maxCoeff();
    if (!(var > 1e-24 * std::max(mag * mag, 1e-300))) {
      const auto name = c < static_cast<Index>(d.column_names.size())
                            ? d.column_names[c]
                            : "#" + std::to_string(c + 1);
      throw DataError("constant predictor column '" + name + "'");
    }
  }

  s.y_mean = d.y.mean();
  const VectorXd yc = d.y.array() - s.y_mean;
  const double y_var = yc.squaredNorm() / static_cast<double>(n);
  const double y_mag = d.y.cwiseAbs().maxCoeff();
  if (!(y_var > 1e-24 * std::max(y_mag * y_mag, 1e-300)))
    throw DataError("zero response variance");
  s.y_sd = std::sqrt(y_var);

  const MatrixXd S = Xc.transpose() * Xc / static_cast<double>(n);
  s.sigma_inv_sqrt = inv_sqrt_spd(S, tol);
  s.Z_hat = Xc * s.sigma_inv_sqrt;
  s.Y_hat = yc / s.y_sd;
  return s;
}

}  // namespace iht
