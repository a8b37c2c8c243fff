#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"

namespace halfvae {

// Centering plus symmetric (ZCA) whitening restricted to the leading `rank`
// principal directions: x -> V_r diag(1/sqrt(ev_r)) V_r^T (x - mean).
// With rank = N sources the result keeps M rows and has identity covariance on
// the signal subspace.
struct Whitening {
  std::vector<double> mean;  // [M]
  Matrix transform;          // [M x M]

  bool empty() const { return mean.empty(); }

  Matrix apply(const Matrix& x) const {
    if (x.rows() != mean.size()) throw ShapeError("Whitening::apply: row count mismatch");
    Matrix centred = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (auto& v : centred.row(r)) v -= mean[r];
    return matmul(transform, centred);
  }

  static Whitening identity(std::size_t m) { return {std::vector<double>(m, 0.0), Matrix::identity(m)}; }

  friend bool operator==(const Whitening&, const Whitening&) = default;
};

inline Whitening fit_whitening(const Matrix& x, std::size_t rank) {
  const std::size_t m = x.rows(), l = x.cols();
  if (rank == 0 || rank > m) throw ShapeError("fit_whitening: rank out of range");
  if (l < 2) throw DegenerateInputError("fit_whitening: need at least two columns");
  Whitening w;
  w.mean.assign(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    w.mean[r] = s / static_cast<double>(l);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < l; ++c) s += (x(a, c) - w.mean[a]) * (x(b, c) - w.mean[b]);
      cov(a, b) = cov(b, a) = s / static_cast<double>(l);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("fit_whitening: eigendecomposition failed");
  const auto& ev = eig.eigenvalues();  // ascending
  const auto& vec = eig.eigenvectors();
  const double top = ev(m - 1);
  w.transform = Matrix(m, m);
  for (std::size_t k = m - rank; k < m; ++k) {
    if (!(ev(k) > 1e-12 * std::max(top, 1e-300))) {
      throw DegenerateInputError("fit_whitening: observations have fewer than " +
                                 std::to_string(rank) + " non-degenerate directions");
    }
    const double scale = 1.0 / std::sqrt(ev(k));
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) w.transform(a, b) += vec(a, k) * scale * vec(b, k);
  }
  return w;
}

}  // namespace halfvae
