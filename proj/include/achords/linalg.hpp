#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace achords {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Flips column signs so the largest-magnitude entry of every column is
/// positive. The first index wins when magnitudes tie. Makes SVD/QR output
/// independent of the backend's sign choices.
inline void normalize_column_signs(Eigen::Ref<Matrix> basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      const double a = std::abs(basis(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (basis(best, j) < 0.0)
      basis.col(j) *= -1.0;
  }
}

/// ‖BᵀB − I‖_F
inline double orthonormality_residual(const Eigen::Ref<const Matrix> &basis) {
  const Matrix gram = basis.transpose() * basis;
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).norm();
}

/// Largest absolute entry of BᵀB − I.
inline double orthonormality_max_deviation(
    const Eigen::Ref<const Matrix> &basis) {
  const Matrix gram = basis.transpose() * basis;
  return (gram - Matrix::Identity(gram.rows(), gram.cols()))
      .cwiseAbs()
      .maxCoeff();
}

/// Maps a full-column-rank D×d matrix back onto the orthonormal bases through
/// a thin QR factorization. Columns of Q are flipped so that diag(R) > 0,
/// which makes the retraction a smooth, deterministic function of its input.
inline Matrix qr_retract(const Eigen::Ref<const Matrix> &m) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix &packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (packed(j, j) < 0.0)
      q.col(j) *= -1.0;
  }
  return q;
}

/// Euclidean projection onto the probability simplex {x ≥ 0, Σx = 1}, using
/// the sort-and-threshold construction.
inline Vector project_to_simplex(const Eigen::Ref<const Vector> &v) {
  const Eigen::Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += sorted[static_cast<std::size_t>(i)];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[static_cast<std::size_t>(i)] - t > 0.0)
      theta = t;
  }
  Vector out = (v.array() - theta).max(0.0).matrix();
  // Rounding in the threshold can leave the sum a few ulps off.
  const double total = out.sum();
  if (total > 0.0)
    out /= total;
  return out;
}

/// Haar-distributed orthonormal basis: QR-retracted Gaussian matrix.
inline Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      g(i, j) = normal(rng);
  return qr_retract(g);
}

inline bool all_finite(const Eigen::Ref<const Matrix> &m) {
  return m.allFinite();
}

} // namespace achords
