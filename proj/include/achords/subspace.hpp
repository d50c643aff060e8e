#pragma once

#include "achords/embedding.hpp"
#include "achords/error.hpp"
#include "achords/linalg.hpp"

#include <string>

namespace achords {

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kRelativeRankCutoff = 1e-10;

/// Orthonormal D×k basis summarizing one document.
struct Subspace {
  std::string doc_id;
  Matrix basis;

  Eigen::Index ambient_dim() const { return basis.rows(); }
  Eigen::Index effective_dim() const { return basis.cols(); }
};

struct LabeledSubspace {
  Subspace subspace;
  std::string label;
};

/// Top left singular vectors of `columns`, truncated to min(d, numerical
/// rank) and sign-normalized.
inline Matrix leading_left_singular_vectors(const Eigen::Ref<const Matrix> &columns,
                                            Eigen::Index d) {
  if (columns.cols() == 0)
    throw Error(ErrorCategory::data, "cannot take the SVD of an empty matrix");
  Eigen::BDCSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const Vector &s = svd.singularValues();
  Eigen::Index rank = 0;
  const double cutoff = s.size() > 0 ? kRelativeRankCutoff * s(0) : 0.0;
  while (rank < s.size() && s(rank) > cutoff)
    ++rank;
  const Eigen::Index k = std::min(d, rank);
  Matrix basis = svd.matrixU().leftCols(k);
  normalize_column_signs(basis);
  return basis;
}

/// Reduces a document's word vectors to its dominant d-dimensional subspace.
/// Rank-deficient documents keep fewer than d columns; they are never padded.
inline Subspace compute_subspace(const WordMatrix &matrix, Eigen::Index d) {
  if (d <= 0)
    throw Error(ErrorCategory::usage, "subspace dimension must be positive");
  if (d > matrix.dim())
    throw Error(ErrorCategory::dimension,
                "subspace dimension " + std::to_string(d) + " exceeds embedding dimension " +
                    std::to_string(matrix.dim()));
  if (matrix.size() == 0)
    throw EmptyDocumentError(matrix.doc_id);
  Matrix basis = leading_left_singular_vectors(matrix.columns, d);
  if (basis.cols() == 0)
    throw Error(ErrorCategory::degenerate,
                "document '" + matrix.doc_id + "' has only zero word vectors");
  return Subspace{matrix.doc_id, std::move(basis)};
}

/// (1/n) Σ columns; the single-vector representation for the centroid baseline.
inline Vector mean_vector(const WordMatrix &matrix) {
  if (matrix.size() == 0)
    throw EmptyDocumentError(matrix.doc_id);
  return matrix.columns.rowwise().mean();
}

} // namespace achords
