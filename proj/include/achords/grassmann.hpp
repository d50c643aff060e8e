#pragma once

#include "achords/error.hpp"
#include "achords/linalg.hpp"
#include "achords/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace achords {

enum class DistanceKind : std::uint8_t { chordal = 0, geodesic = 1 };

inline std::string_view to_string(DistanceKind k) {
  return k == DistanceKind::chordal ? "chordal" : "geodesic";
}

inline DistanceKind parse_distance_kind(std::string_view s) {
  if (s == "chordal")
    return DistanceKind::chordal;
  if (s == "geodesic")
    return DistanceKind::geodesic;
  throw Error(ErrorCategory::usage, "unknown distance kind '" + std::string(s) +
                                        "' (expected chordal or geodesic)");
}

/// Nonnegative weights over principal-angle indices that sum to one.
struct RelevanceVector {
  Vector weights;

  static RelevanceVector uniform(Eigen::Index d) {
    return {Vector::Constant(d, 1.0 / static_cast<double>(d))};
  }

  Eigen::Index size() const { return weights.size(); }

  bool on_simplex(double tol = 1e-12) const {
    return weights.size() > 0 && (weights.array() >= 0.0).all() &&
           std::abs(weights.sum() - 1.0) <= tol;
  }
};

/// Principal angles between a document subspace and a prototype subspace.
/// cosines(i) = doc_directions.col(i) · proto_directions.col(i).
struct PrincipalAngleDecomposition {
  Vector cosines;           // m = min(k, d), descending, in [0, 1]
  Matrix doc_directions;    // D × m
  Matrix proto_directions;  // D × m
  Matrix proto_coordinates; // d × m, right singular vectors of docᵀ·proto
};

inline constexpr double kOrthonormalityTolerance = 1e-6;

namespace detail {

inline void require_orthonormal(const Eigen::Ref<const Matrix> &basis, std::string_view what) {
  if (basis.cols() == 0)
    throw Error(ErrorCategory::data, std::string(what) + " basis is empty");
  if (orthonormality_max_deviation(basis) > kOrthonormalityTolerance)
    throw Error(ErrorCategory::numeric, std::string(what) + " basis is not orthonormal");
}

/// No orthonormality check; the training loop and gradient checks call this
/// directly because prototypes there are orthonormal by construction or
/// deliberately perturbed.
inline PrincipalAngleDecomposition decompose(const Eigen::Ref<const Matrix> &doc,
                                             const Eigen::Ref<const Matrix> &proto) {
  const Matrix cross = doc.transpose() * proto; // k × d
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PrincipalAngleDecomposition out;
  out.cosines = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);
  out.doc_directions = doc * svd.matrixU();
  out.proto_coordinates = svd.matrixV();
  out.proto_directions = proto * out.proto_coordinates;
  return out;
}

} // namespace detail

inline PrincipalAngleDecomposition principal_angles(const Eigen::Ref<const Matrix> &doc_basis,
                                                    const Eigen::Ref<const Matrix> &proto_basis) {
  if (doc_basis.rows() != proto_basis.rows())
    throw Error(ErrorCategory::dimension, "subspaces live in different ambient dimensions");
  detail::require_orthonormal(doc_basis, "document");
  detail::require_orthonormal(proto_basis, "prototype");
  return detail::decompose(doc_basis, proto_basis);
}

inline PrincipalAngleDecomposition principal_angles(const Subspace &doc,
                                                    const Eigen::Ref<const Matrix> &proto_basis) {
  return principal_angles(doc.basis, proto_basis);
}

/// Per-angle contribution: 1 − σ² (chordal) or arccos(σ)²·4/π² (geodesic).
/// Both map σ ∈ [0,1] onto [0,1].
inline double angle_term(double cosine, DistanceKind kind) {
  if (kind == DistanceKind::chordal)
    return 1.0 - cosine * cosine;
  const double theta = std::acos(std::clamp(cosine, -1.0, 1.0));
  return theta * theta * (4.0 / (std::numbers::pi * std::numbers::pi));
}

/// d(angle_term)/dσ.
inline double angle_term_slope(double cosine, DistanceKind kind) {
  if (kind == DistanceKind::chordal)
    return -2.0 * cosine;
  constexpr double scale = 8.0 / (std::numbers::pi * std::numbers::pi);
  const double c = std::clamp(cosine, -1.0, 1.0);
  const double sine = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double theta = std::acos(c);
  // θ/sinθ → 1 as θ → 0
  const double ratio = sine < 1e-8 ? 1.0 + theta * theta / 6.0 : theta / sine;
  return -scale * ratio;
}

/// Σᵢ λᵢ·term(σᵢ) over all d relevance indices; indices beyond the available
/// cosines use σ = 0.
inline double distance_from_cosines(const Eigen::Ref<const Vector> &cosines,
                                    const Eigen::Ref<const Vector> &relevances, DistanceKind kind) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < relevances.size(); ++i) {
    const double c = i < cosines.size() ? cosines(i) : 0.0;
    total += relevances(i) * angle_term(c, kind);
  }
  return total;
}

inline double distance(const Subspace &doc, const Eigen::Ref<const Matrix> &proto_basis,
                       const RelevanceVector &relevances, DistanceKind kind) {
  if (relevances.size() != proto_basis.cols())
    throw Error(ErrorCategory::dimension, "relevance vector length does not match prototype");
  if (!relevances.on_simplex(1e-9))
    throw Error(ErrorCategory::data, "relevance weights are not on the probability simplex");
  const auto pad = principal_angles(doc, proto_basis);
  return distance_from_cosines(pad.cosines, relevances.weights, kind);
}

} // namespace achords
