#pragma once

// Finite-difference verification of the analytic cost gradient on small
// random models.

#include "achords/grassmann.hpp"
#include "achords/linalg.hpp"
#include "achords/lvq.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace achords {

struct GradCheckCase {
  ModelState model;
  std::vector<LabeledSubspace> data;
};

/// Configuration `index` cycles through D ∈ {8, 20}, d ∈ {2, 5} and both
/// distance kinds. Documents have min(d, D − d − 1) dimensions. At
/// k = D − d a random document often lies within 1e-6 of touching a
/// prototype, and the finite-difference step then pushes the top cosine
/// past 1 where it is clamped.
inline GradCheckCase random_gradcheck_case(std::size_t index, std::uint64_t seed) {
  static constexpr Eigen::Index dims[] = {8, 20};
  static constexpr Eigen::Index subdims[] = {2, 5};
  std::mt19937_64 rng(seed * 1000003ULL + index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GradCheckCase c;
  ModelState &m = c.model;
  m.embedding_dim = dims[index % 2];
  m.subspace_dim = subdims[(index / 2) % 2];
  m.distance_kind = (index / 4) % 2 == 0 ? DistanceKind::chordal : DistanceKind::geodesic;
  m.beta = 1.0 + 4.0 * unit(rng);
  m.class_labels = {"a", "b"};
  const std::size_t per_class = 1 + index % 3 / 2; // mix of 1 and 2 prototypes per class
  for (std::size_t cls = 0; cls < 2; ++cls)
    for (std::size_t p = 0; p < per_class; ++p)
      m.prototypes.push_back({random_orthonormal(m.embedding_dim, m.subspace_dim, rng), cls});
  Vector w(m.subspace_dim);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = -std::log(1.0 - unit(rng)) + 0.05;
  m.relevances.weights = w / w.sum();

  const Eigen::Index k = std::min(m.subspace_dim, m.embedding_dim - m.subspace_dim - 1);
  for (std::size_t i = 0; i < 6; ++i) {
    Subspace s{"doc" + std::to_string(i), random_orthonormal(m.embedding_dim, k, rng)};
    c.data.push_back({std::move(s), m.class_labels[i % 2]});
  }
  return c;
}

/// Normwise relative error ‖a − f‖∞ / max(‖a‖∞, ‖f‖∞) of one gradient block.
/// Scaling by the block's largest entry keeps near-zero entries, where the
/// finite difference is mostly rounding noise, from dominating.
inline double normwise_relative_error(const Eigen::Ref<const Matrix> &analytic, const Eigen::Ref<const Matrix> &numeric) {
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
  const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

struct GradCheckResult {
  std::size_t configurations = 0;
  std::size_t entries = 0;
  double max_relative_error = 0.0;  // worst normwise error over all blocks
  double max_entrywise_error = 0.0; // worst |a − f| / max(|a|, |f|), for information
};

/// Central differences of the total cost with respect to every prototype
/// entry and every relevance weight, compared with cost_gradient. Each
/// prototype's gradient and the relevance gradient are separate blocks.
inline GradCheckResult run_gradient_check(std::uint64_t seed, std::size_t configurations = 20, double eps = 1e-6) {
  GradCheckResult result;
  auto note = [&](const Matrix &analytic, const Matrix &numeric) {
    result.max_relative_error = std::max(result.max_relative_error, normwise_relative_error(analytic, numeric));
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      const double a = analytic.data()[i], f = numeric.data()[i];
      const double scale = std::max(std::abs(a), std::abs(f));
      if (scale > 0.0)
        result.max_entrywise_error = std::max(result.max_entrywise_error, std::abs(a - f) / scale);
    }
    result.entries += static_cast<std::size_t>(analytic.size());
  };
  for (std::size_t idx = 0; idx < configurations; ++idx) {
    GradCheckCase c = random_gradcheck_case(idx, seed);
    const CostGradient analytic = cost_gradient(c.model, c.data);
    auto central = [&](double &slot) {
      const double saved = slot;
      slot = saved + eps;
      const double up = total_cost(c.model, c.data);
      slot = saved - eps;
      const double down = total_cost(c.model, c.data);
      slot = saved;
      return (up - down) / (2.0 * eps);
    };
    for (std::size_t j = 0; j < c.model.prototypes.size(); ++j) {
      Matrix &basis = c.model.prototypes[j].basis;
      Matrix numeric(basis.rows(), basis.cols());
      for (Eigen::Index i = 0; i < basis.size(); ++i)
        numeric.data()[i] = central(basis.data()[i]);
      note(analytic.prototypes[j], numeric);
    }
    Matrix numeric(c.model.relevances.size(), 1);
    for (Eigen::Index i = 0; i < c.model.relevances.size(); ++i)
      numeric(i, 0) = central(c.model.relevances.weights(i));
    note(analytic.relevances, numeric);
    ++result.configurations;
  }
  return result;
}

} // namespace achords
