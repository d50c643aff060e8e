#pragma once

#include "achords/error.hpp"
#include "achords/linalg.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace achords {

struct LabeledVector {
  Vector vector;
  std::string label;
};

/// Mean-vector baseline: one centroid per class, prediction by cosine
/// distance. Classes are kept in sorted label order, which is also the
/// tie-break order.
class NearestCentroid {
public:
  static NearestCentroid fit(const std::vector<LabeledVector> &training,
                             std::vector<std::string> class_labels = {}) {
    if (training.empty())
      throw Error(ErrorCategory::data, "empty training set");
    if (class_labels.empty()) {
      for (const auto &x : training)
        class_labels.push_back(x.label);
      std::sort(class_labels.begin(), class_labels.end());
      class_labels.erase(std::unique(class_labels.begin(), class_labels.end()), class_labels.end());
    }
    const Eigen::Index dim = training.front().vector.size();
    NearestCentroid model;
    model.labels_ = std::move(class_labels);
    model.centroids_.assign(model.labels_.size(), Vector::Zero(dim));
    std::vector<std::size_t> counts(model.labels_.size(), 0);
    for (const auto &x : training) {
      if (x.vector.size() != dim)
        throw Error(ErrorCategory::dimension, "mixed vector dimensions in training data");
      const auto it = std::find(model.labels_.begin(), model.labels_.end(), x.label);
      if (it == model.labels_.end())
        throw Error(ErrorCategory::data, "label '" + x.label + "' not in class list");
      const auto c = static_cast<std::size_t>(it - model.labels_.begin());
      model.centroids_[c] += x.vector;
      ++counts[c];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0)
        throw Error(ErrorCategory::data, "class '" + model.labels_[c] + "' has no training examples");
      model.centroids_[c] /= static_cast<double>(counts[c]);
    }
    return model;
  }

  /// 1 − cos(a, b); a zero vector counts as orthogonal to everything.
  static double cosine_distance(const Vector &a, const Vector &b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0)
      return 1.0;
    return 1.0 - a.dot(b) / (na * nb);
  }

  std::size_t predict_index(const Vector &v) const {
    std::size_t best = 0;
    double best_d = cosine_distance(v, centroids_[0]);
    for (std::size_t c = 1; c < centroids_.size(); ++c) {
      const double d = cosine_distance(v, centroids_[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

  const std::string &predict(const Vector &v) const { return labels_[predict_index(v)]; }

  double accuracy(const std::vector<LabeledVector> &test) const {
    if (test.empty())
      return 0.0;
    std::size_t ok = 0;
    for (const auto &x : test)
      ok += predict(x.vector) == x.label ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(test.size());
  }

  const std::vector<std::string> &class_labels() const noexcept { return labels_; }
  const std::vector<Vector> &centroids() const noexcept { return centroids_; }

private:
  std::vector<std::string> labels_;
  std::vector<Vector> centroids_;
};

} // namespace achords
