#pragma once

#include "achords/error.hpp"
#include "achords/grassmann.hpp"
#include "achords/linalg.hpp"
#include "achords/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace achords {

struct Prototype {
  Matrix basis;             // D × d, orthonormal columns
  std::size_t class_index;  // into ModelState::class_labels
};

struct Hyperparameters {
  double lr_prototypes = 0.05;
  double lr_relevances = 0.005;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t prototypes_per_class = 1;
};

struct EpochLog {
  std::size_t epoch = 0; // 0 is the state right after initialization
  double mean_cost = 0.0;
  double accuracy = 0.0;
  std::size_t skipped = 0; // degenerate samples skipped during the epoch
};

struct TrainingConfig {
  Eigen::Index subspace_dim = 50;
  double beta = 5.0;
  DistanceKind distance_kind = DistanceKind::chordal;
  Hyperparameters hyper;
};

struct ModelState {
  std::vector<Prototype> prototypes;
  RelevanceVector relevances; // shared by all prototypes
  Eigen::Index embedding_dim = 0;
  Eigen::Index subspace_dim = 0;
  double beta = 5.0;
  DistanceKind distance_kind = DistanceKind::chordal;
  std::vector<std::string> class_labels;
  Hyperparameters hyper;
  std::vector<EpochLog> training_log;

  std::optional<std::size_t> find_class(const std::string &label) const {
    const auto it = std::find(class_labels.begin(), class_labels.end(), label);
    if (it == class_labels.end())
      return std::nullopt;
    return static_cast<std::size_t>(it - class_labels.begin());
  }

  std::size_t class_index(const std::string &label) const {
    if (auto i = find_class(label))
      return *i;
    throw Error(ErrorCategory::data, "label '" + label + "' is not a model class");
  }

  const std::string &label_of(std::size_t prototype) const {
    return class_labels.at(prototypes.at(prototype).class_index);
  }
};

/// Checks every structural invariant of a model; throws on the first failure.
inline void validate(const ModelState &model, double orthonormality_tol = 1e-8) {
  auto fail = [](const std::string &msg) { throw Error(ErrorCategory::data, "invalid model: " + msg); };
  if (model.embedding_dim <= 0 || model.subspace_dim <= 0 || model.subspace_dim > model.embedding_dim)
    fail("bad dimensions");
  if (!(model.beta > 0.0) || !std::isfinite(model.beta))
    fail("sigmoid slope must be positive");
  if (model.class_labels.size() < 2)
    fail("fewer than two classes");
  if (model.relevances.size() != model.subspace_dim || !model.relevances.on_simplex() ||
      !model.relevances.weights.allFinite())
    fail("relevances off the simplex");
  std::vector<std::size_t> per_class(model.class_labels.size(), 0);
  for (const auto &p : model.prototypes) {
    if (p.class_index >= model.class_labels.size())
      fail("prototype label out of range");
    ++per_class[p.class_index];
    if (p.basis.rows() != model.embedding_dim || p.basis.cols() != model.subspace_dim)
      fail("prototype shape mismatch");
    if (!p.basis.allFinite())
      fail("non-finite prototype entry");
    if (orthonormality_residual(p.basis) >= orthonormality_tol)
      fail("prototype basis is not orthonormal");
  }
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0)
      fail("class '" + model.class_labels[c] + "' has no prototype");
}

// ---------------------------------------------------------------------------
// Relative distance and misclassification probability

struct CostTerm {
  double mu;   // (d⁺ − d⁻)/(d⁺ + d⁻)
  double cost; // logistic(β·μ)
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline CostTerm cost_term(double d_plus, double d_minus, double beta) {
  const double denom = d_plus + d_minus;
  if (!(denom > 0.0))
    throw DegenerateSampleError();
  const double mu = (d_plus - d_minus) / denom;
  return {mu, logistic(beta * mu)};
}

// ---------------------------------------------------------------------------
// Prediction

struct Classification {
  std::size_t prototype = 0; // index of the winning prototype
  std::string label;
  std::vector<double> distances; // one per prototype
};

inline std::vector<double> prototype_distances(const Subspace &doc, const ModelState &model) {
  if (doc.ambient_dim() != model.embedding_dim)
    throw Error(ErrorCategory::dimension, "document dimension " + std::to_string(doc.ambient_dim()) +
                                              " does not match model dimension " +
                                              std::to_string(model.embedding_dim));
  detail::require_orthonormal(doc.basis, "document");
  std::vector<double> out;
  out.reserve(model.prototypes.size());
  for (const auto &p : model.prototypes) {
    const auto pad = detail::decompose(doc.basis, p.basis);
    out.push_back(distance_from_cosines(pad.cosines, model.relevances.weights, model.distance_kind));
  }
  return out;
}

/// Nearest-prototype rule; ties go to the lowest prototype index.
inline Classification classify(const Subspace &doc, const ModelState &model) {
  Classification out;
  out.distances = prototype_distances(doc, model);
  for (std::size_t j = 1; j < out.distances.size(); ++j)
    if (out.distances[j] < out.distances[out.prototype])
      out.prototype = j;
  out.label = model.label_of(out.prototype);
  return out;
}

struct BinaryDistances {
  double positive;
  double negative;
};

inline BinaryDistances nearest_by_polarity(const std::vector<double> &distances, const ModelState &model,
                                           std::size_t positive_class) {
  BinaryDistances out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < distances.size(); ++j) {
    double &slot = model.prototypes[j].class_index == positive_class ? out.positive : out.negative;
    slot = std::min(slot, distances[j]);
  }
  return out;
}

/// logistic(β·(d_neg − d_pos)/(d_neg + d_pos)) from already computed distances.
inline double score_from_distances(double d_pos, double d_neg, double beta) {
  const double denom = d_pos + d_neg;
  if (!(denom > 0.0))
    throw DegenerateSampleError();
  return logistic(beta * (d_neg - d_pos) / denom);
}

inline std::size_t require_binary(const ModelState &model, const std::string &positive_label) {
  if (model.class_labels.size() != 2)
    throw Error(ErrorCategory::data, "probability scoring needs a two-class model, this one has " +
                                         std::to_string(model.class_labels.size()));
  return model.class_index(positive_label);
}

/// Probability that `doc` belongs to `positive_label`, from the nearest
/// positive and nearest negative prototype. Exactly 0.5 on the decision
/// boundary.
inline double score(const Subspace &doc, const ModelState &model, const std::string &positive_label) {
  const std::size_t pos = require_binary(model, positive_label);
  const auto d = nearest_by_polarity(prototype_distances(doc, model), model, pos);
  return score_from_distances(d.positive, d.negative, model.beta);
}

// ---------------------------------------------------------------------------
// Initialization

namespace detail {

/// Top-d left singular vectors of `stacked`, completed with an orthonormal
/// complement when the stack has rank below d.
inline Matrix dominant_basis(const Matrix &stacked, Eigen::Index d) {
  Matrix lead = leading_left_singular_vectors(stacked, d);
  if (lead.cols() < d) {
    const Eigen::Index r = lead.cols();
    const Eigen::Index dim = stacked.rows();
    Matrix full;
    if (r == 0) {
      full = Matrix::Identity(dim, dim);
    } else {
      Eigen::HouseholderQR<Matrix> qr(lead);
      full = qr.householderQ();
    }
    Matrix completed(dim, d);
    completed.leftCols(r) = lead;
    completed.rightCols(d - r) = full.middleCols(r, d - r);
    normalize_column_signs(completed.rightCols(d - r));
    lead = std::move(completed);
  }
  return lead;
}

inline std::vector<std::string> sorted_labels(const std::vector<LabeledSubspace> &data) {
  std::vector<std::string> labels;
  for (const auto &x : data)
    labels.push_back(x.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

} // namespace detail

/// One or more prototypes per class. Each starts as the dominant
/// d-dimensional subspace of up to ten randomly drawn class members' bases
/// stacked side by side.
inline std::vector<Prototype> init_prototypes(const std::vector<LabeledSubspace> &training,
                                              const std::vector<std::string> &class_labels,
                                              std::size_t per_class, Eigen::Index d, std::uint64_t seed) {
  if (per_class == 0)
    throw Error(ErrorCategory::usage, "need at least one prototype per class");
  std::mt19937_64 rng(seed);
  std::vector<Prototype> out;
  for (std::size_t c = 0; c < class_labels.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < training.size(); ++i)
      if (training[i].label == class_labels[c])
        members.push_back(i);
    if (members.empty())
      throw Error(ErrorCategory::data, "class '" + class_labels[c] + "' has no training examples");
    const std::size_t draw = std::min<std::size_t>(10, members.size());
    for (std::size_t p = 0; p < per_class; ++p) {
      // partial Fisher–Yates
      std::vector<std::size_t> pool = members;
      for (std::size_t i = 0; i < draw; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      Eigen::Index total_cols = 0;
      for (std::size_t i = 0; i < draw; ++i)
        total_cols += training[pool[i]].subspace.basis.cols();
      const Eigen::Index dim = training[pool[0]].subspace.basis.rows();
      Matrix stacked(dim, total_cols);
      Eigen::Index at = 0;
      for (std::size_t i = 0; i < draw; ++i) {
        const Matrix &b = training[pool[i]].subspace.basis;
        stacked.middleCols(at, b.cols()) = b;
        at += b.cols();
      }
      out.push_back({detail::dominant_basis(stacked, d), c});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost and gradients

/// Gradient of one example's misclassification probability with respect to
/// the two winning prototypes and the relevances.
struct ExampleGradient {
  bool degenerate = false;
  double cost = 0.0;
  bool correct = false; // nearest prototype overall has the right label
  std::size_t plus = 0;
  std::size_t minus = 0;
  Matrix grad_plus;
  Matrix grad_minus;
  Vector grad_relevances;
};

namespace detail {

inline void require_compatible(const Subspace &doc, const ModelState &model) {
  if (doc.ambient_dim() != model.embedding_dim)
    throw Error(ErrorCategory::dimension, "document '" + doc.doc_id + "' has dimension " +
                                              std::to_string(doc.ambient_dim()) + ", model expects " +
                                              std::to_string(model.embedding_dim));
}

/// ∂d/∂W = Σᵢ λᵢ·term'(σᵢ)·(doc direction i)(right singular vector i)ᵀ
inline Matrix distance_gradient_wrt_prototype(const PrincipalAngleDecomposition &pad,
                                              const Vector &relevances, DistanceKind kind, Eigen::Index rows,
                                              Eigen::Index cols) {
  Matrix g = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < pad.cosines.size() && i < relevances.size(); ++i) {
    const double coef = relevances(i) * angle_term_slope(pad.cosines(i), kind);
    g.noalias() += coef * pad.doc_directions.col(i) * pad.proto_coordinates.col(i).transpose();
  }
  return g;
}

/// ∂d/∂λᵢ = term(σᵢ), with σᵢ = 0 beyond the available angles.
inline Vector distance_gradient_wrt_relevances(const PrincipalAngleDecomposition &pad, Eigen::Index d,
                                               DistanceKind kind) {
  Vector g(d);
  for (Eigen::Index i = 0; i < d; ++i)
    g(i) = angle_term(i < pad.cosines.size() ? pad.cosines(i) : 0.0, kind);
  return g;
}

} // namespace detail

inline ExampleGradient example_gradient(const ModelState &model, const Subspace &doc, std::size_t class_index) {
  detail::require_compatible(doc, model);
  const std::size_t n = model.prototypes.size();
  std::vector<PrincipalAngleDecomposition> pads;
  pads.reserve(n);
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    pads.push_back(detail::decompose(doc.basis, model.prototypes[j].basis));
    dist[j] = distance_from_cosines(pads.back().cosines, model.relevances.weights, model.distance_kind);
  }

  ExampleGradient out;
  std::optional<std::size_t> plus, minus;
  std::size_t nearest = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (dist[j] < dist[nearest])
      nearest = j;
    auto &slot = model.prototypes[j].class_index == class_index ? plus : minus;
    if (!slot || dist[j] < dist[*slot])
      slot = j;
  }
  if (!plus || !minus)
    throw Error(ErrorCategory::data, "example class has no prototype, or model has a single class");
  out.plus = *plus;
  out.minus = *minus;
  out.correct = model.prototypes[nearest].class_index == class_index;

  const double dp = dist[out.plus];
  const double dm = dist[out.minus];
  const double denom = dp + dm;
  if (!(denom > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const CostTerm term = cost_term(dp, dm, model.beta);
  out.cost = term.cost;
  // chain rule through the logistic and the relative distance
  const double shared = model.beta * term.cost * (1.0 - term.cost) * 2.0 / (denom * denom);
  const double dE_dplus = shared * dm;
  const double dE_dminus = -shared * dp;

  const Eigen::Index rows = model.embedding_dim;
  const Eigen::Index cols = model.subspace_dim;
  out.grad_plus = dE_dplus * detail::distance_gradient_wrt_prototype(pads[out.plus], model.relevances.weights,
                                                                     model.distance_kind, rows, cols);
  out.grad_minus = dE_dminus * detail::distance_gradient_wrt_prototype(pads[out.minus], model.relevances.weights,
                                                                       model.distance_kind, rows, cols);
  out.grad_relevances = dE_dplus * detail::distance_gradient_wrt_relevances(pads[out.plus], cols, model.distance_kind) +
                        dE_dminus * detail::distance_gradient_wrt_relevances(pads[out.minus], cols, model.distance_kind);
  return out;
}

/// A training example with its label resolved to a class index.
struct IndexedExample {
  const Subspace *doc;
  std::size_t class_index;
};

inline std::vector<IndexedExample> index_examples(const ModelState &model, const std::vector<LabeledSubspace> &data) {
  std::vector<IndexedExample> out;
  out.reserve(data.size());
  for (const auto &x : data)
    out.push_back({&x.subspace, model.class_index(x.label)});
  return out;
}

/// Full-batch cost E = Σ Eᵢ and its gradient; degenerate examples contribute
/// nothing.
struct CostGradient {
  double cost = 0.0;
  std::vector<Matrix> prototypes; // one gradient per prototype
  Vector relevances;
  std::size_t degenerate = 0;
};

inline CostGradient cost_gradient(const ModelState &model, const std::vector<LabeledSubspace> &data) {
  CostGradient out;
  for (std::size_t j = 0; j < model.prototypes.size(); ++j)
    out.prototypes.push_back(Matrix::Zero(model.embedding_dim, model.subspace_dim));
  out.relevances = Vector::Zero(model.subspace_dim);
  for (const auto &ex : index_examples(model, data)) {
    const auto g = example_gradient(model, *ex.doc, ex.class_index);
    if (g.degenerate) {
      ++out.degenerate;
      continue;
    }
    out.cost += g.cost;
    out.prototypes[g.plus] += g.grad_plus;
    out.prototypes[g.minus] += g.grad_minus;
    out.relevances += g.grad_relevances;
  }
  return out;
}

inline double total_cost(const ModelState &model, const std::vector<LabeledSubspace> &data) {
  double total = 0.0;
  for (const auto &ex : index_examples(model, data)) {
    std::vector<double> dist = prototype_distances(*ex.doc, model);
    double dp = std::numeric_limits<double>::infinity();
    double dm = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dist.size(); ++j) {
      double &slot = model.prototypes[j].class_index == ex.class_index ? dp : dm;
      slot = std::min(slot, dist[j]);
    }
    if (dp + dm > 0.0)
      total += cost_term(dp, dm, model.beta).cost;
  }
  return total;
}

struct StepResult {
  bool skipped = false;
  double cost = 0.0;
  bool correct = false;
};

/// One stochastic update: gradient step on W⁺, W⁻ and λ, then QR retraction of
/// the prototypes and simplex projection of λ.
inline StepResult sgd_step(ModelState &model, const Subspace &doc, std::size_t class_index, double lr_prototypes,
                           double lr_relevances) {
  const ExampleGradient g = example_gradient(model, doc, class_index);
  if (g.degenerate)
    return {true, 0.0, g.correct};
  if (!g.grad_plus.allFinite() || !g.grad_minus.allFinite() || !g.grad_relevances.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite gradient on document '" << doc.doc_id << "' (prototypes " << g.plus << "/" << g.minus
        << ", cost " << g.cost << ")";
    throw Error(ErrorCategory::numeric, msg.str());
  }
  Prototype &wp = model.prototypes[g.plus];
  Prototype &wm = model.prototypes[g.minus];
  wp.basis = qr_retract(wp.basis - lr_prototypes * g.grad_plus);
  wm.basis = qr_retract(wm.basis - lr_prototypes * g.grad_minus);
  if (lr_relevances != 0.0)
    model.relevances.weights = project_to_simplex(model.relevances.weights - lr_relevances * g.grad_relevances);
  return {false, g.cost, g.correct};
}

inline EpochLog measure_epoch(const ModelState &model, const std::vector<IndexedExample> &examples,
                              std::size_t epoch, std::size_t skipped) {
  EpochLog log;
  log.epoch = epoch;
  log.skipped = skipped;
  std::size_t counted = 0, correct = 0;
  double cost = 0.0;
  for (const auto &ex : examples) {
    const auto g = example_gradient(model, *ex.doc, ex.class_index);
    correct += g.correct ? 1 : 0;
    if (!g.degenerate) {
      cost += g.cost;
      ++counted;
    }
  }
  log.mean_cost = counted ? cost / static_cast<double>(counted) : 0.0;
  log.accuracy = examples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(examples.size());
  return log;
}

/// Builds an initial, untrained model (prototypes from init_prototypes,
/// uniform relevances).
inline ModelState initial_model(const std::vector<LabeledSubspace> &training, const TrainingConfig &config) {
  if (training.empty())
    throw Error(ErrorCategory::data, "empty training set");
  ModelState model;
  model.class_labels = detail::sorted_labels(training);
  if (model.class_labels.size() < 2)
    throw Error(ErrorCategory::data, "training needs at least two classes");
  model.embedding_dim = training.front().subspace.ambient_dim();
  for (const auto &x : training)
    if (x.subspace.ambient_dim() != model.embedding_dim)
      throw Error(ErrorCategory::dimension, "training subspaces have mixed ambient dimensions");
  if (config.subspace_dim <= 0 || config.subspace_dim > model.embedding_dim)
    throw Error(ErrorCategory::dimension, "subspace dimension must lie in [1, " +
                                              std::to_string(model.embedding_dim) + "]");
  if (!(config.beta > 0.0))
    throw Error(ErrorCategory::usage, "sigmoid slope must be positive");
  if (!(config.hyper.lr_prototypes > 0.0) || !(config.hyper.lr_relevances >= 0.0))
    throw Error(ErrorCategory::usage, "learning rates must be positive (relevance rate may be 0)");
  model.subspace_dim = config.subspace_dim;
  model.beta = config.beta;
  model.distance_kind = config.distance_kind;
  model.hyper = config.hyper;
  model.relevances = RelevanceVector::uniform(config.subspace_dim);
  model.prototypes = init_prototypes(training, model.class_labels, config.hyper.prototypes_per_class,
                                     config.subspace_dim, config.hyper.seed);
  return model;
}

/// Stochastic gradient descent on the summed misclassification probability.
/// Sequential and fully determined by the seed.
inline ModelState train(const std::vector<LabeledSubspace> &training, const TrainingConfig &config) {
  ModelState model = initial_model(training, config);
  const auto examples = index_examples(model, training);
  std::mt19937_64 rng(config.hyper.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(examples.size());
  model.training_log.push_back(measure_epoch(model, examples, 0, 0));
  for (std::size_t epoch = 1; epoch <= config.hyper.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t skipped = 0;
    for (std::size_t i : order) {
      const auto step = sgd_step(model, *examples[i].doc, examples[i].class_index, config.hyper.lr_prototypes,
                                 config.hyper.lr_relevances);
      skipped += step.skipped ? 1 : 0;
    }
    model.training_log.push_back(measure_epoch(model, examples, epoch, skipped));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
  std::vector<std::string> class_labels;
  std::vector<std::vector<std::size_t>> confusion; // [true][predicted]
  double accuracy = 0.0;
  std::vector<std::optional<double>> precision; // undefined when nothing was predicted for the class
  std::vector<std::optional<double>> recall;    // undefined when the class is absent
  std::size_t total = 0;
};

/// Derives accuracy and per-class precision/recall from a confusion matrix.
inline Metrics metrics_from_confusion(std::vector<std::string> labels, std::vector<std::vector<std::size_t>> confusion) {
  Metrics m;
  const std::size_t n = labels.size();
  m.class_labels = std::move(labels);
  m.confusion = std::move(confusion);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t p = 0; p < n; ++p) {
      m.total += m.confusion[t][p];
      if (t == p)
        correct += m.confusion[t][p];
    }
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < n; ++k) {
      predicted += m.confusion[k][c];
      actual += m.confusion[c][k];
    }
    m.precision.push_back(predicted ? std::optional(static_cast<double>(m.confusion[c][c]) / static_cast<double>(predicted))
                                    : std::nullopt);
    m.recall.push_back(actual ? std::optional(static_cast<double>(m.confusion[c][c]) / static_cast<double>(actual))
                              : std::nullopt);
  }
  return m;
}

inline Metrics evaluate(const ModelState &model, const std::vector<LabeledSubspace> &test) {
  if (test.empty())
    throw Error(ErrorCategory::data, "empty test set");
  const std::size_t n = model.class_labels.size();
  std::vector<std::vector<std::size_t>> confusion(n, std::vector<std::size_t>(n, 0));
  for (const auto &x : test) {
    const std::size_t truth = model.class_index(x.label);
    const std::size_t predicted = model.prototypes[classify(x.subspace, model).prototype].class_index;
    ++confusion[truth][predicted];
  }
  return metrics_from_confusion(model.class_labels, std::move(confusion));
}

} // namespace achords
