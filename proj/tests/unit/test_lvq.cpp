#include "achords/gradcheck.hpp"
#include "achords/lvq.hpp"
#include "achords/model_io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace achords;

namespace {

ModelState two_prototype_model(Matrix a, Matrix b, DistanceKind kind = DistanceKind::chordal, double beta = 5.0) {
  ModelState m;
  m.embedding_dim = a.rows();
  m.subspace_dim = a.cols();
  m.beta = beta;
  m.distance_kind = kind;
  m.class_labels = {"neg", "pos"};
  m.relevances = RelevanceVector::uniform(a.cols());
  m.prototypes = {{std::move(a), 0}, {std::move(b), 1}};
  return m;
}

Matrix unit_cols(Eigen::Index dim, std::initializer_list<Eigen::Index> which) {
  Matrix m = Matrix::Zero(dim, static_cast<Eigen::Index>(which.size()));
  Eigen::Index j = 0;
  for (auto i : which)
    m(i, j++) = 1.0;
  return m;
}

std::vector<LabeledSubspace> random_docs(std::size_t n, Eigen::Index dim, Eigen::Index k, std::mt19937_64 &rng) {
  std::vector<LabeledSubspace> out;
  // two clusters around fixed centres
  const Matrix ca = oracle::random_basis(dim, k, rng);
  const Matrix cb = oracle::random_basis(dim, k, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = i % 2 == 0;
    const Matrix noisy = (a ? ca : cb) + 0.4 * oracle::random_gaussian(dim, k, rng);
    out.push_back({Subspace{"doc" + std::to_string(i), oracle::gram_schmidt(noisy)}, a ? "a" : "b"});
  }
  return out;
}

} // namespace

TEST(CostTerm, SpecExamples) {
  auto t = cost_term(0.4, 0.4, 5.0);
  EXPECT_EQ(t.mu, 0.0);
  EXPECT_EQ(t.cost, 0.5);
  t = cost_term(0.0, 0.7, 5.0);
  EXPECT_EQ(t.mu, -1.0);
  EXPECT_NEAR(t.cost, 1.0 / (1.0 + std::exp(5.0)), 1e-15);
  EXPECT_NEAR(t.cost, 0.00669, 5e-6);
  t = cost_term(0.3, 0.1, 5.0);
  EXPECT_NEAR(t.mu, 0.5, 1e-15);
  EXPECT_NEAR(t.cost, 0.9241, 5e-5);
  EXPECT_NEAR(t.cost, 1.0 / (1.0 + std::exp(-2.5)), 1e-15);
  EXPECT_THROW(cost_term(0.0, 0.0, 5.0), DegenerateSampleError);
}

TEST(CostTerm, Monotone) {
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double c = cost_term(0.01 * i, 0.5, 3.0).cost;
    if (i > 0)
      EXPECT_GT(c, prev);
    prev = c;
  }
  for (int i = 1; i <= 100; ++i) {
    const double c = cost_term(0.5, 0.01 * i, 3.0).cost;
    if (i > 1)
      EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(Score, SpecExamples) {
  EXPECT_EQ(score_from_distances(0.3, 0.3, 5.0), 0.5);
  EXPECT_NEAR(score_from_distances(0.0, 0.4, 5.0), 1.0 / (1.0 + std::exp(-5.0)), 1e-15);
  EXPECT_NEAR(score_from_distances(0.0, 0.4, 5.0), 0.9933, 5e-5);
  EXPECT_THROW(score_from_distances(0.0, 0.0, 5.0), DegenerateSampleError);
}

TEST(Score, ExactHalfOnDecisionBoundary) {
  // document equidistant from the two prototypes
  const double r = 1.0 / std::sqrt(2.0);
  Matrix doc = Matrix::Zero(3, 1);
  doc(0, 0) = r;
  doc(1, 0) = r;
  const auto m = two_prototype_model(unit_cols(3, {0}), unit_cols(3, {1}));
  EXPECT_EQ(score(Subspace{"x", doc}, m, "pos"), 0.5);
  EXPECT_EQ(score(Subspace{"x", doc}, m, "neg"), 0.5);
  EXPECT_EQ(score(Subspace{"x", unit_cols(3, {1})}, m, "pos"), 1.0 / (1.0 + std::exp(-5.0)));
  EXPECT_THROW(score(Subspace{"x", doc}, m, "other"), Error);
}

TEST(Classify, ExactMatchAndTieBreak) {
  const auto m = two_prototype_model(unit_cols(4, {0, 1}), unit_cols(4, {2, 3}));
  auto c = classify(Subspace{"x", unit_cols(4, {2, 3})}, m);
  EXPECT_EQ(c.label, "pos");
  EXPECT_EQ(c.prototype, 1u);
  EXPECT_NEAR(c.distances[1], 0.0, 1e-15);
  // equidistant: lower index wins
  const auto tie = classify(Subspace{"x", unit_cols(4, {1, 2})}, m);
  EXPECT_EQ(tie.distances[0], tie.distances[1]);
  EXPECT_EQ(tie.prototype, 0u);
  EXPECT_EQ(tie.label, "neg");
}

TEST(Classify, InvariantToDistanceRescaling) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto &x : d)
      x = u(rng);
    auto argmin = [](const std::vector<double> &v) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] < v[best])
          best = j;
      return best;
    };
    const double s = 0.01 + 10.0 * u(rng);
    std::vector<double> scaled = d;
    for (auto &x : scaled)
      x *= s;
    EXPECT_EQ(argmin(d), argmin(scaled));
  }
}

TEST(InitPrototypes, SingleDocumentPadded) {
  const Matrix doc = unit_cols(6, {0});
  const std::vector<LabeledSubspace> toy{{Subspace{"a", doc}, "a"}, {Subspace{"b", unit_cols(6, {3, 4})}, "b"}};
  const auto ps = init_prototypes(toy, {"a", "b"}, 1, 3, 1);
  ASSERT_EQ(ps.size(), 2u);
  for (const auto &p : ps) {
    EXPECT_EQ(p.basis.cols(), 3);
    EXPECT_LT(orthonormality_residual(p.basis), 1e-12);
  }
  // document span inside the prototype span
  EXPECT_NEAR((ps[0].basis.transpose() * doc).norm(), 1.0, 1e-12);
  EXPECT_NEAR((ps[1].basis.transpose() * unit_cols(6, {3, 4})).squaredNorm(), 2.0, 1e-12);
}

TEST(InitPrototypes, DeterministicAndSpansOrthogonalRankOneDocs) {
  std::vector<LabeledSubspace> docs;
  for (Eigen::Index i = 0; i < 4; ++i)
    docs.push_back({Subspace{"a" + std::to_string(i), unit_cols(8, {i})}, "a"});
  docs.push_back({Subspace{"b", unit_cols(8, {7})}, "b"});
  const auto p1 = init_prototypes(docs, {"a", "b"}, 1, 4, 9);
  const auto p2 = init_prototypes(docs, {"a", "b"}, 1, 4, 9);
  EXPECT_EQ(p1[0].basis, p2[0].basis);
  // four mutually orthogonal rank-1 docs, d = 4: prototype spans all of them
  const Matrix expect = unit_cols(8, {0, 1, 2, 3});
  EXPECT_LT((oracle::projector(p1[0].basis) - oracle::projector(expect)).norm(), 1e-12);
  EXPECT_THROW(init_prototypes(docs, {"a", "b", "c"}, 1, 4, 9), Error);
}

TEST(Train, SeparableToy) {
  const std::vector<LabeledSubspace> toy{{Subspace{"a", unit_cols(6, {0, 1})}, "a"},
                                         {Subspace{"b", unit_cols(6, {2, 3})}, "b"}};
  TrainingConfig cfg;
  cfg.subspace_dim = 2;
  cfg.hyper.epochs = 1;
  cfg.hyper.seed = 4;
  const auto m = train(toy, cfg);
  ASSERT_EQ(m.training_log.size(), 2u);
  EXPECT_EQ(m.training_log[1].accuracy, 1.0);
  // prototypes start on the documents, so the cost is already at its floor
  EXPECT_NEAR(m.training_log[1].mean_cost, oracle::logistic(-m.beta), 1e-12);
  EXPECT_LE(m.training_log[1].mean_cost, m.training_log[0].mean_cost);
}

TEST(Train, FrozenRelevances) {
  std::mt19937_64 rng(6);
  const auto data = random_docs(20, 10, 3, rng);
  TrainingConfig cfg;
  cfg.subspace_dim = 3;
  cfg.hyper.epochs = 5;
  cfg.hyper.lr_relevances = 0.0;
  const auto m = train(data, cfg);
  EXPECT_EQ(m.relevances.weights, RelevanceVector::uniform(3).weights);
}

TEST(Train, DeterministicBitIdentical) {
  std::mt19937_64 rng(7);
  const auto data = random_docs(30, 12, 3, rng);
  TrainingConfig cfg;
  cfg.subspace_dim = 3;
  cfg.hyper.epochs = 4;
  cfg.hyper.seed = 77;
  cfg.hyper.prototypes_per_class = 2;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  cfg.hyper.seed = 78;
  EXPECT_NE(serialize_model(train(data, cfg)), serialize_model(a));
}

TEST(Train, ManifoldInvariantsAfterEveryUpdate) {
  std::mt19937_64 rng(8);
  for (auto kind : {DistanceKind::chordal, DistanceKind::geodesic}) {
    const auto data = random_docs(40, 15, 4, rng);
    TrainingConfig cfg;
    cfg.subspace_dim = 4;
    cfg.distance_kind = kind;
    cfg.hyper.lr_prototypes = 0.2;
    cfg.hyper.lr_relevances = 0.05;
    ModelState m = initial_model(data, cfg);
    const auto ex = index_examples(m, data);
    std::uniform_int_distribution<std::size_t> pick(0, ex.size() - 1);
    for (int step = 0; step < 300; ++step) {
      const auto &e = ex[pick(rng)];
      sgd_step(m, *e.doc, e.class_index, cfg.hyper.lr_prototypes, cfg.hyper.lr_relevances);
      for (const auto &p : m.prototypes)
        ASSERT_LT(orthonormality_residual(p.basis), 1e-8);
      ASSERT_TRUE(m.relevances.on_simplex(1e-12));
    }
  }
}

TEST(Train, RejectsBadInput) {
  std::mt19937_64 rng(9);
  auto data = random_docs(6, 5, 2, rng);
  TrainingConfig cfg;
  cfg.subspace_dim = 2;
  cfg.hyper.epochs = 1;
  auto one_class = data;
  for (auto &x : one_class)
    x.label = "a";
  EXPECT_THROW(train(one_class, cfg), Error);
  cfg.subspace_dim = 6;
  EXPECT_THROW(train(data, cfg), Error);
  cfg.subspace_dim = 2;
  cfg.hyper.lr_prototypes = 0.0;
  EXPECT_THROW(train(data, cfg), Error);
  cfg.hyper.lr_prototypes = 0.1;
  cfg.beta = 0.0;
  EXPECT_THROW(train(data, cfg), Error);
}

TEST(Train, SkipsDegenerateSamples) {
  // document identical to both prototypes' span: d⁺ = d⁻ = 0
  const Matrix span = unit_cols(5, {0, 1});
  auto m = two_prototype_model(span, span);
  const auto g = example_gradient(m, Subspace{"x", span}, 0);
  EXPECT_TRUE(g.degenerate);
  const auto r = sgd_step(m, Subspace{"x", span}, 0, 0.1, 0.1);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(m.prototypes[0].basis, span);
}

TEST(Gradient, MatchesCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto r = run_gradient_check(seed, 8);
    EXPECT_EQ(r.configurations, 8u);
    EXPECT_LT(r.max_relative_error, 1e-5) << "seed " << seed;
  }
}

TEST(Gradient, DetectsWrongGradient) {
  // a sign error in one block must show up as an O(1) discrepancy
  auto c = random_gradcheck_case(0, 3);
  auto g = cost_gradient(c.model, c.data);
  Matrix wrong = -g.prototypes[0];
  Matrix numeric(wrong.rows(), wrong.cols());
  for (Eigen::Index i = 0; i < numeric.size(); ++i) {
    double &slot = c.model.prototypes[0].basis.data()[i];
    const double saved = slot;
    slot = saved + 1e-6;
    const double up = total_cost(c.model, c.data);
    slot = saved - 1e-6;
    const double down = total_cost(c.model, c.data);
    slot = saved;
    numeric.data()[i] = (up - down) / 2e-6;
  }
  EXPECT_LT(normwise_relative_error(g.prototypes[0], numeric), 1e-5);
  EXPECT_GT(normwise_relative_error(wrong, numeric), 0.5);
}

TEST(Evaluate, PrototypesAsTestSetAndInversion) {
  std::mt19937_64 rng(10);
  const auto data = random_docs(30, 10, 3, rng);
  TrainingConfig cfg;
  cfg.subspace_dim = 3;
  cfg.hyper.epochs = 3;
  const auto m = train(data, cfg);
  std::vector<LabeledSubspace> protos;
  for (const auto &p : m.prototypes)
    protos.push_back({Subspace{"p", p.basis}, m.class_labels[p.class_index]});
  EXPECT_EQ(evaluate(m, protos).accuracy, 1.0);

  auto inverted = data;
  for (auto &x : inverted)
    x.label = x.label == "a" ? "b" : "a";
  const double acc = evaluate(m, data).accuracy;
  EXPECT_DOUBLE_EQ(evaluate(m, inverted).accuracy, 1.0 - acc);
  EXPECT_THROW(evaluate(m, {}), Error);
}

TEST(Evaluate, HandTalliedConfusion) {
  // prototypes e0 (neg), e1 (pos) in 3-D; 10 one-dimensional documents
  const auto m = two_prototype_model(unit_cols(3, {0}), unit_cols(3, {1}));
  auto doc = [](double x, double y) {
    Matrix b(3, 1);
    b << x, y, 0.3;
    return Subspace{"d", b.normalized()};
  };
  const std::vector<LabeledSubspace> test{
      {doc(1.0, 0.1), "neg"}, {doc(0.9, 0.2), "neg"}, {doc(0.8, 0.3), "neg"}, {doc(0.2, 0.9), "neg"},
      {doc(0.1, 1.0), "pos"}, {doc(0.3, 0.8), "pos"}, {doc(0.2, 0.7), "pos"}, {doc(0.9, 0.1), "pos"},
      {doc(0.7, 0.2), "pos"}, {doc(0.1, 0.6), "pos"},
  };
  // truth neg: predicted neg 3, pos 1; truth pos: predicted neg 2, pos 4
  const auto r = evaluate(m, test);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::size_t>>{{3, 1}, {2, 4}}));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(*r.precision[0], 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(*r.precision[1], 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(*r.recall[0], 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(*r.recall[1], 4.0 / 6.0);
}
