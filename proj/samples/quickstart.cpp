// Train on a small synthetic corpus, then score and explain one held-out case.

#include "achords/achords.hpp"

#include <cstdio>

using namespace achords;

int main() {
  SyntheticConfig sc;
  sc.docs_per_class = 100;
  sc.seed = 1;
  const SyntheticCorpus corpus = generate_synthetic(sc);
  const Stoplist stop = default_stopwords();
  const DocumentPipeline pipe(corpus.table, stop, 8);

  const Split parts = split(corpus.records, 0.8, 2);
  std::vector<LabeledSubspace> training, test;
  for (const auto &r : parts.train)
    training.push_back({pipe.prepare(r).subspace, *r.label});
  for (const auto &r : parts.test)
    test.push_back({pipe.prepare(r).subspace, *r.label});

  TrainingConfig tc;
  tc.subspace_dim = 8;
  tc.hyper.epochs = 20;
  tc.hyper.seed = 3;
  const ModelState model = train(training, tc);
  std::printf("held-out accuracy: %.4f\n", evaluate(model, test).accuracy);

  const CaseRecord &doc = parts.test.front();
  const auto report = explanation_report(doc, pipe, model, 5, std::string("positive"));
  std::printf("%s (true label %s): predicted %s, P(positive) = %.3f\n", doc.case_id.c_str(), doc.label->c_str(),
              report.predicted_label.c_str(), *report.score);
  for (const auto &w : report.impacts)
    std::printf("  %-10s %+.4f  x%zu\n", w.word.c_str(), w.impact, w.occurrences);
}
