#pragma once

#include "achords/error.hpp"
#include "achords/grassmann.hpp"
#include "achords/io_util.hpp"
#include "achords/lvq.hpp"
#include "achords/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace achords {

struct WordImpact {
  std::string word;
  double impact = 0.0; // > 0 supports the predicted class
  std::size_t occurrences = 0;
};

struct ExplanationReport {
  std::string doc_id;
  std::string predicted_label;
  std::string runner_up_label;
  std::optional<double> score;
  std::size_t top_k = 0;
  std::vector<WordImpact> impacts; // at most top_k, by |impact| descending
};

namespace detail {

/// Σᵢ λᵢ·(v̂ · proto_directionᵢ)²
inline double alignment_energy(const Eigen::Ref<const Vector> &unit_word, const PrincipalAngleDecomposition &pad,
                               const Vector &relevances) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pad.proto_directions.cols() && i < relevances.size(); ++i) {
    const double a = unit_word.dot(pad.proto_directions.col(i));
    s += relevances(i) * a * a;
  }
  return s;
}

inline void sort_impacts(std::vector<WordImpact> &impacts) {
  std::sort(impacts.begin(), impacts.end(), [](const WordImpact &a, const WordImpact &b) {
    const double fa = std::abs(a.impact), fb = std::abs(b.impact);
    if (fa != fb)
      return fa > fb;
    return a.word < b.word;
  });
}

} // namespace detail

/// Per-word attribution. Each distinct word's unit vector is scored by its
/// relevance-weighted squared alignment with the principal directions of the
/// winning prototype, minus the same quantity for the nearest prototype of
/// any other class; repeated words contribute once per occurrence.
inline std::vector<WordImpact> word_impact(const WordMatrix &matrix, const Subspace &doc, const ModelState &model) {
  if (matrix.size() == 0)
    throw EmptyDocumentError(matrix.doc_id);
  const Classification winner = classify(doc, model);
  const std::size_t predicted_class = model.prototypes[winner.prototype].class_index;
  std::optional<std::size_t> rival;
  for (std::size_t j = 0; j < model.prototypes.size(); ++j) {
    if (model.prototypes[j].class_index == predicted_class)
      continue;
    if (!rival || winner.distances[j] < winner.distances[*rival])
      rival = j;
  }
  if (!rival)
    throw Error(ErrorCategory::data, "model has no prototype outside the predicted class");

  const auto pad_win = detail::decompose(doc.basis, model.prototypes[winner.prototype].basis);
  const auto pad_rival = detail::decompose(doc.basis, model.prototypes[*rival].basis);

  std::map<std::string, std::pair<Eigen::Index, std::size_t>> seen; // word → (first column, count)
  for (Eigen::Index j = 0; j < matrix.size(); ++j) {
    auto [it, inserted] = seen.try_emplace(matrix.tokens[static_cast<std::size_t>(j)], j, 0);
    ++it->second.second;
  }

  std::vector<WordImpact> out;
  out.reserve(seen.size());
  for (const auto &[word, slot] : seen) {
    const Vector v = matrix.columns.col(slot.first);
    const double norm = v.norm();
    double per_occurrence = 0.0;
    if (norm > 0.0) {
      const Vector unit = v / norm;
      per_occurrence = detail::alignment_energy(unit, pad_win, model.relevances.weights) -
                       detail::alignment_energy(unit, pad_rival, model.relevances.weights);
    }
    out.push_back({word, static_cast<double>(slot.second) * per_occurrence, slot.second});
  }
  detail::sort_impacts(out);
  return out;
}

/// Runs the whole pipeline on one case and keeps the k strongest words.
/// The score is the two-class probability of `positive_label` when given,
/// otherwise of the predicted label; it is omitted for multi-class models.
inline ExplanationReport explanation_report(const CaseRecord &record, const DocumentPipeline &pipeline,
                                            const ModelState &model, std::size_t k,
                                            const std::optional<std::string> &positive_label = std::nullopt) {
  if (k == 0)
    throw Error(ErrorCategory::usage, "top-k must be at least 1");
  PreparedDocument prepared;
  try {
    prepared = pipeline.prepare(record);
  } catch (const EmptyDocumentError &) {
    throw;
  } catch (const Error &e) {
    throw Error(e.category(), "case '" + record.case_id + "': " + e.what());
  }
  ExplanationReport report;
  report.doc_id = record.case_id;
  report.top_k = k;

  const Classification winner = classify(prepared.subspace, model);
  report.predicted_label = winner.label;
  const std::size_t predicted_class = model.prototypes[winner.prototype].class_index;
  std::optional<std::size_t> rival;
  for (std::size_t j = 0; j < model.prototypes.size(); ++j)
    if (model.prototypes[j].class_index != predicted_class && (!rival || winner.distances[j] < winner.distances[*rival]))
      rival = j;
  if (rival)
    report.runner_up_label = model.label_of(*rival);

  if (model.class_labels.size() == 2) {
    const std::size_t pos = model.class_index(positive_label.value_or(winner.label));
    const auto d = nearest_by_polarity(winner.distances, model, pos);
    if (d.positive + d.negative > 0.0)
      report.score = score_from_distances(d.positive, d.negative, model.beta);
  }

  report.impacts = word_impact(prepared.matrix, prepared.subspace, model);
  if (report.impacts.size() > k)
    report.impacts.resize(k);
  return report;
}

inline nlohmann::json to_json(const ExplanationReport &r) {
  nlohmann::json impacts = nlohmann::json::array();
  for (const auto &w : r.impacts)
    impacts.push_back({{"word", w.word}, {"impact", w.impact}, {"occurrences", w.occurrences}});
  nlohmann::json j = {{"doc_id", r.doc_id},
                      {"predicted_label", r.predicted_label},
                      {"runner_up_label", r.runner_up_label},
                      {"top_k", r.top_k},
                      {"impacts", std::move(impacts)}};
  j["score"] = r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr);
  return j;
}

/// One JSON object per line.
inline void write_explanation_record(std::ostream &out, const ExplanationReport &r) { out << to_json(r).dump() << '\n'; }

inline void write_impact_csv_header(std::ostream &out) { out << "doc_id,rank,word,impact,occurrences\n"; }

/// Flat bar-chart rows: one per (document, word).
inline void write_impact_csv_rows(std::ostream &out, const ExplanationReport &r) {
  for (std::size_t i = 0; i < r.impacts.size(); ++i) {
    const auto &w = r.impacts[i];
    out << csv_field(r.doc_id) << ',' << (i + 1) << ',' << csv_field(w.word) << ',' << format_double17(w.impact) << ','
        << w.occurrences << '\n';
  }
}

} // namespace achords
