#pragma once

#include "achords/embedding.hpp"
#include "achords/subspace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace achords {

struct CaseRecord {
  std::string case_id;
  std::string text;
  std::optional<std::string> label;
  std::vector<std::string> tags;
};

struct PreparedDocument {
  PreprocessedDoc doc;
  WordMatrix matrix;
  Subspace subspace;
};

/// tokenize → stop words → embed → subspace, with shared read-only inputs.
/// Safe to call concurrently from several threads.
class DocumentPipeline {
public:
  DocumentPipeline(const EmbeddingTable &table, const Stoplist &stoplist, Eigen::Index subspace_dim)
      : table_(&table), stoplist_(&stoplist), subspace_dim_(subspace_dim) {
    if (subspace_dim <= 0 || static_cast<std::size_t>(subspace_dim) > table.dim())
      throw Error(ErrorCategory::dimension, "subspace dimension " + std::to_string(subspace_dim) +
                                                " incompatible with embedding dimension " +
                                                std::to_string(table.dim()));
  }

  PreparedDocument prepare(const std::string &doc_id, std::string_view text) const {
    PreparedDocument out;
    out.doc = remove_stopwords(doc_id, tokenize(text), *stoplist_);
    if (out.doc.kept_tokens.empty())
      throw EmptyDocumentError(doc_id);
    out.matrix = embed(out.doc, *table_);
    out.subspace = compute_subspace(out.matrix, subspace_dim_);
    return out;
  }

  PreparedDocument prepare(const CaseRecord &record) const { return prepare(record.case_id, record.text); }

  const EmbeddingTable &table() const { return *table_; }
  const Stoplist &stoplist() const { return *stoplist_; }
  Eigen::Index subspace_dim() const { return subspace_dim_; }

private:
  const EmbeddingTable *table_;
  const Stoplist *stoplist_;
  Eigen::Index subspace_dim_;
};

} // namespace achords
