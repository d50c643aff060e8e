#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace achords {

/// Coarse error classes. The CLI maps each one to an exit code and prints
/// the name as the machine-readable error category.
enum class ErrorCategory {
  usage,
  io,
  format,
  dimension,
  data,
  empty_document,
  degenerate,
  numeric,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
  case ErrorCategory::usage: return "usage";
  case ErrorCategory::io: return "io";
  case ErrorCategory::format: return "format";
  case ErrorCategory::dimension: return "dimension";
  case ErrorCategory::data: return "data";
  case ErrorCategory::empty_document: return "empty-document";
  case ErrorCategory::degenerate: return "degenerate";
  case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string &what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

/// Raised when a document has nothing left to embed (all stop words or all
/// out-of-vocabulary). Batch callers skip it; single-document callers abort.
class EmptyDocumentError : public Error {
public:
  explicit EmptyDocumentError(std::string doc_id)
      : Error(ErrorCategory::empty_document,
              "document '" + doc_id + "' has no in-vocabulary tokens"),
        doc_id_(std::move(doc_id)) {}

  const std::string &doc_id() const noexcept { return doc_id_; }

private:
  std::string doc_id_;
};

/// Both prototype distances are zero, so the relative distance is undefined.
class DegenerateSampleError : public Error {
public:
  DegenerateSampleError()
      : Error(ErrorCategory::degenerate,
              "relative distance undefined: both distances are zero") {}
};

} // namespace achords
