#pragma once

#include "achords/default_stopwords.hpp"
#include "achords/error.hpp"
#include "achords/linalg.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace achords {

/// Word → vector map over a fixed dimension. Immutable once loaded, so a
/// single table can be shared by concurrent readers.
class EmbeddingTable {
public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::string source_name)
      : dim_(dim), source_name_(std::move(source_name)) {
    if (dim == 0)
      throw Error(ErrorCategory::dimension, "embedding dimension must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::string &source_name() const noexcept { return source_name_; }
  /// Number of entries that overwrote an earlier entry for the same word.
  std::size_t duplicate_count() const noexcept { return duplicates_; }

  /// Words in first-insertion order.
  const std::vector<std::string> &words() const noexcept { return words_; }

  bool contains(const std::string &word) const { return index_.count(word) != 0; }

  /// Vector for `word`, or nullopt when out of vocabulary.
  std::optional<Eigen::Map<const Vector>> find(const std::string &word) const {
    const auto it = index_.find(word);
    if (it == index_.end())
      return std::nullopt;
    return Eigen::Map<const Vector>(values_.data() + it->second * dim_,
                                    static_cast<Eigen::Index>(dim_));
  }

  Eigen::Map<const Vector> at(const std::string &word) const {
    auto v = find(word);
    if (!v)
      throw Error(ErrorCategory::data, "word not in vocabulary: '" + word + "'");
    return *v;
  }

  /// Inserts or overwrites. Last write wins for duplicate words.
  void add(const std::string &word, std::span<const double> vec) {
    if (vec.size() != dim_)
      throw Error(ErrorCategory::dimension,
                  "vector for '" + word + "' has length " +
                      std::to_string(vec.size()) + ", expected " +
                      std::to_string(dim_));
    for (double x : vec)
      if (!std::isfinite(x))
        throw Error(ErrorCategory::format,
                    "non-finite component in vector for '" + word + "'");
    if (word.empty())
      throw Error(ErrorCategory::format, "empty word key");
    const auto [it, inserted] = index_.try_emplace(word, words_.size());
    if (inserted) {
      words_.push_back(word);
      values_.insert(values_.end(), vec.begin(), vec.end());
    } else {
      ++duplicates_;
      std::copy(vec.begin(), vec.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    }
  }

private:
  std::size_t dim_ = 0;
  std::string source_name_;
  std::vector<std::string> words_;
  std::vector<double> values_; // row i = vector of words_[i]
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t duplicates_ = 0;
};

namespace detail {

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    if (i > start)
      out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return value;
}

} // namespace detail

/// Reads the whitespace text format: one `word c1 ... cD` entry per line.
/// The dimension is fixed by the first entry.
inline EmbeddingTable read_embeddings(std::istream &in, const std::string &source_name,
                                      std::optional<std::size_t> expected_dim = {}) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> buffer;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    const auto fields = detail::split_whitespace(line);
    if (fields.empty())
      continue;
    if (fields.size() < 2)
      throw Error(ErrorCategory::format, source_name + ":" + std::to_string(line_no) +
                                             ": entry has no vector components");
    const std::size_t dim = fields.size() - 1;
    if (table.dim() == 0) {
      if (expected_dim && *expected_dim != dim)
        throw Error(ErrorCategory::dimension,
                    source_name + ": embedding dimension " + std::to_string(dim) +
                        " does not match expected " + std::to_string(*expected_dim));
      table = EmbeddingTable(dim, source_name);
    } else if (dim != table.dim()) {
      throw Error(ErrorCategory::dimension,
                  source_name + ":" + std::to_string(line_no) + ": found " +
                      std::to_string(dim) + " components, expected " +
                      std::to_string(table.dim()));
    }
    buffer.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto v = detail::parse_double(fields[j + 1]);
      if (!v)
        throw Error(ErrorCategory::format, source_name + ":" + std::to_string(line_no) +
                                               ": malformed number '" +
                                               std::string(fields[j + 1]) + "'");
      if (!std::isfinite(*v))
        throw Error(ErrorCategory::format, source_name + ":" + std::to_string(line_no) +
                                               ": non-finite component");
      buffer[j] = *v;
    }
    table.add(std::string(fields[0]), buffer);
  }
  if (table.empty())
    throw Error(ErrorCategory::format, source_name + ": no embedding entries");
  return table;
}

inline EmbeddingTable load_embeddings(const std::filesystem::path &path,
                                      std::optional<std::size_t> expected_dim = {}) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCategory::io, "cannot open embedding file " + path.string());
  return read_embeddings(in, path.filename().string(), expected_dim);
}

/// Writes the table in the same text format, 17 significant digits per
/// component, which reloads bit-exactly.
inline void write_embeddings(std::ostream &out, const EmbeddingTable &table) {
  char buf[32];
  for (const auto &word : table.words()) {
    out << word;
    for (double x : table.at(word)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

inline void save_embeddings(const std::filesystem::path &path, const EmbeddingTable &table) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCategory::io, "cannot write embedding file " + path.string());
  write_embeddings(out, table);
}

// ---------------------------------------------------------------------------
// Tokenization and stop words

namespace detail {
// Bytes of multi-byte UTF-8 sequences count as letters.
inline bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
} // namespace detail

/// Lowercases, splits on whitespace, trims non-alphanumeric characters at
/// both ends of each token, and drops empty tokens and all-digit tokens
/// longer than four characters (application numbers, long numerals).
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view raw : detail::split_whitespace(text)) {
    std::size_t b = 0, e = raw.size();
    while (b < e && !detail::is_word_char(static_cast<unsigned char>(raw[b])))
      ++b;
    while (e > b && !detail::is_word_char(static_cast<unsigned char>(raw[e - 1])))
      --e;
    if (b == e)
      continue;
    std::string token(raw.substr(b, e - b));
    bool all_digits = true;
    for (char &c : token) {
      const auto uc = static_cast<unsigned char>(c);
      if (!std::isdigit(uc))
        all_digits = false;
      if (uc < 0x80)
        c = static_cast<char>(std::tolower(uc));
    }
    if (all_digits && token.size() > 4)
      continue;
    out.push_back(std::move(token));
  }
  return out;
}

using Stoplist = std::unordered_set<std::string>;

inline Stoplist default_stopwords() {
  Stoplist out;
  for (auto w : kDefaultStopwords)
    out.emplace(w);
  return out;
}

/// One word per line; blank lines and lines starting with '#' are ignored.
inline Stoplist read_stopwords(std::istream &in) {
  Stoplist out;
  std::string line;
  while (std::getline(in, line)) {
    const auto fields = detail::split_whitespace(line);
    if (fields.empty() || fields.front().front() == '#')
      continue;
    std::string word(fields.front());
    for (char &c : word)
      if (static_cast<unsigned char>(c) < 0x80)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.insert(std::move(word));
  }
  return out;
}

inline Stoplist load_stopwords(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCategory::io, "cannot open stop-word file " + path.string());
  return read_stopwords(in);
}

struct PreprocessedDoc {
  std::string doc_id;
  std::vector<std::string> kept_tokens;
  std::size_t dropped_stopwords = 0;
  std::size_t dropped_oov = 0;
  /// kept / (kept + dropped_oov); 1 until embedding has run.
  double coverage = 1.0;
};

inline PreprocessedDoc remove_stopwords(std::string doc_id, const std::vector<std::string> &tokens,
                                        const Stoplist &stoplist) {
  PreprocessedDoc doc;
  doc.doc_id = std::move(doc_id);
  doc.kept_tokens.reserve(tokens.size());
  for (const auto &t : tokens) {
    if (stoplist.count(t))
      ++doc.dropped_stopwords;
    else
      doc.kept_tokens.push_back(t);
  }
  return doc;
}

struct WordMatrix {
  std::string doc_id;
  Matrix columns; // D × n, column j embeds tokens[j]
  std::vector<std::string> tokens;

  Eigen::Index dim() const { return columns.rows(); }
  Eigen::Index size() const { return columns.cols(); }
};

/// Looks up every kept token. Out-of-vocabulary tokens are removed from
/// `doc.kept_tokens` and counted rather than zero-filled.
inline WordMatrix embed(PreprocessedDoc &doc, const EmbeddingTable &table) {
  std::vector<std::string> known;
  known.reserve(doc.kept_tokens.size());
  std::size_t oov = 0;
  for (auto &t : doc.kept_tokens) {
    if (table.contains(t))
      known.push_back(std::move(t));
    else
      ++oov;
  }
  doc.kept_tokens = std::move(known);
  doc.dropped_oov += oov;
  const std::size_t kept = doc.kept_tokens.size();
  doc.coverage = kept + doc.dropped_oov == 0
                     ? 0.0
                     : static_cast<double>(kept) / static_cast<double>(kept + doc.dropped_oov);
  if (kept == 0)
    throw EmptyDocumentError(doc.doc_id);

  WordMatrix m;
  m.doc_id = doc.doc_id;
  m.tokens = doc.kept_tokens;
  m.columns.resize(static_cast<Eigen::Index>(table.dim()), static_cast<Eigen::Index>(kept));
  for (std::size_t j = 0; j < kept; ++j)
    m.columns.col(static_cast<Eigen::Index>(j)) = table.at(doc.kept_tokens[j]);
  return m;
}

} // namespace achords
