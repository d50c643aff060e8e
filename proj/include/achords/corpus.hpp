#pragma once

#include "achords/error.hpp"
#include "achords/io_util.hpp"
#include "achords/lvq.hpp"
#include "achords/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace achords {

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

inline void check_unique_ids(const std::vector<CaseRecord> &records) {
  std::set<std::string> ids;
  for (const auto &r : records)
    if (!ids.insert(r.case_id).second)
      throw Error(ErrorCategory::data, "duplicate case_id '" + r.case_id + "'");
}

} // namespace detail

/// Line-delimited JSON records: {"case_id", "text", "label"?, "tags"?}.
inline std::vector<CaseRecord> read_corpus(std::istream &in, const std::string &source = "corpus") {
  std::vector<CaseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string &msg) {
    throw Error(ErrorCategory::format, source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      fail(std::string("malformed record: ") + e.what());
    }
    if (!j.is_object())
      fail("record is not an object");
    CaseRecord r;
    if (!j.contains("case_id") || !j["case_id"].is_string())
      fail("missing string field 'case_id'");
    r.case_id = j["case_id"].get<std::string>();
    if (r.case_id.empty())
      fail("empty case_id");
    if (!j.contains("text") || !j["text"].is_string())
      fail("missing string field 'text'");
    r.text = j["text"].get<std::string>();
    if (r.text.empty())
      fail("empty text for case '" + r.case_id + "'");
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string())
        fail("field 'label' must be a string");
      r.label = j["label"].get<std::string>();
    }
    if (j.contains("tags") && !j["tags"].is_null()) {
      if (!j["tags"].is_array())
        fail("field 'tags' must be an array of strings");
      for (const auto &t : j["tags"]) {
        if (!t.is_string())
          fail("field 'tags' must be an array of strings");
        r.tags.push_back(t.get<std::string>());
      }
    }
    out.push_back(std::move(r));
  }
  detail::check_unique_ids(out);
  if (out.empty())
    throw Error(ErrorCategory::data, source + ": empty corpus");
  return out;
}

inline void write_corpus(std::ostream &out, const std::vector<CaseRecord> &records) {
  for (const auto &r : records) {
    nlohmann::json j = {{"case_id", r.case_id}, {"text", r.text}};
    if (r.label)
      j["label"] = *r.label;
    if (!r.tags.empty())
      j["tags"] = r.tags;
    out << j.dump() << '\n';
  }
}

/// A corpus file, or a directory of plain-text files whose names (minus the
/// extension) become the case ids.
inline std::vector<CaseRecord> ingest(const std::filesystem::path &path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(path))
      if (entry.is_regular_file())
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CaseRecord> out;
    for (const auto &f : files) {
      CaseRecord r;
      r.case_id = f.stem().string();
      r.text = read_file(f);
      if (r.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCategory::format, f.string() + ": empty text");
      out.push_back(std::move(r));
    }
    detail::check_unique_ids(out);
    if (out.empty())
      throw Error(ErrorCategory::data, path.string() + ": empty corpus");
    return out;
  }
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCategory::io, "cannot open corpus " + path.string());
  return read_corpus(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// Train/test split

struct Split {
  std::vector<CaseRecord> train;
  std::vector<CaseRecord> test;
};

/// Seeded, label-stratified split. The overall train size is
/// round(N·fraction); per-class quotas are floor(n_c·fraction) with the
/// leftover records handed to the classes with the largest remainders, so
/// each class is within one record of its exact proportion.
inline Split split(const std::vector<CaseRecord> &records, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCategory::usage, "train fraction must lie strictly between 0 and 1");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label)
      throw Error(ErrorCategory::data, "case '" + records[i].case_id + "' has no label");
    by_label[*records[i].label].push_back(i);
  }
  for (const auto &[label, members] : by_label)
    if (members.size() < 2)
      throw Error(ErrorCategory::data, "class '" + label + "' has fewer than 2 records");

  const auto n = static_cast<double>(records.size());
  const auto target = static_cast<std::size_t>(std::llround(n * train_fraction));
  std::vector<std::size_t> quota;
  std::vector<std::pair<double, std::size_t>> remainders; // (remainder, class)
  std::size_t assigned = 0;
  std::size_t c = 0;
  for (const auto &[label, members] : by_label) {
    const double exact = static_cast<double>(members.size()) * train_fraction;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quota.push_back(base);
    assigned += base;
    remainders.emplace_back(exact - static_cast<double>(base), c++);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto &a, const auto &b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned)
    ++quota[remainders[i].second];

  std::mt19937_64 rng(seed);
  Split out;
  c = 0;
  for (auto &[label, members] : by_label) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < quota[c] ? out.train : out.test).push_back(records[members[i]]);
    ++c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and ranking

struct ScoredCase {
  std::string case_id;
  double score = 0.0;
  double percentile = 0.0;
  std::string predicted_label;
};

struct SkippedCase {
  std::string case_id;
  ErrorCategory category;
  std::string reason;
};

struct BatchScore {
  std::vector<ScoredCase> scored; // input order, skipped records removed
  std::vector<SkippedCase> skipped;
};

inline ScoredCase score_record(const CaseRecord &record, const DocumentPipeline &pipeline, const ModelState &model,
                               std::size_t positive_class) {
  const PreparedDocument prepared = pipeline.prepare(record);
  const Classification c = classify(prepared.subspace, model);
  const auto d = nearest_by_polarity(c.distances, model, positive_class);
  return {record.case_id, score_from_distances(d.positive, d.negative, model.beta), 0.0, c.label};
}

/// Scores every record against a two-class model. Failures (e.g. documents
/// with no in-vocabulary words) are collected rather than thrown. Work is
/// split across `threads` workers; each result lands in its input slot, so the
/// output does not depend on scheduling.
inline BatchScore batch_score(const std::vector<CaseRecord> &records, const DocumentPipeline &pipeline,
                              const ModelState &model, const std::string &positive_label, unsigned threads = 1) {
  const std::size_t positive_class = require_binary(model, positive_label);
  if (static_cast<Eigen::Index>(pipeline.table().dim()) != model.embedding_dim)
    throw Error(ErrorCategory::dimension, "embedding dimension " + std::to_string(pipeline.table().dim()) +
                                              " does not match model dimension " +
                                              std::to_string(model.embedding_dim));
  struct Slot {
    std::optional<ScoredCase> ok;
    std::optional<SkippedCase> failed;
  };
  std::vector<Slot> slots(records.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < records.size(); i += stride) {
      try {
        slots[i].ok = score_record(records[i], pipeline, model, positive_class);
      } catch (const Error &e) {
        slots[i].failed = SkippedCase{records[i].case_id, e.category(), e.what()};
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, records.size()))));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&work, t, threads] { work(t, threads); });
    for (auto &th : pool)
      th.join();
  }
  BatchScore out;
  for (auto &s : slots) {
    if (s.ok)
      out.scored.push_back(std::move(*s.ok));
    else
      out.skipped.push_back(std::move(*s.failed));
  }
  return out;
}

/// Sorted by (score desc, case_id asc). A case's percentile is
/// 100·(number of cases with a strictly lower score)/n, so tied scores share
/// a percentile and the minimum always sits at 0.
inline std::vector<ScoredCase> rank(std::vector<ScoredCase> scored) {
  std::sort(scored.begin(), scored.end(), [](const ScoredCase &a, const ScoredCase &b) {
    if (a.score != b.score)
      return a.score > b.score;
    return a.case_id < b.case_id;
  });
  const std::size_t n = scored.size();
  std::size_t i = n;
  while (i > 0) {
    // [j, i) is a run of equal scores; everything after index i - 1 is lower
    std::size_t j = i - 1;
    while (j > 0 && scored[j - 1].score == scored[i - 1].score)
      --j;
    const double pct = 100.0 * static_cast<double>(n - i) / static_cast<double>(n);
    for (std::size_t k = j; k < i; ++k)
      scored[k].percentile = pct;
    i = j;
  }
  return scored;
}

/// Number of cases with score strictly above `threshold`.
inline std::size_t count_above(const std::vector<ScoredCase> &scored, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(scored.begin(), scored.end(), [&](const ScoredCase &s) { return s.score > threshold; }));
}

// ---------------------------------------------------------------------------
// Percentile bands, annotation sampling, calibration

/// Half-open percentile range [low, high); a band ending at 100 includes 100.
struct PercentileBand {
  double low = 0.0;
  double high = 100.0;

  bool contains(double percentile) const {
    return percentile >= low && (percentile < high || (high >= 100.0 && percentile <= high));
  }
  std::string name() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g-%g", low, high);
    return buf;
  }
};

/// Parses "87-88,88-89,...".
inline std::vector<PercentileBand> parse_bands(std::string_view spec) {
  std::vector<PercentileBand> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    std::string_view item = spec.substr(start, end - start);
    while (!item.empty() && item.front() == ' ')
      item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ')
      item.remove_suffix(1);
    const std::size_t dash = item.find('-', 1);
    if (dash == std::string_view::npos)
      throw Error(ErrorCategory::usage, "bad percentile band '" + std::string(item) + "' (expected LOW-HIGH)");
    const auto lo = detail::parse_double(item.substr(0, dash));
    const auto hi = detail::parse_double(item.substr(dash + 1));
    if (!lo || !hi || !(*lo >= 0.0) || !(*hi <= 100.0) || !(*lo < *hi))
      throw Error(ErrorCategory::usage, "bad percentile band '" + std::string(item) + "'");
    out.push_back({*lo, *hi});
    start = end + 1;
  }
  return out;
}

/// One-percentile bands covering the top `count` percentiles.
inline std::vector<PercentileBand> top_percentile_bands(int count) {
  std::vector<PercentileBand> out;
  for (int i = 0; i < count; ++i)
    out.push_back({100.0 - i - 1.0, 100.0 - i});
  return out;
}

namespace detail {

inline void require_disjoint(std::vector<PercentileBand> bands) {
  std::sort(bands.begin(), bands.end(), [](const auto &a, const auto &b) { return a.low < b.low; });
  for (std::size_t i = 1; i < bands.size(); ++i)
    if (bands[i].low < bands[i - 1].high)
      throw Error(ErrorCategory::usage, "percentile bands " + bands[i - 1].name() + " and " + bands[i].name() +
                                            " overlap");
}

} // namespace detail

struct BandSample {
  PercentileBand band;
  std::vector<std::string> case_ids; // in rank order
};

/// Uniform sample without replacement of `per_band` cases from each band.
inline std::vector<BandSample> sample_for_annotation(const std::vector<ScoredCase> &scored,
                                                     const std::vector<PercentileBand> &bands, std::size_t per_band,
                                                     std::uint64_t seed) {
  detail::require_disjoint(bands);
  const auto ranked = rank(scored);
  std::mt19937_64 rng(seed);
  std::vector<BandSample> out;
  for (const auto &band : bands) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ranked.size(); ++i)
      if (band.contains(ranked[i].percentile))
        members.push_back(i);
    if (members.size() < per_band)
      throw Error(ErrorCategory::data, "band " + band.name() + " holds " + std::to_string(members.size()) +
                                           " cases, fewer than the " + std::to_string(per_band) + " requested");
    for (std::size_t i = 0; i < per_band; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
      std::swap(members[i], members[pick(rng)]);
    }
    members.resize(per_band);
    std::sort(members.begin(), members.end());
    BandSample s{band, {}};
    for (std::size_t i : members)
      s.case_ids.push_back(ranked[i].case_id);
    out.push_back(std::move(s));
  }
  return out;
}

struct BandCalibration {
  PercentileBand band;
  std::size_t population = 0;
  std::optional<double> score_min; // over every scored case in the band
  std::optional<double> score_max;
  std::size_t annotated = 0;
  std::size_t positives = 0;
  std::optional<double> fraction_positive; // undefined without annotations
};

struct CalibrationReport {
  std::vector<BandCalibration> bands; // descending by score
  std::optional<double> target_precision;
  std::optional<double> threshold_score;
  bool monotone = true; // fractions never rise as scores fall (reported only)
};

/// Precision per percentile band from the supplied annotations. When a target
/// is given, walks the bands from the top and returns the lower score
/// boundary of the last band in the unbroken run whose positive fraction
/// meets it.
inline CalibrationReport calibrate(const std::vector<ScoredCase> &scored,
                                   const std::map<std::string, bool> &annotations,
                                   std::vector<PercentileBand> bands,
                                   std::optional<double> target_precision = std::nullopt) {
  detail::require_disjoint(bands);
  const auto ranked = rank(scored);
  std::map<std::string, const ScoredCase *> by_id;
  for (const auto &s : ranked)
    by_id[s.case_id] = &s;
  for (const auto &[id, _] : annotations)
    if (!by_id.count(id))
      throw Error(ErrorCategory::data, "annotation for unknown case '" + id + "'");

  std::sort(bands.begin(), bands.end(), [](const auto &a, const auto &b) { return a.low > b.low; });
  CalibrationReport report;
  report.target_precision = target_precision;
  for (const auto &band : bands) {
    BandCalibration bc;
    bc.band = band;
    for (const auto &s : ranked) {
      if (!band.contains(s.percentile))
        continue;
      ++bc.population;
      bc.score_min = bc.score_min ? std::min(*bc.score_min, s.score) : s.score;
      bc.score_max = bc.score_max ? std::max(*bc.score_max, s.score) : s.score;
      if (auto it = annotations.find(s.case_id); it != annotations.end()) {
        ++bc.annotated;
        bc.positives += it->second ? 1 : 0;
      }
    }
    if (bc.annotated)
      bc.fraction_positive = static_cast<double>(bc.positives) / static_cast<double>(bc.annotated);
    report.bands.push_back(bc);
  }

  std::optional<double> previous;
  for (const auto &b : report.bands) {
    if (!b.fraction_positive)
      continue;
    if (previous && *b.fraction_positive > *previous)
      report.monotone = false;
    previous = b.fraction_positive;
  }

  if (target_precision) {
    for (const auto &b : report.bands) {
      if (!b.fraction_positive || *b.fraction_positive < *target_precision || !b.score_min)
        break;
      report.threshold_score = b.score_min;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// File formats

inline void write_scored_csv(std::ostream &out, const std::vector<ScoredCase> &scored) {
  out << "case_id,score,percentile,predicted_label\n";
  char pct[32];
  for (const auto &s : scored) {
    std::snprintf(pct, sizeof pct, "%.4f", s.percentile);
    out << csv_field(s.case_id) << ',' << format_double17(s.score) << ',' << pct << ','
        << csv_field(s.predicted_label) << '\n';
  }
}

/// Reads a scored table; only case_id and score are required columns.
inline std::vector<ScoredCase> read_scored_csv(std::istream &in, const std::string &source = "scores") {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCategory::format, source + ": empty scored file");
  const auto header = split_csv_line(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    return std::nullopt;
  };
  const auto id_col = column("case_id");
  const auto score_col = column("score");
  if (!id_col || !score_col)
    throw Error(ErrorCategory::format, source + ": header needs case_id and score columns");
  const auto pct_col = column("percentile");
  const auto label_col = column("predicted_label");
  std::vector<ScoredCase> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto f = split_csv_line(line);
    auto at = [&](std::size_t i) -> const std::string & {
      if (i >= f.size())
        throw Error(ErrorCategory::format, source + ":" + std::to_string(line_no) + ": too few columns");
      return f[i];
    };
    ScoredCase s;
    s.case_id = at(*id_col);
    const auto score = detail::parse_double(at(*score_col));
    if (!score || !std::isfinite(*score))
      throw Error(ErrorCategory::format, source + ":" + std::to_string(line_no) + ": bad score");
    s.score = *score;
    if (pct_col) {
      if (const auto p = detail::parse_double(at(*pct_col)))
        s.percentile = *p;
    }
    if (label_col)
      s.predicted_label = at(*label_col);
    out.push_back(std::move(s));
  }
  return out;
}

/// One JSON object per line: {"case_id": "...", "label": true|false}.
inline std::map<std::string, bool> read_annotations(std::istream &in, const std::string &source = "annotations") {
  std::map<std::string, bool> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      throw Error(ErrorCategory::format, where + ": malformed annotation: " + e.what());
    }
    if (!j.is_object() || !j.contains("case_id") || !j["case_id"].is_string() || !j.contains("label") ||
        !j["label"].is_boolean())
      throw Error(ErrorCategory::format, where + ": expected {\"case_id\": string, \"label\": boolean}");
    const auto id = j["case_id"].get<std::string>();
    if (!out.emplace(id, j["label"].get<bool>()).second)
      throw Error(ErrorCategory::data, where + ": duplicate annotation for '" + id + "'");
  }
  return out;
}

inline void write_annotations(std::ostream &out, const std::map<std::string, bool> &annotations) {
  for (const auto &[id, label] : annotations)
    out << nlohmann::json{{"case_id", id}, {"label", label}}.dump() << '\n';
}

} // namespace achords
