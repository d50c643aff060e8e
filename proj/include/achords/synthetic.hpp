#pragma once

// Two-class synthetic corpus with known discriminative words. Each class has
// a bank of 100 words, 30 of which are shared with the other class. Tokens
// are drawn from the document's class bank 90% of the time and from the
// shared words otherwise; the 70 class-only words are the planted
// discriminative vocabulary.

#include "achords/default_stopwords.hpp"
#include "achords/embedding.hpp"
#include "achords/error.hpp"
#include "achords/pipeline.hpp"

#include <array>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace achords {

struct SyntheticConfig {
  std::size_t dim = 50;
  std::size_t bank_size = 100;
  std::size_t shared_words = 30;
  std::size_t docs_per_class = 200;
  std::size_t min_length = 80;
  std::size_t max_length = 300;
  double class_bank_rate = 0.9;
  double stopword_rate = 0.1; // extra stop words interleaved with content words
  double oov_rate = 0.01;     // extra tokens absent from the embedding table
  std::array<std::string, 2> labels = {"positive", "negative"};
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  EmbeddingTable table;
  std::vector<CaseRecord> records;
  std::array<std::vector<std::string>, 2> planted; // class-only words per class
  std::vector<std::string> shared;
  std::array<std::string, 2> labels;

  std::size_t class_of(const std::string &label) const { return label == labels[0] ? 0 : 1; }
};

namespace detail {

/// Distinct pronounceable pseudo-word for every index below 24³.
inline std::string pseudo_word(std::size_t index) {
  static constexpr std::array<const char *, 24> syllables = {"ba", "ke", "lo", "mi", "nu", "ra", "se", "ti",
                                                             "vo", "za", "du", "fe", "gi", "ho", "ju", "pa",
                                                             "ri", "so", "tu", "we", "xi", "yo", "ce", "qua"};
  std::string w;
  for (int i = 0; i < 3; ++i) {
    w += syllables[index % syllables.size()];
    index /= syllables.size();
  }
  return w;
}

} // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticConfig &cfg) {
  if (cfg.shared_words >= cfg.bank_size)
    throw Error(ErrorCategory::usage, "shared words must be fewer than the bank size");
  if (cfg.min_length == 0 || cfg.min_length > cfg.max_length)
    throw Error(ErrorCategory::usage, "bad document length range");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticCorpus out;
  out.labels = cfg.labels;
  out.table = EmbeddingTable(cfg.dim, "synthetic");
  std::vector<double> v(cfg.dim);
  auto add_random = [&](const std::string &word) {
    double norm = 0.0;
    for (auto &x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto &x : v)
      x /= norm;
    out.table.add(word, v);
  };

  const std::size_t unique = cfg.bank_size - cfg.shared_words;
  std::size_t next = 0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < unique; ++i)
      out.planted[c].push_back(detail::pseudo_word(next++));
  for (std::size_t i = 0; i < cfg.shared_words; ++i)
    out.shared.push_back(detail::pseudo_word(next++));
  for (const auto &bank : out.planted)
    for (const auto &w : bank)
      add_random(w);
  for (const auto &w : out.shared)
    add_random(w);
  // Stop words get vectors too, as in a real embedding file.
  for (auto sw : kDefaultStopwords)
    add_random(std::string(sw));

  std::uniform_int_distribution<std::size_t> length(cfg.min_length, cfg.max_length);
  std::uniform_int_distribution<std::size_t> pick_shared(0, cfg.shared_words - 1);
  std::uniform_int_distribution<std::size_t> pick_bank(0, cfg.bank_size - 1);
  std::uniform_int_distribution<std::size_t> pick_stop(0, kDefaultStopwords.size() - 1);
  std::size_t case_no = 0;
  for (std::size_t doc = 0; doc < cfg.docs_per_class; ++doc) {
    for (std::size_t c = 0; c < 2; ++c) {
      const std::size_t n = length(rng);
      std::string text;
      for (std::size_t t = 0; t < n; ++t) {
        std::string word;
        if (unit(rng) < cfg.class_bank_rate) {
          const std::size_t k = pick_bank(rng);
          word = k < unique ? out.planted[c][k] : out.shared[k - unique];
        } else {
          word = out.shared[pick_shared(rng)];
        }
        if (t == 0)
          word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        if (!text.empty())
          text += ' ';
        text += word;
        if (unit(rng) < cfg.stopword_rate) {
          text += ' ';
          text += kDefaultStopwords[pick_stop(rng)];
        }
        if (unit(rng) < cfg.oov_rate)
          text += " zzq" + std::to_string(t);
      }
      text += '.';
      char id[32];
      std::snprintf(id, sizeof id, "syn-%05zu", ++case_no);
      out.records.push_back({id, std::move(text), out.labels[c], {}});
    }
  }
  return out;
}

} // namespace achords
