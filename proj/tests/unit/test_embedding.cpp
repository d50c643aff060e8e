#include "achords/default_stopwords.hpp"
#include "achords/embedding.hpp"
#include "achords/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace achords;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string &name, const std::string &contents) {
  const fs::path dir = fs::temp_directory_path() / "achords_test_embedding";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

ErrorCategory category_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.category();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCategory::usage;
}

} // namespace

TEST(LoadEmbeddings, MinimalFile) {
  const auto p = temp_file("min.txt", "a 1.0 0.0\nb 0.0 1.0\n");
  const auto t = load_embeddings(p);
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.at("a")(0), 1.0);
  EXPECT_EQ(t.at("b")(1), 1.0);
}

TEST(LoadEmbeddings, ExpectedDimensionMismatch) {
  const auto p = temp_file("min3.txt", "a 1.0 0.0\nb 0.0 1.0\n");
  EXPECT_EQ(category_of([&] { load_embeddings(p, 3); }), ErrorCategory::dimension);
  EXPECT_NO_THROW(load_embeddings(p, 2));
}

TEST(LoadEmbeddings, Errors) {
  EXPECT_EQ(category_of([] { load_embeddings("/nonexistent/achords/vectors.txt"); }), ErrorCategory::io);
  EXPECT_EQ(category_of([] { load_embeddings(temp_file("empty.txt", "")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { load_embeddings(temp_file("bad.txt", "a 1.0 x\n")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { load_embeddings(temp_file("nan.txt", "a 1.0 nan\n")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { load_embeddings(temp_file("ragged.txt", "a 1 2\nb 1 2 3\n")); }),
            ErrorCategory::dimension);
  EXPECT_EQ(category_of([] { load_embeddings(temp_file("novec.txt", "a\n")); }), ErrorCategory::format);
}

TEST(LoadEmbeddings, MalformedReportsLine) {
  std::istringstream in("a 1 2\nb 1 2\nc 1 oops\n");
  try {
    read_embeddings(in, "vec.txt");
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("vec.txt:3"), std::string::npos) << e.what();
  }
}

TEST(LoadEmbeddings, DuplicateLastWins) {
  std::istringstream in("a 1 2\nb 3 4\na 5 6\n");
  const auto t = read_embeddings(in, "dup");
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.duplicate_count(), 1u);
  EXPECT_EQ(t.at("a")(0), 5.0);
  EXPECT_EQ(t.at("a")(1), 6.0);
}

TEST(LoadEmbeddings, AcceptsPlusSignAndExponents) {
  std::istringstream in("w +1.5e-3 -2E2\n");
  const auto t = read_embeddings(in, "x");
  EXPECT_EQ(t.at("w")(0), 1.5e-3);
  EXPECT_EQ(t.at("w")(1), -200.0);
}

TEST(LoadEmbeddings, SyntheticRoundTripIsBitExact) {
  SyntheticConfig cfg;
  cfg.docs_per_class = 1;
  cfg.seed = 3;
  const auto corpus = generate_synthetic(cfg);
  // first 50 entries
  EmbeddingTable first(corpus.table.dim(), "first50");
  for (std::size_t i = 0; i < 50; ++i) {
    const auto &w = corpus.table.words()[i];
    const Vector v = corpus.table.at(w);
    first.add(w, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  }
  const fs::path p = fs::temp_directory_path() / "achords_test_embedding" / "rt.txt";
  fs::create_directories(p.parent_path());
  save_embeddings(p, first);
  const auto back = load_embeddings(p, 50);
  ASSERT_EQ(back.size(), 50u);
  for (const auto &w : first.words()) {
    const auto a = first.at(w);
    const auto b = back.at(w);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      ASSERT_EQ(a(i), b(i)) << w << "[" << i << "]";
  }
  // serialize again: identical text
  std::ostringstream s1, s2;
  write_embeddings(s1, first);
  write_embeddings(s2, back);
  EXPECT_EQ(s1.str(), s2.str());
}

TEST(Tokenize, SpecExamples) {
  EXPECT_EQ(tokenize("The Court's decision."), (std::vector<std::string>{"the", "court's", "decision"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("no. 11185/84 home"), (std::vector<std::string>{"no", "11185/84", "home"}));
}

TEST(Tokenize, DigitRule) {
  EXPECT_EQ(tokenize("1998 12345 (2004) 2004."), (std::vector<std::string>{"1998", "2004", "2004"}));
  EXPECT_EQ(tokenize("\"quoted\" -- ... !?"), (std::vector<std::string>{"quoted"}));
}

TEST(Tokenize, KeepsUtf8Letters) {
  EXPECT_EQ(tokenize("Ústí nad Labem"), (std::vector<std::string>{"Ústí", "nad", "labem"}));
}

TEST(Tokenize, DeterministicAndIdempotent) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcXYZ019 .,;'\"()-/\t\n";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int i = 0; i < 60; ++i)
      text += alphabet[pick(rng)];
    const auto once = tokenize(text);
    EXPECT_EQ(once, tokenize(text));
    std::string joined;
    for (const auto &t : once)
      joined += t + " ";
    EXPECT_EQ(tokenize(joined), once) << text;
  }
}

TEST(Stopwords, SpecExamples) {
  const Stoplist sl{"the", "is"};
  auto d = remove_stopwords("x", {"the", "court", "is", "adjourned"}, sl);
  EXPECT_EQ(d.kept_tokens, (std::vector<std::string>{"court", "adjourned"}));
  EXPECT_EQ(d.dropped_stopwords, 2u);

  d = remove_stopwords("x", {"the", "is", "the"}, sl);
  EXPECT_TRUE(d.kept_tokens.empty());
  EXPECT_EQ(d.dropped_stopwords, 3u);

  const std::vector<std::string> tokens{"the", "court"};
  d = remove_stopwords("x", tokens, Stoplist{});
  EXPECT_EQ(d.kept_tokens, tokens);
  EXPECT_EQ(d.dropped_stopwords, 0u);
}

TEST(Stopwords, FileFormat) {
  std::istringstream in("# comment\nthe\n\nOf\n  and  \n#skip\n");
  const auto sl = read_stopwords(in);
  EXPECT_EQ(sl, (Stoplist{"the", "of", "and"}));
}

TEST(Stopwords, ShippedFileMatchesBuiltInList) {
  const auto from_file = load_stopwords(fs::path(ACHORDS_SOURCE_DIR) / "data" / "stopwords_en.txt");
  EXPECT_EQ(from_file, default_stopwords());
  EXPECT_EQ(from_file.size(), kDefaultStopwords.size());
}

TEST(Embed, SkipsOov) {
  EmbeddingTable t(2, "t");
  t.add("court", std::vector<double>{1.0, 2.0});
  PreprocessedDoc d = remove_stopwords("doc", {"court", "zzzunknown"}, {});
  const auto m = embed(d, t);
  EXPECT_EQ(m.size(), 1);
  EXPECT_EQ(d.dropped_oov, 1u);
  EXPECT_DOUBLE_EQ(d.coverage, 0.5);
  EXPECT_EQ(m.columns(0, 0), 1.0);
  EXPECT_EQ(m.columns(1, 0), 2.0);
}

TEST(Embed, FullCoverageAndRepeats) {
  EmbeddingTable t(3, "t");
  t.add("a", std::vector<double>{1, 0, 0});
  t.add("b", std::vector<double>{0, 1, 0});
  PreprocessedDoc d = remove_stopwords("doc", {"a", "b", "a"}, {});
  const auto m = embed(d, t);
  EXPECT_EQ(m.size(), 3);
  EXPECT_EQ(d.coverage, 1.0);
  EXPECT_EQ(m.columns.col(0), m.columns.col(2));
  EXPECT_NE(m.columns.col(0), m.columns.col(1));
  EXPECT_EQ(m.tokens, (std::vector<std::string>{"a", "b", "a"}));
}

TEST(Embed, AllOovCarriesDocId) {
  EmbeddingTable t(2, "t");
  t.add("a", std::vector<double>{1, 0});
  PreprocessedDoc d = remove_stopwords("case-7", {"x", "y"}, {});
  try {
    embed(d, t);
    FAIL();
  } catch (const EmptyDocumentError &e) {
    EXPECT_EQ(e.doc_id(), "case-7");
    EXPECT_EQ(e.category(), ErrorCategory::empty_document);
  }
}

TEST(Embed, ColumnsEqualLookupsOnRandomVocabularies) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingTable t(7, "rand");
    std::vector<std::string> vocab;
    for (int w = 0; w < 30; ++w) {
      vocab.push_back("w" + std::to_string(w));
      std::vector<double> v(7);
      for (auto &x : v)
        x = n(rng);
      t.add(vocab.back(), v);
    }
    std::vector<std::string> tokens;
    std::uniform_int_distribution<int> pick(0, 39);
    for (int i = 0; i < 50; ++i) {
      const int k = pick(rng);
      tokens.push_back(k < 30 ? vocab[static_cast<std::size_t>(k)] : "oov" + std::to_string(k));
    }
    PreprocessedDoc d = remove_stopwords("r", tokens, {});
    const auto m = embed(d, t);
    ASSERT_EQ(static_cast<std::size_t>(m.size()), d.kept_tokens.size());
    for (Eigen::Index j = 0; j < m.size(); ++j)
      EXPECT_EQ(Vector(m.columns.col(j)), Vector(t.at(d.kept_tokens[static_cast<std::size_t>(j)])));
    const double expect = static_cast<double>(d.kept_tokens.size()) /
                          static_cast<double>(d.kept_tokens.size() + d.dropped_oov);
    EXPECT_EQ(d.coverage, expect);
    EXPECT_EQ(d.kept_tokens.size() + d.dropped_oov, tokens.size());
  }
}

TEST(EmbeddingTable, RejectsBadVectors) {
  EmbeddingTable t(2, "t");
  EXPECT_THROW(t.add("a", std::vector<double>{1.0}), Error);
  EXPECT_THROW(t.add("a", std::vector<double>{1.0, std::nan("")}), Error);
  EXPECT_THROW(t.add("", std::vector<double>{1.0, 2.0}), Error);
  EXPECT_FALSE(t.find("a").has_value());
}
