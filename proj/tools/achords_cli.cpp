// achords: command-line front end for training, scoring, explaining and
// calibrating subspace LVQ document classifiers.

#include "achords/achords.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace achords;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string embeddings, stopwords, corpus, model, out;
  std::string distance = "chordal";
  std::string positive_label, bands, scores, annotations;
  Eigen::Index d = 50;
  double beta = 5.0;
  std::size_t epochs = 100;
  double lr_w = 0.05;
  double lr_lambda = 0.005;
  std::optional<std::uint64_t> seed;
  double train_fraction = 0.8;
  double threshold = 0.5;
  std::size_t top_k = 10;
  std::size_t per_band = 10;
  std::size_t per_class = 1;
  unsigned threads = 1;
  std::optional<double> target_precision;
};

int exit_code(ErrorCategory c) {
  switch (c) {
  case ErrorCategory::usage: return 2;
  case ErrorCategory::io: return 3;
  case ErrorCategory::format: return 4;
  case ErrorCategory::dimension: return 5;
  case ErrorCategory::data: return 6;
  case ErrorCategory::empty_document: return 7;
  case ErrorCategory::degenerate: return 8;
  case ErrorCategory::numeric: return 9;
  }
  return 1;
}

void log(const std::string &msg) { std::cerr << msg << '\n'; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

[[noreturn]] void usage(const std::string &msg) { throw Error(ErrorCategory::usage, msg); }

void require(const std::string &value, const char *flag) {
  if (value.empty())
    usage(std::string("missing required flag ") + flag);
}

std::uint64_t require_seed(const Options &o) {
  if (!o.seed)
    usage("--seed is required for this command");
  return *o.seed;
}

std::string checksum_of(const fs::path &p) { return hex64(fnv1a64(read_file(p))); }

/// Run manifest under --out: written as "running" before work starts and
/// rewritten as "complete" at the end, so an interrupted run stays visible.
class Manifest {
public:
  Manifest(const std::string &command, const Options &o) : dir_(o.out) {
    if (dir_.empty())
      return;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec)
      throw Error(ErrorCategory::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    doc_["command"] = command;
    doc_["config"] = {{"embeddings", o.embeddings},
                      {"stopwords", o.stopwords},
                      {"corpus", o.corpus},
                      {"model", o.model},
                      {"out", o.out},
                      {"d", o.d},
                      {"beta", o.beta},
                      {"distance", o.distance},
                      {"epochs", o.epochs},
                      {"lr_w", o.lr_w},
                      {"lr_lambda", o.lr_lambda},
                      {"train_fraction", o.train_fraction},
                      {"positive_label", o.positive_label},
                      {"threshold", o.threshold},
                      {"top_k", o.top_k},
                      {"bands", o.bands},
                      {"per_band", o.per_band},
                      {"per_class", o.per_class},
                      {"scores", o.scores},
                      {"annotations", o.annotations},
                      {"threads", o.threads}};
    if (o.target_precision)
      doc_["config"]["target_precision"] = *o.target_precision;
    doc_["seed"] = o.seed ? json(*o.seed) : json(nullptr);
    doc_["started_at"] = utc_now();
    doc_["status"] = "running";
    if (!o.model.empty() && fs::exists(o.model))
      doc_["model_checksum"] = checksum_of(o.model);
    flush();
  }

  bool enabled() const { return !dir_.empty(); }
  fs::path path(const std::string &name) const { return dir_ / name; }
  json &operator[](const char *key) { return doc_[key]; }

  void output(const std::string &name, const std::string &contents) {
    write_file_atomic(path(name), contents);
    doc_["outputs"][name] = hex64(fnv1a64(contents));
  }

  void complete() {
    if (!enabled())
      return;
    doc_["finished_at"] = utc_now();
    doc_["status"] = "complete";
    flush();
  }

private:
  void flush() { write_file_atomic(dir_ / "manifest.json", doc_.dump(2) + "\n"); }

  fs::path dir_;
  json doc_;
};

/// Writes `contents` to a file under --out when one is given, else to stdout.
void emit(Manifest &manifest, const std::string &name, const std::string &contents) {
  if (manifest.enabled())
    manifest.output(name, contents);
  else
    std::cout << contents << std::flush;
}

struct Inputs {
  EmbeddingTable table;
  Stoplist stop;
};

Inputs load_inputs(const Options &o, std::optional<std::size_t> dim = {}) {
  require(o.embeddings, "--embeddings");
  Inputs in;
  in.table = load_embeddings(o.embeddings, dim);
  in.stop = o.stopwords.empty() ? default_stopwords() : load_stopwords(o.stopwords);
  log("loaded " + std::to_string(in.table.size()) + " embeddings of dimension " + std::to_string(in.table.dim()));
  return in;
}

std::vector<CaseRecord> load_corpus(const Options &o) {
  require(o.corpus, "--corpus");
  auto records = ingest(o.corpus);
  log("read " + std::to_string(records.size()) + " records from " + o.corpus);
  return records;
}

ModelState load_model_for(const Options &o) {
  require(o.model, "--model");
  return load_model(o.model);
}

/// Embeds labeled records, logging and dropping those with nothing to embed.
std::vector<LabeledSubspace> labeled_subspaces(const std::vector<CaseRecord> &records, const DocumentPipeline &pipe) {
  std::vector<LabeledSubspace> out;
  for (const auto &r : records) {
    if (!r.label)
      throw Error(ErrorCategory::data, "record '" + r.case_id + "' has no label");
    try {
      out.push_back({pipe.prepare(r).subspace, *r.label});
    } catch (const EmptyDocumentError &e) {
      log("skipping: " + std::string(e.what()));
    }
  }
  return out;
}

std::string corpus_text(const std::vector<CaseRecord> &records) {
  std::ostringstream s;
  write_corpus(s, records);
  return s.str();
}

std::string positive_label_of(const Options &o, const ModelState &m) {
  if (!o.positive_label.empty())
    return o.positive_label;
  if (m.class_labels.size() == 2)
    usage("--positive-label is required to score a two-class model (labels: " + m.class_labels[0] + ", " +
          m.class_labels[1] + ")");
  usage("--positive-label is required");
}

std::vector<ScoredCase> load_scores(const Options &o) {
  require(o.scores, "--scores");
  std::ifstream in(o.scores);
  if (!in)
    throw Error(ErrorCategory::io, "cannot open " + o.scores);
  return read_scored_csv(in, o.scores);
}

std::vector<PercentileBand> bands_of(const Options &o) {
  return o.bands.empty() ? top_percentile_bands(10) : parse_bands(o.bands);
}

// ---------------------------------------------------------------------------

int cmd_synth_data(const Options &o) {
  require(o.out, "--out");
  SyntheticConfig cfg;
  cfg.seed = require_seed(o);
  Manifest manifest("synth-data", o);
  const auto corpus = generate_synthetic(cfg);
  std::ostringstream table;
  write_embeddings(table, corpus.table);
  manifest.output("embeddings.txt", table.str());
  manifest.output("corpus.jsonl", corpus_text(corpus.records));
  json planted;
  for (std::size_t c = 0; c < 2; ++c)
    planted[corpus.labels[c]] = corpus.planted[c];
  planted["shared"] = corpus.shared;
  manifest.output("planted.json", planted.dump(2) + "\n");
  log("wrote " + std::to_string(corpus.records.size()) + " documents and " + std::to_string(corpus.table.size()) +
      " embeddings to " + o.out);
  manifest.complete();
  return 0;
}

int cmd_train(const Options &o) {
  require(o.out, "--out");
  TrainingConfig tc;
  tc.subspace_dim = o.d;
  tc.beta = o.beta;
  tc.distance_kind = parse_distance_kind(o.distance);
  tc.hyper.epochs = o.epochs;
  tc.hyper.lr_prototypes = o.lr_w;
  tc.hyper.lr_relevances = o.lr_lambda;
  tc.hyper.seed = require_seed(o);
  tc.hyper.prototypes_per_class = o.per_class;
  Manifest manifest("train", o);

  const Inputs in = load_inputs(o);
  const auto records = load_corpus(o);
  const Split parts = split(records, o.train_fraction, *o.seed);
  manifest.output("train.jsonl", corpus_text(parts.train));
  manifest.output("test.jsonl", corpus_text(parts.test));
  log("split " + std::to_string(parts.train.size()) + " train / " + std::to_string(parts.test.size()) + " test");

  const DocumentPipeline pipe(in.table, in.stop, o.d);
  const auto training = labeled_subspaces(parts.train, pipe);
  const ModelState model = train(training, tc);
  for (const auto &e : model.training_log) {
    char line[128];
    std::snprintf(line, sizeof line, "epoch %zu cost %.6f accuracy %.4f skipped %zu", e.epoch, e.mean_cost,
                  e.accuracy, e.skipped);
    log(line);
  }
  const std::string bytes = serialize_model(model);
  manifest.output("model.bin", bytes);
  manifest["model_checksum"] = hex64(fnv1a64(bytes));

  if (!parts.test.empty()) {
    const auto test = labeled_subspaces(parts.test, pipe);
    const double acc = evaluate(model, test).accuracy;
    std::vector<LabeledVector> ctrain, ctest;
    for (const auto &r : parts.train)
      try {
        ctrain.push_back({mean_vector(pipe.prepare(r).matrix), *r.label});
      } catch (const EmptyDocumentError &) {
      }
    for (const auto &r : parts.test)
      try {
        ctest.push_back({mean_vector(pipe.prepare(r).matrix), *r.label});
      } catch (const EmptyDocumentError &) {
      }
    const double base = NearestCentroid::fit(ctrain).accuracy(ctest);
    log("held-out accuracy " + format_double17(acc) + ", nearest-centroid baseline " + format_double17(base));
    manifest["test_accuracy"] = acc;
    manifest["baseline_accuracy"] = base;
  }
  manifest.complete();
  return 0;
}

int cmd_evaluate(const Options &o) {
  Manifest manifest("evaluate", o);
  const ModelState model = load_model_for(o);
  const Inputs in = load_inputs(o, static_cast<std::size_t>(model.embedding_dim));
  const DocumentPipeline pipe(in.table, in.stop, model.subspace_dim);
  const Metrics m = evaluate(model, labeled_subspaces(load_corpus(o), pipe));
  char acc[32];
  std::snprintf(acc, sizeof acc, "%.6f", m.accuracy);
  std::cout << acc << '\n' << std::flush;
  json j = {{"accuracy", m.accuracy}, {"total", m.total}, {"labels", m.class_labels}, {"confusion", m.confusion}};
  for (std::size_t c = 0; c < m.class_labels.size(); ++c) {
    j["precision"].push_back(m.precision[c] ? json(*m.precision[c]) : json(nullptr));
    j["recall"].push_back(m.recall[c] ? json(*m.recall[c]) : json(nullptr));
  }
  std::ostringstream table;
  table << "true\\predicted";
  for (const auto &l : m.class_labels)
    table << '\t' << l;
  for (std::size_t t = 0; t < m.class_labels.size(); ++t) {
    table << '\n' << m.class_labels[t];
    for (std::size_t p = 0; p < m.class_labels.size(); ++p)
      table << '\t' << m.confusion[t][p];
  }
  log(table.str());
  if (manifest.enabled())
    manifest.output("metrics.json", j.dump(2) + "\n");
  manifest.complete();
  return 0;
}

int cmd_predict(const Options &o) {
  Manifest manifest("predict", o);
  const ModelState model = load_model_for(o);
  const Inputs in = load_inputs(o, static_cast<std::size_t>(model.embedding_dim));
  const DocumentPipeline pipe(in.table, in.stop, model.subspace_dim);
  std::optional<std::size_t> positive;
  if (!o.positive_label.empty())
    positive = require_binary(model, o.positive_label);
  std::ostringstream out;
  out << "case_id,predicted_label,distance" << (positive ? ",score" : "") << '\n';
  for (const auto &r : load_corpus(o)) {
    try {
      const auto prepared = pipe.prepare(r);
      const auto c = classify(prepared.subspace, model);
      out << csv_field(r.case_id) << ',' << csv_field(c.label) << ',' << format_double17(c.distances[c.prototype]);
      if (positive) {
        const auto d = nearest_by_polarity(c.distances, model, *positive);
        out << ',' << format_double17(score_from_distances(d.positive, d.negative, model.beta));
      }
      out << '\n';
    } catch (const EmptyDocumentError &e) {
      log("skipping: " + std::string(e.what()));
    }
  }
  emit(manifest, "predictions.csv", out.str());
  manifest.complete();
  return 0;
}

int cmd_explain(const Options &o) {
  Manifest manifest("explain", o);
  const ModelState model = load_model_for(o);
  const Inputs in = load_inputs(o, static_cast<std::size_t>(model.embedding_dim));
  const DocumentPipeline pipe(in.table, in.stop, model.subspace_dim);
  std::optional<std::string> positive;
  if (!o.positive_label.empty())
    positive = o.positive_label;
  std::ostringstream jsonl, csv;
  write_impact_csv_header(csv);
  std::size_t skipped = 0;
  for (const auto &r : load_corpus(o)) {
    try {
      const auto report = explanation_report(r, pipe, model, o.top_k, positive);
      write_explanation_record(jsonl, report);
      write_impact_csv_rows(csv, report);
    } catch (const EmptyDocumentError &e) {
      ++skipped;
      log("skipping: " + std::string(e.what()));
    }
  }
  emit(manifest, "explanations.jsonl", jsonl.str());
  if (manifest.enabled())
    manifest.output("impacts.csv", csv.str());
  manifest.complete();
  return 0;
}

int cmd_score_corpus(const Options &o) {
  Manifest manifest("score-corpus", o);
  const ModelState model = load_model_for(o);
  const std::string positive = positive_label_of(o, model);
  const Inputs in = load_inputs(o, static_cast<std::size_t>(model.embedding_dim));
  const DocumentPipeline pipe(in.table, in.stop, model.subspace_dim);
  const auto records = load_corpus(o);
  const auto result = batch_score(records, pipe, model, positive, o.threads);
  std::ostringstream scores, skipped;
  write_scored_csv(scores, rank(result.scored));
  skipped << "case_id,category,reason\n";
  for (const auto &s : result.skipped)
    skipped << csv_field(s.case_id) << ',' << category_name(s.category) << ',' << csv_field(s.reason) << '\n';
  const std::size_t above = count_above(result.scored, o.threshold);
  log("scored " + std::to_string(result.scored.size()) + ", skipped " + std::to_string(result.skipped.size()) + ", " +
      std::to_string(above) + " above threshold " + format_double17(o.threshold));
  emit(manifest, "scores.csv", scores.str());
  if (manifest.enabled()) {
    manifest.output("skipped.csv", skipped.str());
    manifest["count_above_threshold"] = above;
  }
  manifest.complete();
  return 0;
}

int cmd_rank(const Options &o) {
  Manifest manifest("rank", o);
  const auto scored = load_scores(o);
  std::ostringstream out;
  write_scored_csv(out, rank(scored));
  const std::size_t above = count_above(scored, o.threshold);
  log(std::to_string(above) + " of " + std::to_string(scored.size()) + " cases score above " +
      format_double17(o.threshold));
  emit(manifest, "ranked.csv", out.str());
  if (manifest.enabled())
    manifest["count_above_threshold"] = above;
  manifest.complete();
  return 0;
}

int cmd_sample(const Options &o) {
  const std::uint64_t seed = require_seed(o);
  Manifest manifest("sample", o);
  const auto samples = sample_for_annotation(load_scores(o), bands_of(o), o.per_band, seed);
  std::ostringstream out;
  out << "band,case_id\n";
  for (const auto &s : samples)
    for (const auto &id : s.case_ids)
      out << s.band.name() << ',' << csv_field(id) << '\n';
  emit(manifest, "sample.csv", out.str());
  manifest.complete();
  return 0;
}

int cmd_calibrate(const Options &o) {
  Manifest manifest("calibrate", o);
  const auto scored = load_scores(o);
  require(o.annotations, "--annotations");
  std::ifstream ann(o.annotations);
  if (!ann)
    throw Error(ErrorCategory::io, "cannot open " + o.annotations);
  const auto report = calibrate(scored, read_annotations(ann, o.annotations), bands_of(o), o.target_precision);
  auto opt = [](const std::optional<double> &v) { return v ? format_double17(*v) : std::string(); };
  std::ostringstream out;
  out << "band,population,score_min,score_max,annotated,positives,fraction_positive\n";
  for (const auto &b : report.bands)
    out << b.band.name() << ',' << b.population << ',' << opt(b.score_min) << ',' << opt(b.score_max) << ','
        << b.annotated << ',' << b.positives << ',' << opt(b.fraction_positive) << '\n';
  if (!report.monotone)
    log("warning: positive fraction is not monotone in score");
  if (o.target_precision)
    log(report.threshold_score ? "threshold score " + format_double17(*report.threshold_score)
                               : std::string("no band run reaches the target precision"));
  emit(manifest, "calibration.csv", out.str());
  if (manifest.enabled()) {
    manifest["monotone"] = report.monotone;
    manifest["threshold_score"] = report.threshold_score ? json(*report.threshold_score) : json(nullptr);
  }
  manifest.complete();
  return 0;
}

int cmd_grad_check(const Options &o) {
  Manifest manifest("grad-check", o);
  const auto r = run_gradient_check(o.seed.value_or(0));
  const bool pass = r.max_relative_error < 1e-5;
  char line[160];
  std::snprintf(line, sizeof line, "max relative error %.3e over %zu configurations (%zu entries): %s\n",
                r.max_relative_error, r.configurations, r.entries, pass ? "PASS" : "FAIL");
  std::cout << line << std::flush;
  if (manifest.enabled()) {
    manifest["max_relative_error"] = r.max_relative_error;
    manifest["passed"] = pass;
  }
  manifest.complete();
  return pass ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Subspace LVQ document classifier"};
  app.set_config("--config", "", "flat key = value file; command-line flags take precedence");
  app.require_subcommand(1, 1);
  app.fallthrough();

  Options o;
  app.add_option("--embeddings", o.embeddings, "word-vector text file");
  app.add_option("--stopwords", o.stopwords, "stop-word list, one per line (default: built-in English list)");
  app.add_option("--corpus", o.corpus, "JSONL corpus file or directory of .txt files");
  app.add_option("--model", o.model, "model file");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--d", o.d, "subspace dimension")->check(CLI::PositiveNumber);
  app.add_option("--beta", o.beta, "sigmoid slope")->check(CLI::PositiveNumber);
  app.add_option("--distance", o.distance, "chordal or geodesic")->check(CLI::IsMember({"chordal", "geodesic"}));
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--lr-w", o.lr_w, "prototype learning rate")->check(CLI::NonNegativeNumber);
  app.add_option("--lr-lambda", o.lr_lambda, "relevance learning rate")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--train-fraction", o.train_fraction, "training share of the split")->check(CLI::Range(0.0, 1.0));
  app.add_option("--positive-label", o.positive_label, "class scored as positive");
  app.add_option("--threshold", o.threshold, "score threshold for counting");
  app.add_option("--top-k", o.top_k, "words per explanation")->check(CLI::PositiveNumber);
  app.add_option("--bands", o.bands, "percentile bands, e.g. 90-100,80-90");
  app.add_option("--per-band", o.per_band, "cases sampled per band")->check(CLI::PositiveNumber);
  app.add_option("--per-class", o.per_class, "prototypes per class")->check(CLI::PositiveNumber);
  app.add_option("--scores", o.scores, "scored CSV file");
  app.add_option("--annotations", o.annotations, "JSONL annotations {case_id, label}");
  app.add_option("--target-precision", o.target_precision, "calibration target")->check(CLI::Range(0.0, 1.0));
  app.add_option("--threads", o.threads, "batch-scoring workers")->check(CLI::PositiveNumber);

  const std::vector<std::pair<const char *, const char *>> commands{
      {"train", "split a labeled corpus, train a model, report held-out and baseline accuracy"},
      {"evaluate", "accuracy and confusion matrix of a model on a labeled corpus"},
      {"predict", "nearest-prototype label for each document"},
      {"explain", "per-word impact explanations"},
      {"score-corpus", "probability scores and percentiles for a corpus"},
      {"rank", "rank a scored CSV and count cases above --threshold"},
      {"calibrate", "positive fraction per percentile band from annotations"},
      {"sample", "sample cases per percentile band for annotation"},
      {"grad-check", "compare the analytic gradient with central differences"},
      {"synth-data", "generate a synthetic two-class corpus and embeddings"}};
  for (const auto &[name, help] : commands)
    app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return exit_code(ErrorCategory::usage);
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "train")
      return cmd_train(o);
    if (cmd == "evaluate")
      return cmd_evaluate(o);
    if (cmd == "predict")
      return cmd_predict(o);
    if (cmd == "explain")
      return cmd_explain(o);
    if (cmd == "score-corpus")
      return cmd_score_corpus(o);
    if (cmd == "rank")
      return cmd_rank(o);
    if (cmd == "calibrate")
      return cmd_calibrate(o);
    if (cmd == "sample")
      return cmd_sample(o);
    if (cmd == "grad-check")
      return cmd_grad_check(o);
    return cmd_synth_data(o);
  } catch (const Error &e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception &e) {
    std::cerr << "error: io: " << e.what() << '\n';
    return exit_code(ErrorCategory::io);
  }
}
