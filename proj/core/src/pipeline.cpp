#include "topeval/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "topeval/annsvc.hpp"
#include "topeval/autoeval.hpp"
#include "topeval/cluster.hpp"
#include "topeval/coherence.hpp"
#include "topeval/cooccurrence.hpp"
#include "topeval/corpus.hpp"
#include "topeval/embedding.hpp"
#include "topeval/hash.hpp"
#include "topeval/index.hpp"
#include "topeval/intrusion.hpp"
#include "topeval/records.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fingerprint(const std::vector<fs::path>& inputs) {
  std::uint64_t h = fnv1a64("inputs");
  for (const auto& p : inputs) {
    h = fnv1a64(p.filename().string(), h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(read_file(p), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Rows of a tab-separated output, skipping the comment header and the
// column-name line.
std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(path.string() + ": bad number '" + s + "'");
  }
}

struct CorpusData {
  Vocabulary vocab;
  std::vector<Document> docs;
};

CorpusData load_corpus_outputs(const Pipeline& p) {
  CorpusData c;
  c.vocab = load_vocabulary(p.out("vocab.tsv"));
  c.docs = load_documents(p.out("docs.jsonl"), c.vocab);
  return c;
}

std::vector<TopicModelArtifact> load_models(const std::vector<fs::path>& paths,
                                            const Vocabulary& vocab) {
  std::vector<TopicModelArtifact> models;
  for (const auto& path : paths) models.push_back(load_model(path, vocab));
  return models;
}

std::vector<const TopicModelArtifact*> pointers(const std::vector<TopicModelArtifact>& models) {
  std::vector<const TopicModelArtifact*> out;
  for (const auto& m : models) out.push_back(&m);
  return out;
}

std::map<std::string, const TopicModelArtifact*, std::less<>> by_name(
    const std::vector<TopicModelArtifact>& models) {
  std::map<std::string, const TopicModelArtifact*, std::less<>> out;
  for (const auto& m : models) out.emplace(m.name, &m);
  return out;
}

// Documents shown to annotators: non-empty, allocated under every model,
// drawn by seed and listed in id order.
std::vector<std::string> intrusion_doc_ids(const std::vector<Document>& docs,
                                           const std::vector<TopicModelArtifact>& models,
                                           std::size_t n, std::uint64_t seed) {
  std::vector<std::string> eligible;
  for (const auto& d : docs) {
    if (d.token_ids.empty()) continue;
    if (std::all_of(models.begin(), models.end(),
                    [&](const TopicModelArtifact& m) { return m.allocation(d.id) != nullptr; }))
      eligible.push_back(d.id);
  }
  std::sort(eligible.begin(), eligible.end());
  std::mt19937_64 rng(derive_seed(seed, "intrusion-docs"));
  std::shuffle(eligible.begin(), eligible.end(), rng);
  if (eligible.size() > n) eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

FeatureOptions feature_options(const RunConfig& c) {
  FeatureOptions o;
  o.query_words = static_cast<std::size_t>(c.n_words);
  o.pair_m_small = static_cast<std::size_t>(c.m_small);
  o.pair_m_large = static_cast<std::size_t>(c.m_large);
  o.mu = c.mu;
  return o;
}

SamplerOptions sampler_options(const RunConfig& c) {
  SamplerOptions o;
  o.low_tau = c.low_tau;
  o.high_rank = c.high_rank;
  return o;
}

std::string model_stem(const fs::path& path) { return path.stem().string(); }

}  // namespace

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)), hash_(config_.hash()) {}

fs::path Pipeline::out(std::string_view name) const { return fs::path(config_.output_dir) / name; }

std::vector<fs::path> Pipeline::model_paths() const {
  std::vector<fs::path> paths;
  for (const auto& m : split_list(config_.models))
    paths.push_back(out("models") / (model_stem(m) + ".model"));
  if (config_.cluster_baseline) paths.push_back(out("models") / "cluster.model");
  return paths;
}

template <typename Fn>
StageOutcome Pipeline::run_stage(const std::string& name, const std::vector<fs::path>& inputs,
                                 Fn&& body) {
  const fs::path stamps = out(".stamps");
  const fs::path done = stamps / (name + ".done");
  const fs::path incomplete = stamps / (name + ".incomplete");
  StageOutcome outcome;
  outcome.stage = name;
  try {
    for (const auto& p : inputs)
      if (!fs::exists(p)) throw Error("missing input: " + p.string());
    const std::string expected = "config\t" + hash_ + "\ninputs\t" + fingerprint(inputs) + "\n";

    if (fs::exists(done) && !fs::exists(incomplete)) {
      const auto stamp = read_file(done);
      if (stamp.compare(0, expected.size(), expected) == 0) {
        std::istringstream rest(stamp.substr(expected.size()));
        std::string line;
        bool present = true;
        std::vector<fs::path> outputs;
        while (std::getline(rest, line)) {
          if (line.rfind("output\t", 0) != 0) continue;
          outputs.push_back(out(line.substr(7)));
          if (!fs::exists(outputs.back())) present = false;
        }
        if (present) {
          outcome.skipped = true;
          outcome.outputs = std::move(outputs);
          return outcome;
        }
      }
    }

    fs::create_directories(stamps);
    fs::remove(done);
    write_file_atomic(incomplete, "stage " + name + " started\n");
    body(outcome);
    std::string stamp = expected;
    for (const auto& p : outcome.outputs)
      stamp += "output\t" + fs::relative(p, config_.output_dir).generic_string() + "\n";
    write_file_atomic(done, stamp);
    fs::remove(incomplete);
    return outcome;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(stamps, ec);
    std::ofstream(incomplete, std::ios::trunc) << "stage " << name << " failed: " << e.what() << "\n";
    throw StageError(name, e.what());
  }
}

StageOutcome Pipeline::ingest() {
  if (config_.corpus.empty()) throw StageError("ingest", "missing input: corpus (no path configured)");
  std::vector<fs::path> inputs{config_.corpus};
  if (!config_.stop_words.empty()) inputs.emplace_back(config_.stop_words);
  return run_stage("ingest", inputs, [&](StageOutcome& o) {
    PreprocessConfig pc;
    pc.stop_words = config_.stop_words.empty() ? default_stop_words()
                                               : load_stop_words(config_.stop_words);
    pc.min_count = config_.min_count;
    pc.top_exclude_fraction = config_.top_exclude;
    const auto result = preprocess(read_corpus(config_.corpus), pc);

    save_documents(out("docs.jsonl"), result.docs, hash_);
    save_vocabulary(out("vocab.tsv"), result.vocab, hash_);
    std::string report = tsv_header("topeval.ingest-report", hash_);
    report += "documents\t" + std::to_string(result.docs.size()) + "\n";
    report += "types\t" + std::to_string(result.vocab.size()) + "\n";
    report += "tokens\t" + std::to_string(result.vocab.total_tokens) + "\n";
    for (const auto& w : result.excluded_top_types) report += "excluded_top\t" + w + "\n";
    for (const auto& id : result.empty_doc_ids) report += "empty_document\t" + id + "\n";
    write_file_atomic(out("ingest_report.txt"), report);
    o.outputs = {out("docs.jsonl"), out("vocab.tsv"), out("ingest_report.txt")};
    if (!result.empty_doc_ids.empty())
      o.notes.push_back(std::to_string(result.empty_doc_ids.size()) +
                        " documents are empty after filtering");
  });
}

StageOutcome Pipeline::index() {
  return run_stage("index", {out("docs.jsonl"), out("vocab.tsv")}, [&](StageOutcome& o) {
    const auto c = load_corpus_outputs(*this);
    save_index(out("index.tsv"), build_index(c.docs, c.vocab.size()), hash_);
    save_cooccurrence(out("cooc_window.tsv"),
                      count_cooccurrence(c.docs, c.vocab.size(), CountMode::window,
                                         config_.window_size),
                      hash_);
    save_cooccurrence(out("cooc_document.tsv"),
                      count_cooccurrence(c.docs, c.vocab.size(), CountMode::document), hash_);
    o.outputs = {out("index.tsv"), out("cooc_window.tsv"), out("cooc_document.tsv")};
  });
}

StageOutcome Pipeline::models() {
  std::vector<fs::path> inputs{out("docs.jsonl"), out("vocab.tsv")};
  const auto sources = split_list(config_.models);
  for (const auto& m : sources) inputs.emplace_back(m);
  if (config_.cluster_baseline) {
    if (config_.embeddings.empty())
      throw StageError("models", "missing input: embeddings (required by cluster_baseline)");
    if (!fs::exists(config_.embeddings))
      throw StageError("models", "missing input: embeddings file " + config_.embeddings +
                                     " (required by cluster_baseline)");
    inputs.emplace_back(config_.embeddings);
  }
  if (sources.empty() && !config_.cluster_baseline)
    throw StageError("models", "no topic models configured");

  return run_stage("models", inputs, [&](StageOutcome& o) {
    const auto c = load_corpus_outputs(*this);
    fs::create_directories(out("models"));
    std::set<std::string> stems, names;
    SaveOptions so;
    so.config_hash = hash_;
    for (const auto& src : sources) {
      auto model = load_model(src, c.vocab);
      const auto stem = model_stem(src);
      if (!stems.insert(stem).second || (config_.cluster_baseline && stem == "cluster"))
        throw Error("model file name '" + stem + "' is used twice");
      if (!names.insert(model.name).second)
        throw Error("model name '" + model.name + "' is used twice");
      const auto dest = out("models") / (stem + ".model");
      save_model(dest, model, c.vocab, so);
      o.outputs.push_back(dest);
    }
    if (config_.cluster_baseline) {
      const auto emb = load_embeddings(config_.embeddings);
      const auto score =
          config_.cluster_score == "distance" ? CosineScore::distance : CosineScore::similarity;
      auto result = build_cluster_model(emb, c.vocab, c.docs,
                                        static_cast<std::size_t>(config_.cluster_k), config_.seed,
                                        score);
      if (!names.insert(result.model.name).second)
        throw Error("model name '" + result.model.name + "' is used twice");
      const auto dest = out("models") / "cluster.model";
      save_model(dest, result.model, c.vocab, so);
      std::string report = tsv_header("topeval.cluster-report", hash_);
      for (const auto& f : result.flags) report += f + "\n";
      write_file_atomic(out("models") / "cluster_report.txt", report);
      o.outputs.push_back(dest);
      o.outputs.push_back(out("models") / "cluster_report.txt");
      o.notes.insert(o.notes.end(), result.flags.begin(), result.flags.end());
    }
  });
}

StageOutcome Pipeline::coherence() {
  std::vector<fs::path> inputs{out("vocab.tsv"), out("cooc_window.tsv")};
  const auto mp = model_paths();
  inputs.insert(inputs.end(), mp.begin(), mp.end());
  return run_stage("coherence", inputs, [&](StageOutcome& o) {
    const auto vocab = load_vocabulary(out("vocab.tsv"));
    const auto stats = load_cooccurrence(out("cooc_window.tsv"));
    std::vector<CoherenceReport> reports;
    for (const auto& m : load_models(mp, vocab)) {
      reports.push_back(model_coherence(m, stats, static_cast<std::size_t>(config_.n_words),
                                        "cooc_window.tsv"));
      for (const auto& f : reports.back().flags) o.notes.push_back(m.name + ": " + f);
    }
    write_coherence_table(out("coherence.tsv"), reports, vocab, hash_);
    write_coherence_records(out("coherence.jsonl"), reports, config_.dataset, hash_);
    o.outputs = {out("coherence.tsv"), out("coherence.jsonl")};
  });
}

StageOutcome Pipeline::gen_intrusion() {
  std::vector<fs::path> inputs{out("docs.jsonl"), out("vocab.tsv")};
  const auto mp = model_paths();
  inputs.insert(inputs.end(), mp.begin(), mp.end());
  return run_stage("gen-intrusion", inputs, [&](StageOutcome& o) {
    const auto c = load_corpus_outputs(*this);
    const auto models = load_models(mp, c.vocab);
    const auto ids = intrusion_doc_ids(c.docs, models,
                                       static_cast<std::size_t>(config_.n_intrusion_docs),
                                       config_.seed);
    GenerationOptions go;
    go.sampler = sampler_options(config_);
    go.seed = config_.seed;
    go.n_control_docs = static_cast<std::size_t>(config_.n_control_docs);
    const auto set = generate_intrusion(pointers(models), c.docs, ids, c.vocab, go);
    save_items(out("items.jsonl"), set.items, hash_);
    save_hits(out("hits.jsonl"), set.hits, hash_);
    save_rating_tasks(out("rating_tasks.jsonl"),
                      make_rating_tasks(ids, c.docs, pointers(models), c.vocab), hash_);
    o.outputs = {out("items.jsonl"), out("hits.jsonl"), out("rating_tasks.jsonl")};
    o.notes = set.flags;
  });
}

StageOutcome Pipeline::score_human() {
  const std::vector<fs::path> produced{out("qc_report.tsv"), out("human_metrics.tsv"),
                                       out("human_docs.tsv"), out("under_annotated.txt")};
  if (config_.annotations.empty()) {
    // Stale human results must not feed the report.
    for (const auto& p : produced) fs::remove(p);
    fs::remove(out(".stamps") / "score-human.done");
    StageOutcome o;
    o.stage = "score-human";
    o.skipped = true;
    o.notes.push_back("no annotations configured");
    return o;
  }
  std::vector<fs::path> inputs{out("vocab.tsv"), out("items.jsonl"), config_.annotations};
  if (!config_.ratings.empty()) inputs.emplace_back(config_.ratings);
  const auto mp = model_paths();
  inputs.insert(inputs.end(), mp.begin(), mp.end());

  return run_stage("score-human", inputs, [&](StageOutcome& o) {
    const auto vocab = load_vocabulary(out("vocab.tsv"));
    const auto models = load_models(mp, vocab);
    const auto items = load_items(out("items.jsonl"));
    const auto qc = quality_filter(load_annotations(config_.annotations), items,
                                   config_.qc_threshold);

    std::string qc_out = tsv_header("topeval.qc-report", hash_);
    qc_out += "worker\tcontrols\tcorrect\taccuracy\tkept\n";
    for (const auto& w : qc.workers)
      qc_out += w.worker_id + "\t" + std::to_string(w.control_total) + "\t" +
                std::to_string(w.control_correct) + "\t" + num(w.accuracy) + "\t" +
                (w.kept ? "yes" : (w.no_controls ? "no (no controls)" : "no")) + "\n";
    write_file_atomic(out("qc_report.tsv"), qc_out);

    auto report = model_precision(qc.kept, items);
    topic_log_odds(qc.kept, items, by_name(models), report);
    if (!config_.ratings.empty()) {
      const auto ratings = load_ratings(config_.ratings);
      for (const auto& [name, mean] : direct_rating_report(ratings))
        if (auto* m = report.find(name)) {
          m->mean_rating = mean;
          m->rating_count = static_cast<std::size_t>(
              std::count_if(ratings.begin(), ratings.end(),
                            [&](const RatingRecord& r) { return r.model_name == name; }));
        }
    }

    std::string metrics = tsv_header("topeval.human-metrics", hash_);
    metrics += "model\thuman_mp\thuman_tlo\tmean_rating\tn_docs\n";
    std::string docs = tsv_header("topeval.human-docs", hash_);
    docs += "model\tdoc\titem\tprecision\tlog_odds\tannotators\n";
    for (const auto& m : report.models) {
      metrics += m.model_name + "\t" + num(m.mean_precision) + "\t" + num(m.mean_log_odds) + "\t" +
                 (m.mean_rating ? num(*m.mean_rating) : "NA") + "\t" +
                 std::to_string(m.precision.size()) + "\n";
      std::map<std::string, double> tlo;
      for (const auto& d : m.log_odds) tlo[d.item_id] = d.value;
      for (const auto& d : m.precision) {
        auto t = tlo.find(d.item_id);
        docs += m.model_name + "\t" + d.doc_id + "\t" + d.item_id + "\t" + num(d.value) + "\t" +
                (t == tlo.end() ? "NA" : num(t->second)) + "\t" + std::to_string(d.annotators) +
                "\n";
      }
    }
    write_file_atomic(out("human_metrics.tsv"), metrics);
    write_file_atomic(out("human_docs.tsv"), docs);

    std::string under = tsv_header("topeval.under-annotated", hash_);
    for (const auto& id : under_annotated(qc.kept, items)) under += id + "\n";
    write_file_atomic(out("under_annotated.txt"), under);

    o.outputs = produced;
    o.notes = report.flags;
    const auto dropped = std::count_if(qc.workers.begin(), qc.workers.end(),
                                       [](const WorkerQc& w) { return !w.kept; });
    o.notes.push_back(std::to_string(dropped) + " of " + std::to_string(qc.workers.size()) +
                      " workers dropped by quality control");
  });
}

StageOutcome Pipeline::autoeval_train() {
  std::vector<fs::path> inputs{out("docs.jsonl"), out("vocab.tsv"), out("index.tsv"),
                               out("cooc_document.tsv"), out("items.jsonl")};
  const auto mp = model_paths();
  inputs.insert(inputs.end(), mp.begin(), mp.end());
  return run_stage("autoeval-train", inputs, [&](StageOutcome& o) {
    const auto c = load_corpus_outputs(*this);
    const auto index = load_index(out("index.tsv"));
    const auto stats = load_cooccurrence(out("cooc_document.tsv"));
    const auto models = load_models(mp, c.vocab);
    const FeatureExtractor fx(index, stats, feature_options(config_));

    std::set<std::string> annotated;
    for (const auto& item : load_items(out("items.jsonl")))
      if (!item.is_control) annotated.insert(item.doc_id);

    TrainingSetOptions to;
    to.n_train_docs = static_cast<std::size_t>(config_.n_train_docs);
    to.n_test_docs = static_cast<std::size_t>(config_.n_test_docs);
    to.n_dev_docs = static_cast<std::size_t>(config_.n_dev_docs);
    to.seed = config_.seed;
    to.sampler = sampler_options(config_);
    to.test_doc_ids.assign(annotated.begin(), annotated.end());
    const auto set = build_training_set(pointers(models), c.docs, fx, to);

    TrainerOptions tr;
    tr.c = config_.c;
    tr.seed = config_.seed;
    tr.epochs = config_.epochs;
    const auto ranker = train_ranker(set.train, tr);
    save_ranker(out("ranker.model"), ranker, hash_);

    std::string report = tsv_header("topeval.training-report", hash_);
    report += "key\tvalue\n";
    report += "train_docs\t" + std::to_string(set.train_doc_ids.size()) + "\n";
    report += "test_docs\t" + std::to_string(set.test_doc_ids.size()) + "\n";
    report += "train_groups\t" + std::to_string(set.train.size()) + "\n";
    report += "test_groups\t" + std::to_string(set.test.size()) + "\n";
    report += "train_accuracy\t" + num(group_accuracy(ranker, set.train)) + "\n";
    report += "test_accuracy\t" +
              (set.test.empty() ? std::string("NA") : num(group_accuracy(ranker, set.test))) + "\n";
    if (!set.dev.empty()) {
      report += "dev_docs\t" + std::to_string(set.dev_doc_ids.size()) + "\n";
      report += "dev_accuracy\t" + num(group_accuracy(ranker, set.dev)) + "\n";
    }
    for (const auto& f : set.flags) report += "flag\t" + f + "\n";
    write_file_atomic(out("training_report.tsv"), report);
    o.outputs = {out("ranker.model"), out("training_report.tsv")};
    o.notes = set.flags;
    if (ranker.degenerate) o.notes.push_back("ranker is degenerate (no training pairs)");
  });
}

StageOutcome Pipeline::autoeval_predict() {
  std::vector<fs::path> inputs{out("docs.jsonl"), out("vocab.tsv"), out("index.tsv"),
                               out("cooc_document.tsv"), out("items.jsonl"), out("ranker.model")};
  const auto mp = model_paths();
  inputs.insert(inputs.end(), mp.begin(), mp.end());
  return run_stage("autoeval-predict", inputs, [&](StageOutcome& o) {
    const auto vocab = load_vocabulary(out("vocab.tsv"));
    const auto index = load_index(out("index.tsv"));
    const auto stats = load_cooccurrence(out("cooc_document.tsv"));
    const auto models = load_models(mp, vocab);
    const auto ranker = load_ranker(out("ranker.model"));
    const FeatureExtractor fx(index, stats, feature_options(config_));
    Flags flags;
    const auto groups = groups_from_items(load_items(out("items.jsonl")), by_name(models), fx, &flags);

    std::string summary = tsv_header("topeval.system-mp", hash_);
    summary += "model\tsystem_mp\tn_docs\n";
    std::string docs = tsv_header("topeval.system-docs", hash_);
    docs += "model\tdoc\titem\tcorrect\n";
    for (const auto& s : system_model_precision(ranker, groups)) {
      summary += s.model_name + "\t" + num(s.mean) + "\t" + std::to_string(s.per_doc.size()) + "\n";
      for (const auto& d : s.per_doc)
        docs += s.model_name + "\t" + d.doc_id + "\t" + d.item_id + "\t" +
                std::to_string(static_cast<int>(d.value)) + "\n";
    }
    write_file_atomic(out("system_mp.tsv"), summary);
    write_file_atomic(out("system_docs.tsv"), docs);
    o.outputs = {out("system_mp.tsv"), out("system_docs.tsv")};
    o.notes = flags;
  });
}

StageOutcome Pipeline::report() {
  std::vector<fs::path> inputs{out("system_mp.tsv"), out("system_docs.tsv"), out("coherence.tsv")};
  const bool human = fs::exists(out("human_metrics.tsv")) && fs::exists(out("human_docs.tsv"));
  if (human) {
    inputs.push_back(out("human_metrics.tsv"));
    inputs.push_back(out("human_docs.tsv"));
  }
  return run_stage("report", inputs, [&](StageOutcome& o) {
    struct Row {
      std::string coherence = "NA", human_mp = "NA", human_tlo = "NA", rating = "NA",
                  system_mp = "NA";
    };
    std::map<std::string, Row> rows;
    for (const auto& r : read_tsv(out("coherence.tsv")))
      if (r.size() >= 3 && r[1] == "mean") rows[r[0]].coherence = r[2];
    for (const auto& r : read_tsv(out("system_mp.tsv")))
      if (r.size() >= 2) rows[r[0]].system_mp = r[1];
    if (human)
      for (const auto& r : read_tsv(out("human_metrics.tsv")))
        if (r.size() >= 4) {
          auto& row = rows[r[0]];
          row.human_mp = r[1];
          row.human_tlo = r[2];
          row.rating = r[3];
        }

    std::vector<double> hx, sy;
    std::string table = tsv_header("topeval.report", hash_);
    table += "model\tnpmi\thuman_mp\thuman_tlo\tmean_rating\tsystem_mp\n";
    std::string plot = tsv_header("topeval.plot-data", hash_);
    plot += "model\thuman_mp\tsystem_mp\n";
    for (const auto& [name, r] : rows) {
      table += name + "\t" + r.coherence + "\t" + r.human_mp + "\t" + r.human_tlo + "\t" + r.rating +
               "\t" + r.system_mp + "\n";
      if (r.human_mp != "NA" && r.system_mp != "NA") {
        hx.push_back(to_double(r.human_mp, out("human_metrics.tsv")));
        sy.push_back(to_double(r.system_mp, out("system_mp.tsv")));
        plot += name + "\t" + r.human_mp + "\t" + r.system_mp + "\n";
      }
    }
    const auto r = correlate(hx, sy);
    table += "#pearson_r\t" + (r ? num(*r) : std::string("undefined")) + "\tn_models\t" +
             std::to_string(hx.size()) + "\n";
    if (!r) o.notes.push_back("Pearson r undefined (fewer than 3 models or zero variance)");

    // Items where the system's pick and the annotators' majority differ.
    std::string dis = tsv_header("topeval.disagreements", hash_);
    dis += "model\tdoc\titem\thuman_precision\tsystem_correct\n";
    if (human) {
      std::map<std::string, std::pair<std::string, double>> sys;  // item -> (model, correct)
      for (const auto& row : read_tsv(out("system_docs.tsv")))
        if (row.size() >= 4) sys[row[2]] = {row[0], to_double(row[3], out("system_docs.tsv"))};
      struct Dis {
        double gap;
        std::string line;
      };
      std::vector<Dis> list;
      for (const auto& row : read_tsv(out("human_docs.tsv"))) {
        if (row.size() < 4) continue;
        auto s = sys.find(row[2]);
        if (s == sys.end()) continue;
        const double h = to_double(row[3], out("human_docs.tsv"));
        const double gap = std::abs(h - s->second.second);
        if (gap < 0.5) continue;
        list.push_back({gap, row[0] + "\t" + row[1] + "\t" + row[2] + "\t" + row[3] + "\t" +
                                 std::to_string(static_cast<int>(s->second.second)) + "\n"});
      }
      std::stable_sort(list.begin(), list.end(),
                       [](const Dis& a, const Dis& b) { return a.gap > b.gap; });
      for (const auto& d : list) dis += d.line;
    }
    write_file_atomic(out("report.tsv"), table);
    write_file_atomic(out("plot_data.tsv"), plot);
    write_file_atomic(out("disagreements.tsv"), dis);
    o.outputs = {out("report.tsv"), out("plot_data.tsv"), out("disagreements.tsv")};
  });
}

std::vector<StageOutcome> Pipeline::run_all() {
  std::vector<StageOutcome> outcomes;
  outcomes.push_back(ingest());
  outcomes.push_back(index());
  outcomes.push_back(models());
  outcomes.push_back(coherence());
  outcomes.push_back(gen_intrusion());
  outcomes.push_back(score_human());
  outcomes.push_back(autoeval_train());
  outcomes.push_back(autoeval_predict());
  outcomes.push_back(report());
  return outcomes;
}

}  // namespace topeval
