// topeval: command-line driver for the evaluation pipeline.
#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <thread>

#include <CLI11.hpp>

#include "topeval/annsvc.hpp"
#include "topeval/config.hpp"
#include "topeval/corpus.hpp"
#include "topeval/hash.hpp"
#include "topeval/pipeline.hpp"
#include "topeval/records.hpp"
#include "topeval/synthetic.hpp"

namespace fs = std::filesystem;
using namespace topeval;

namespace {

void print(const StageOutcome& o) {
  std::cout << o.stage << ": " << (o.skipped ? "up to date" : "done");
  if (!o.outputs.empty()) std::cout << " (" << o.outputs.size() << " outputs)";
  std::cout << "\n";
  for (const auto& n : o.notes) std::cout << "  " << n << "\n";
}

void print(const std::vector<StageOutcome>& all) {
  for (const auto& o : all) print(o);
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topeval: topic model evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  std::map<std::string, std::optional<std::string>> flags;
  auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    flags[key];
    app.add_option(name, flags[key], help);
  };
  flag("--corpus", "corpus", "corpus file (JSONL or one document per line)");
  flag("--models", "models", "comma-separated model files");
  flag("--embeddings", "embeddings", "word embedding file");
  flag("--stop-words", "stop_words", "stop word list (default: bundled)");
  flag("--annotations", "annotations", "annotation records");
  flag("--ratings", "ratings", "direct rating records");
  flag("--out,-o", "output_dir", "output directory");
  flag("--seed", "seed", "run seed");
  flag("--low-tau", "low_tau", "intruder max proportion in the document");
  flag("--high-rank", "high_rank", "intruder min rank in some other document");
  flag("--qc-threshold", "qc_threshold", "control accuracy a worker must exceed");
  flag("--c", "c", "ranker regularization strength");
  flag("--mu", "mu", "Dirichlet smoothing parameter");
  flag("--n-train-docs", "n_train_docs", "training documents");
  flag("--n-test-docs", "n_test_docs", "test documents");
  flag("--window-size", "window_size", "co-occurrence window");
  flag("--max-annotators", "max_annotators", "annotators per intrusion item (serve)");
  flag("--lease-seconds", "lease_seconds", "hit lease timeout (serve)");
  flag("--cluster-baseline", "cluster_baseline", "build the embedding-cluster baseline (true/false)");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "extra key=value overrides");

  auto* ingest = app.add_subcommand("ingest", "tokenize, filter and store the corpus");
  auto* index = app.add_subcommand("index", "inverted index and co-occurrence counts");
  auto* models = app.add_subcommand("models", "validate models; build the cluster baseline");
  auto* coherence = app.add_subcommand("coherence", "NPMI per topic and model");
  auto* gen = app.add_subcommand("gen-intrusion", "intrusion items and hits");
  gen->alias("generate-intrusion");
  auto* score = app.add_subcommand("score-human", "quality control and human metrics");
  auto* autoeval = app.add_subcommand("autoeval", "automatic evaluation");
  autoeval->require_subcommand(1);
  auto* train = autoeval->add_subcommand("train", "train the intruder ranker");
  auto* predict = autoeval->add_subcommand("predict", "system model precision");
  auto* aereport = autoeval->add_subcommand("report", "human vs system precision");
  auto* report = app.add_subcommand("report", "final tables");
  auto* run = app.add_subcommand("run", "all stages in order");

  auto* serve = app.add_subcommand("serve", "annotation HTTP service");
  std::string host = "127.0.0.1", ui_dir, log_path;
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--ui-dir", ui_dir, "static files for the annotation UI");
  serve->add_option("--log", log_path, "append-only record log (default <out>/annotation_log.jsonl)");

  auto* synth_cmd = app.add_subcommand("synth", "write a toy world (corpus, models, embeddings)");
  std::string synth_dir = "toy";
  int synth_docs = 400;
  synth_cmd->add_option("dir", synth_dir);
  synth_cmd->add_option("--docs", synth_docs);

  auto* simulate = app.add_subcommand("simulate", "simulated annotators for the generated items");
  std::string sim_out;
  int sim_annotators = 8, sim_random = 2;
  double sim_noise = 0.05;
  simulate->add_option("--write", sim_out, "annotation file to write")->required();
  simulate->add_option("--annotators", sim_annotators);
  simulate->add_option("--random-workers", sim_random, "workers answering uniformly at random");
  simulate->add_option("--noise", sim_noise);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty())
      cfg = resolve_paths(load_config(config_path), fs::path(config_path).parent_path());
    apply_env_overrides(cfg);
    for (const auto& [key, value] : flags)
      if (value) cfg.set(key, *value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }

    if (*synth_cmd) {
      synth::write_toy_world(synth_dir, synth_docs, cfg.seed);
      std::cout << "wrote " << synth_dir << "/toy.conf\n";
      return 0;
    }

    Pipeline p(cfg);
    if (*ingest) print(p.ingest());
    if (*index) print(p.index());
    if (*models) print(p.models());
    if (*coherence) print(p.coherence());
    if (*gen) print(p.gen_intrusion());
    if (*score) print(p.score_human());
    if (*train) print(p.autoeval_train());
    if (*predict) print(p.autoeval_predict());
    if (*aereport || *report) print(p.report());
    if (*run) print(p.run_all());

    if (*simulate) {
      const auto vocab = load_vocabulary(p.out("vocab.tsv"));
      const auto docs = load_documents(p.out("docs.jsonl"), vocab);
      const auto items = load_items(p.out("items.jsonl"));
      auto records = synth::simulate_annotations(items, docs, sim_annotators, sim_noise, cfg.seed);
      for (int w = 0; w < sim_random; ++w) {
        const auto worker = "rand" + std::to_string(w);
        std::mt19937_64 rng(derive_seed(cfg.seed, worker));
        std::uniform_int_distribution<int> pick(0, 3);
        for (const auto& item : items) records.push_back({worker, item.item_id, pick(rng), 0});
      }
      save_annotations(sim_out, records, cfg.hash());
      std::cout << "wrote " << records.size() << " annotations to " << sim_out << "\n";
    }

    if (*serve) {
      ServiceOptions so;
      so.max_annotators = cfg.max_annotators;
    so.lease = std::chrono::seconds(cfg.lease_seconds);
      so.qc_threshold = cfg.qc_threshold;
      so.config_hash = cfg.hash();
      AnnotationService service(load_items(p.out("items.jsonl")), load_hits(p.out("hits.jsonl")),
                                load_rating_tasks(p.out("rating_tasks.jsonl")),
                                log_path.empty() ? p.out("annotation_log.jsonl") : fs::path(log_path),
                                so);
      AnnotationServer server(service, ui_dir);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = server.start(host, port);
      std::cout << "serving on http://" << host << ":" << bound << "\n" << std::flush;
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      server.stop();
      service.export_to(cfg.output_dir);
      std::cout << "exported annotations.jsonl and ratings.jsonl to " << cfg.output_dir << "\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
