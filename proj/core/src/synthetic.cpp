#include "topeval/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "topeval/hash.hpp"
#include "topeval/records.hpp"

namespace topeval::synth {
namespace {

std::string pseudo_word(std::size_t i) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  const std::size_t n_syll = consonants.size() * vowels.size();
  std::string w;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syl = i % n_syll;
    i /= n_syll;
    w += consonants[syl / vowels.size()];
    w += vowels[syl % vowels.size()];
  }
  return w;
}

std::vector<double> dirichlet(std::size_t k, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto& x : v) sum += (x = g(rng));
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(k));
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

std::vector<double> smoothed(const std::vector<double>& theta, double mass = 0.03) {
  std::vector<double> out(theta.size());
  const double floor = mass / static_cast<double>(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = (1.0 - mass) * theta[i] + floor;
  return out;
}

TopicModelArtifact with_truth_topics(const World& world, std::string name) {
  TopicModelArtifact m;
  m.name = std::move(name);
  const auto& spec = world.spec;
  const double hw = spec.head_weight;
  const double group_norm = hw + (spec.synonyms - 1);
  for (int t = 0; t < spec.topics; ++t) {
    TopicWordDist d;
    d.topic_id = t;
    d.probs.assign(world.vocab.size(), 0.0);
    double sum = 0.0;
    for (std::size_t g = 0; g < world.group_words.size(); ++g) {
      if (world.group_topic[g] != t) continue;
      const auto& words = world.group_words[g];
      for (std::size_t s = 0; s < words.size(); ++s) {
        const double p = (s == 0 ? hw : 1.0) / group_norm / spec.groups;
        d.probs[static_cast<std::size_t>(words[s])] += p;
        sum += p;
      }
    }
    for (double& p : d.probs) p /= sum;
    m.topics.push_back(std::move(d));
  }
  return m;
}

}  // namespace

World make_world(const WorldSpec& spec) {
  if (spec.topics < 4 || spec.groups < 1 || spec.synonyms < 1 || spec.n_docs < 1 ||
      spec.topics_per_doc < 1 || spec.topics_per_doc > spec.topics)
    throw Error("synthetic world: invalid spec");
  World world;
  world.spec = spec;
  std::mt19937_64 rng(spec.seed);
  const std::size_t n_groups = static_cast<std::size_t>(spec.topics * spec.groups);

  std::vector<std::vector<std::string>> group_names(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g)
    for (int s = 0; s < spec.synonyms; ++s)
      group_names[g].push_back(pseudo_word(g * static_cast<std::size_t>(spec.synonyms) + static_cast<std::size_t>(s)));

  std::vector<double> weights(static_cast<std::size_t>(spec.synonyms), 1.0);
  weights[0] = spec.head_weight;
  std::discrete_distribution<int> pick_syn(weights.begin(), weights.end());
  std::uniform_int_distribution<int> pick_group(0, spec.groups - 1);

  for (int d = 0; d < spec.n_docs; ++d) {
    std::vector<int> topics(static_cast<std::size_t>(spec.topics));
    std::iota(topics.begin(), topics.end(), 0);
    std::shuffle(topics.begin(), topics.end(), rng);
    const auto mix = dirichlet(static_cast<std::size_t>(spec.topics_per_doc), 1.0, rng);
    std::vector<double> theta(static_cast<std::size_t>(spec.topics), 0.0);
    for (int i = 0; i < spec.topics_per_doc; ++i)
      theta[static_cast<std::size_t>(topics[static_cast<std::size_t>(i)])] = mix[static_cast<std::size_t>(i)];
    std::discrete_distribution<int> pick_topic(theta.begin(), theta.end());

    Document doc;
    doc.id = "d" + std::to_string(d);
    for (int b = 0; b < spec.doc_bursts; ++b) {
      const int z = pick_topic(rng);
      const auto g = static_cast<std::size_t>(z * spec.groups + pick_group(rng));
      for (int i = 0; i < spec.burst_len; ++i)
        doc.tokens.push_back(group_names[g][static_cast<std::size_t>(pick_syn(rng))]);
    }
    // Ten-word sentences, capitalized so the sentence splitter finds them.
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      std::string w = doc.tokens[i];
      if (i % 10 == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      doc.raw_text += w;
      doc.raw_text += (i % 10 == 9 || i + 1 == doc.tokens.size()) ? "." : "";
      if (i + 1 < doc.tokens.size()) doc.raw_text += ' ';
    }
    doc.snippet = make_snippet(doc.raw_text);
    world.theta.push_back(std::move(theta));
    world.docs.push_back(std::move(doc));
  }
  world.vocab = make_vocabulary(world.docs);

  world.group_words.resize(n_groups);
  world.group_topic.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    world.group_topic[g] = static_cast<int>(g) / spec.groups;
    for (const auto& w : group_names[g])
      if (auto id = world.vocab.find(w)) world.group_words[g].push_back(*id);
  }

  // Embeddings: a shared direction scaled per group dominates, so every
  // word is close to every other in cosine terms, while the group direction
  // keeps the synonym groups separable for k-means.
  const auto dim = static_cast<std::size_t>(spec.emb_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto unit = [&] {
    std::vector<double> v(dim);
    double n = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n += x * x;
    }
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
  };
  const auto common = unit();
  std::uniform_real_distribution<double> spread(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.emb_noise);
  world.emb = EmbeddingTable(dim);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto dir = unit();
    const double beta = 1.0 + spec.beta_spread * spread(rng);
    for (const auto& w : group_names[g]) {
      std::vector<double> v(dim);
      for (std::size_t i = 0; i < dim; ++i)
        v[i] = spec.generic_scale * beta * common[i] + dir[i] + noise(rng);
      world.emb.add(w, std::move(v));
    }
  }
  return world;
}

TopicModelArtifact truth_model(const World& world, std::string name) {
  auto m = with_truth_topics(world, std::move(name));
  for (std::size_t d = 0; d < world.docs.size(); ++d)
    m.allocations[world.docs[d].id] = {world.docs[d].id, smoothed(world.theta[d])};
  return m;
}

TopicModelArtifact noisy_model(const World& world, double noise, std::uint64_t seed,
                               std::string name) {
  auto m = with_truth_topics(world, std::move(name));
  std::mt19937_64 rng(seed);
  for (std::size_t d = 0; d < world.docs.size(); ++d) {
    auto theta = smoothed(world.theta[d]);
    const auto r = dirichlet(theta.size(), 1.0, rng);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = (1.0 - noise) * theta[i] + noise * r[i];
    m.allocations[world.docs[d].id] = {world.docs[d].id, std::move(theta)};
  }
  return m;
}

TopicModelArtifact shuffled_model(const World& world, std::uint64_t seed, std::string name) {
  auto m = with_truth_topics(world, std::move(name));
  std::vector<std::size_t> perm(world.docs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t d = 0; d < world.docs.size(); ++d)
    m.allocations[world.docs[d].id] = {world.docs[d].id, smoothed(world.theta[perm[d]])};
  return m;
}

TopicModelArtifact random_model(const World& world, std::uint64_t seed, std::string name) {
  TopicModelArtifact m;
  m.name = std::move(name);
  std::mt19937_64 rng(seed);
  for (int t = 0; t < world.spec.topics; ++t) {
    TopicWordDist d;
    d.topic_id = t;
    d.probs = dirichlet(world.vocab.size(), 0.1, rng);
    m.topics.push_back(std::move(d));
  }
  for (const auto& doc : world.docs)
    m.allocations[doc.id] = {doc.id, smoothed(dirichlet(static_cast<std::size_t>(world.spec.topics), 0.3, rng))};
  return m;
}

ClusterModelResult cluster_model(const World& world, std::uint64_t seed, std::string name) {
  auto r = build_cluster_model(world.emb, world.vocab, world.docs, world.group_words.size(), seed);
  r.model.name = std::move(name);
  return r;
}

std::vector<TopicModelArtifact> model_suite(const World& world, std::uint64_t seed) {
  std::vector<TopicModelArtifact> out;
  out.push_back(truth_model(world));
  out.push_back(noisy_model(world, 0.5, derive_seed(seed, "noisy"), "noisy"));
  out.push_back(shuffled_model(world, derive_seed(seed, "shuffled"), "shuffled"));
  out.push_back(random_model(world, derive_seed(seed, "random"), "random"));
  out.push_back(cluster_model(world, derive_seed(seed, "cluster")).model);
  return out;
}

std::vector<RawDocument> raw_corpus(const World& world) {
  std::vector<RawDocument> out;
  for (const auto& d : world.docs) out.push_back({d.id, d.raw_text, {}, false});
  return out;
}

std::vector<AnnotationRecord> simulate_annotations(const std::vector<IntrusionItem>& items,
                                                   const std::vector<Document>& docs,
                                                   int annotators_per_item,
                                                   double noise, std::uint64_t seed) {
  std::unordered_map<std::string_view, std::unordered_set<std::string_view>> doc_words;
  for (const auto& d : docs) {
    auto& s = doc_words[d.id];
    for (const auto& t : d.tokens) s.insert(t);
  }
  std::vector<AnnotationRecord> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& item : items) {
    auto found = doc_words.find(item.doc_id);
    if (found == doc_words.end()) throw Error("simulate_annotations: unknown document " + item.doc_id);
    const auto& words = found->second;
    std::array<double, 4> overlap{};
    for (std::size_t p = 0; p < 4; ++p) {
      int hits = 0;
      for (const auto& w : item.topic_words[p]) hits += words.contains(w) ? 1 : 0;
      overlap[p] = item.topic_words[p].empty()
                       ? 0.0
                       : static_cast<double>(hits) / static_cast<double>(item.topic_words[p].size());
    }
    std::mt19937_64 rng(derive_seed(seed, item.item_id));
    for (int a = 0; a < annotators_per_item; ++a) {
      int best = 0;
      double best_v = 0.0;
      for (int p = 0; p < 4; ++p) {
        const double v = overlap[static_cast<std::size_t>(p)] + noise * u(rng);
        if (p == 0 || v < best_v) {
          best = p;
          best_v = v;
        }
      }
      out.push_back({"sim" + std::to_string(a), item.item_id, best, 0});
    }
  }
  return out;
}

std::filesystem::path write_toy_world(const std::filesystem::path& dir, int n_docs,
                                      std::uint64_t seed) {
  namespace fs = std::filesystem;
  WorldSpec spec;
  spec.n_docs = n_docs;
  spec.seed = seed;
  const auto world = make_world(spec);
  fs::create_directories(dir / "models");

  std::string corpus;
  for (const auto& d : raw_corpus(world))
    corpus += nlohmann::json{{"id", d.id}, {"text", d.text}}.dump() + "\n";
  write_file_atomic(dir / "corpus.jsonl", corpus);
  write_file_atomic(dir / "stopwords.txt", "");

  std::string models;
  for (const auto& m : model_suite(world, seed)) {
    if (m.name == "cluster") continue;  // the pipeline builds it from the embeddings
    save_model(dir / "models" / (m.name + ".model"), m, world.vocab);
    models += (models.empty() ? "" : ",") + ("models/" + m.name + ".model");
  }
  save_embeddings(dir / "embeddings.txt", world.emb, world.vocab.types);

  std::string conf = "# toy world: " + std::to_string(n_docs) + " documents\n";
  conf += "corpus = corpus.jsonl\n";
  conf += "embeddings = embeddings.txt\n";
  conf += "stop_words = stopwords.txt\n";
  conf += "models = " + models + "\n";
  conf += "cluster_baseline = true\n";
  conf += "cluster_k = " + std::to_string(spec.topics * spec.groups) + "\n";
  conf += "min_count = 1\ntop_exclude = 0\n";
  conf += "seed = " + std::to_string(seed) + "\n";
  conf += "n_intrusion_docs = " + std::to_string(std::min(100, n_docs / 4)) + "\n";
  conf += "n_control_docs = 20\n";
  conf += "n_train_docs = " + std::to_string(n_docs / 2) + "\n";
  conf += "n_test_docs = " + std::to_string(std::min(100, n_docs / 4)) + "\n";
  write_file_atomic(dir / "toy.conf", conf);
  return dir / "toy.conf";
}

}  // namespace topeval::synth
