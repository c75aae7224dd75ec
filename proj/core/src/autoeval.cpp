#include "topeval/autoeval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "topeval/hash.hpp"
#include "topeval/parallel.hpp"
#include "topeval/records.hpp"

namespace topeval {

QueryLikelihood query_likelihood(std::size_t doc, const std::vector<TypeId>& words,
                                 const InvertedIndex& index, double mu) {
  if (mu < 0.0) throw Error("query_likelihood: mu must be nonnegative");
  QueryLikelihood out;
  const auto total = static_cast<double>(index.total_tokens());
  const auto len = static_cast<double>(index.doc_len(doc));
  std::size_t used = 0;
  for (TypeId w : words) {
    const auto cf = (w >= 0 && static_cast<std::size_t>(w) < index.num_types()) ? index.coll_freq(w) : 0;
    if (cf == 0) {
      ++out.dropped;
      continue;
    }
    const double p_c = static_cast<double>(cf) / total;
    out.value += std::log((static_cast<double>(index.tf(w, doc)) + mu * p_c) / (len + mu));
    ++used;
  }
  out.empty_query = used == 0;
  if (out.empty_query) out.value = 0.0;
  return out;
}

PairwiseLogprob pairwise_logprob(const std::vector<TypeId>& words, std::size_t m,
                                 const CooccurrenceStats& stats, double min_count) {
  if (stats.mode() != CountMode::document)
    throw Error("pairwise_logprob: needs document-mode statistics");
  if (stats.unit_count() == 0) throw Error("pairwise_logprob: statistics cover no documents");
  if (!(min_count > 0.0)) throw Error("pairwise_logprob: min_count must be positive");
  PairwiseLogprob out;
  out.words_used = std::min(m, words.size());
  out.short_topic = out.words_used < m;
  const auto n = static_cast<double>(stats.unit_count());
  for (std::size_t i = 0; i < out.words_used; ++i)
    for (std::size_t j = i + 1; j < out.words_used; ++j) {
      const auto c = static_cast<double>(stats.pair_count(words[i], words[j]));
      out.value += std::log(std::max(c, min_count) / n);
    }
  return out;
}

FeatureExtractor::FeatureExtractor(const InvertedIndex& index, const CooccurrenceStats& doc_stats,
                                   FeatureOptions options)
    : index_(&index), stats_(&doc_stats), options_(options) {
  if (doc_stats.mode() != CountMode::document)
    throw Error("FeatureExtractor: co-occurrence stats must be in document mode");
}

FeatureVector FeatureExtractor::features(std::size_t doc,
                                         const std::vector<TypeId>& topic_words) const {
  std::vector<TypeId> query(topic_words.begin(),
                            topic_words.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                      options_.query_words, topic_words.size())));
  return {query_likelihood(doc, query, *index_, options_.mu).value,
          pairwise_logprob(topic_words, options_.pair_m_small, *stats_, options_.min_pair_count).value,
          pairwise_logprob(topic_words, options_.pair_m_large, *stats_, options_.min_pair_count).value};
}

FeatureVector FeatureExtractor::features(std::size_t doc, const TopicWordDist& topic) const {
  return features(doc, topic.top_words(std::max(options_.query_words, options_.pair_m_large)));
}

namespace {

RankGroup make_group(const std::string& doc_id, std::size_t doc_pos, const TopicModelArtifact& model,
                     const std::array<TopicId, 4>& topics, TopicId intruder,
                     const FeatureExtractor& fx) {
  RankGroup g;
  g.doc_id = doc_id;
  g.model_name = model.name;
  auto sorted = topics;
  std::sort(sorted.begin(), sorted.end());
  for (TopicId t : sorted) {
    RankInstance inst;
    inst.topic_id = t;
    inst.label = t == intruder ? 1 : 0;
    inst.features = fx.features(doc_pos, model.topics.at(static_cast<std::size_t>(t)));
    g.instances.push_back(inst);
  }
  return g;
}

}  // namespace

TrainingSet build_training_set(const std::vector<const TopicModelArtifact*>& models,
                               const std::vector<Document>& docs, const FeatureExtractor& fx,
                               const TrainingSetOptions& options) {
  if (models.empty()) throw Error("build_training_set: no models");
  TrainingSet set;
  std::vector<IntruderSampler> samplers;
  for (const auto* m : models) samplers.emplace_back(*m, options.sampler);

  struct Pick {
    std::size_t doc;
    std::vector<TopicId> intruders;
  };
  auto try_doc = [&](std::size_t d) -> std::optional<Pick> {
    const auto& id = docs[d].id;
    if (!fx.index().find_doc(id)) {
      set.flags.push_back(id + ": not in index; excluded");
      return std::nullopt;
    }
    Pick p{d, {}};
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (!models[m]->allocation(id)) {
        set.flags.push_back(id + ": no allocation under '" + models[m]->name + "'; excluded");
        return std::nullopt;
      }
      auto s = samplers[m].sample(id, derive_seed(options.seed, id, models[m]->name));
      if (!s) {
        set.flags.push_back(id + ": no valid intruder under '" + models[m]->name + "'; excluded");
        return std::nullopt;
      }
      p.intruders.push_back(s->topic);
    }
    return p;
  };

  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Pick> train, test;
  std::unordered_set<std::string> test_ids;
  if (!options.test_doc_ids.empty()) {
    std::unordered_map<std::string_view, std::size_t> pos;
    for (std::size_t d = 0; d < docs.size(); ++d) pos.emplace(docs[d].id, d);
    for (const auto& id : options.test_doc_ids) {
      test_ids.insert(id);
      auto it = pos.find(id);
      if (it == pos.end()) {
        set.flags.push_back(id + ": requested test document not in corpus");
        continue;
      }
      if (auto p = try_doc(it->second)) test.push_back(std::move(*p));
    }
  }
  std::vector<Pick> dev;
  auto full = [&] {
    return train.size() >= options.n_train_docs && dev.size() >= options.n_dev_docs &&
           (!options.test_doc_ids.empty() || test.size() >= options.n_test_docs);
  };
  for (std::size_t d : order) {
    if (full()) break;
    if (test_ids.contains(docs[d].id)) continue;
    auto p = try_doc(d);
    if (!p) continue;
    if (train.size() < options.n_train_docs)
      train.push_back(std::move(*p));
    else if (dev.size() < options.n_dev_docs)
      dev.push_back(std::move(*p));
    else if (options.test_doc_ids.empty())
      test.push_back(std::move(*p));
  }
  if (train.size() < options.n_train_docs)
    set.flags.push_back("only " + std::to_string(train.size()) + " usable training documents");
  if (dev.size() < options.n_dev_docs)
    set.flags.push_back("only " + std::to_string(dev.size()) + " usable development documents");
  if (options.test_doc_ids.empty() && test.size() < options.n_test_docs)
    set.flags.push_back("only " + std::to_string(test.size()) + " usable test documents");

  auto expand = [&](const std::vector<Pick>& picks, std::vector<RankGroup>& out,
                    std::vector<std::string>& ids) {
    out.resize(picks.size() * models.size());
    parallel_for(picks.size(), [&](std::size_t i) {
      const auto& doc = docs[picks[i].doc];
      const auto doc_pos = *fx.index().find_doc(doc.id);
      for (std::size_t m = 0; m < models.size(); ++m) {
        const auto ranked = models[m]->allocation(doc.id)->ranked();
        const std::array<TopicId, 4> shown{ranked[0], ranked[1], ranked[2], picks[i].intruders[m]};
        out[i * models.size() + m] =
            make_group(doc.id, doc_pos, *models[m], shown, picks[i].intruders[m], fx);
      }
    });
    for (const auto& p : picks) ids.push_back(docs[p.doc].id);
  };
  expand(train, set.train, set.train_doc_ids);
  expand(dev, set.dev, set.dev_doc_ids);
  expand(test, set.test, set.test_doc_ids);
  return set;
}

std::vector<RankGroup> groups_from_items(
    const std::vector<IntrusionItem>& items,
    const std::map<std::string, const TopicModelArtifact*, std::less<>>& models,
    const FeatureExtractor& fx, Flags* flags) {
  std::vector<const IntrusionItem*> todo;
  for (const auto& item : items) {
    if (item.is_control) continue;
    if (!models.contains(item.model_name)) {
      if (flags) flags->push_back(item.item_id + ": model '" + item.model_name + "' not loaded");
      continue;
    }
    if (!fx.index().find_doc(item.doc_id)) {
      if (flags) flags->push_back(item.item_id + ": document not in index");
      continue;
    }
    todo.push_back(&item);
  }
  std::vector<RankGroup> out(todo.size());
  parallel_for(todo.size(), [&](std::size_t i) {
    const auto& item = *todo[i];
    const auto& model = *models.find(item.model_name)->second;
    out[i] = make_group(item.doc_id, *fx.index().find_doc(item.doc_id), model, item.shown_topics,
                        item.intruder(), fx);
    out[i].item_id = item.item_id;
  });
  return out;
}

double LinearRankModel::score(const FeatureVector& raw) const {
  double s = bias;
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    s += weights[i] * (raw[i] - scaling.mean[i]) / scaling.stddev[i];
  return s;
}

FeatureScaling fit_scaling(const std::vector<RankGroup>& groups) {
  FeatureScaling sc;
  sc.mean.fill(0.0);
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& inst : g.instances) {
      ++n;
      for (std::size_t i = 0; i < kNumFeatures; ++i) sc.mean[i] += inst.features[i];
    }
  if (n == 0) {
    sc.stddev.fill(1.0);
    return sc;
  }
  for (double& m : sc.mean) m /= static_cast<double>(n);
  FeatureVector var{};
  for (const auto& g : groups)
    for (const auto& inst : g.instances)
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double d = inst.features[i] - sc.mean[i];
        var[i] += d * d;
      }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(n));
    sc.stddev[i] = (sd > 0.0 && std::isfinite(sd)) ? sd : 0.0;
  }
  return sc;
}

LinearRankModel train_ranker(const std::vector<RankGroup>& train, const TrainerOptions& options) {
  if (options.c < 0.0) throw Error("train_ranker: C must be nonnegative");
  LinearRankModel model;
  model.trainer = options;
  model.train_groups = train.size();
  model.scaling = fit_scaling(train);
  bool any_signal = false;
  for (double& sd : model.scaling.stddev) {
    if (sd > 0.0)
      any_signal = true;
    else
      sd = 1.0;  // constant feature: contributes nothing after centering
  }

  std::vector<FeatureVector> diffs;
  for (const auto& g : train) {
    for (const auto& pos : g.instances) {
      if (pos.label != 1) continue;
      for (const auto& neg : g.instances) {
        if (neg.label != 0) continue;
        FeatureVector d;
        for (std::size_t i = 0; i < kNumFeatures; ++i)
          d[i] = (pos.features[i] - neg.features[i]) / model.scaling.stddev[i];
        diffs.push_back(d);
      }
    }
  }
  model.train_pairs = diffs.size();
  if (!any_signal || diffs.empty()) {
    model.degenerate = true;
    return model;
  }

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  FeatureVector w{}, avg{};
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto& d = diffs[idx];
      ++step;
      const double eta = options.learning_rate / std::sqrt(static_cast<double>(step));
      double margin = 0.0;
      for (std::size_t i = 0; i < kNumFeatures; ++i) margin += w[i] * d[i];
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        double grad = options.c * w[i];
        if (margin < 1.0) grad -= d[i];
        w[i] -= eta * grad;
      }
      const double mix = 1.0 / static_cast<double>(step);
      for (std::size_t i = 0; i < kNumFeatures; ++i) avg[i] += (w[i] - avg[i]) * mix;
    }
  }
  model.weights = avg;
  return model;
}

TopicId predict_intruder(const LinearRankModel& model, const RankGroup& group) {
  if (group.instances.empty()) throw Error("predict_intruder: empty group");
  TopicId best = group.instances.front().topic_id;
  double best_score = model.score(group.instances.front().features);
  for (std::size_t i = 1; i < group.instances.size(); ++i) {
    const auto& inst = group.instances[i];
    const double s = model.score(inst.features);
    if (s > best_score || (s == best_score && inst.topic_id < best)) {
      best = inst.topic_id;
      best_score = s;
    }
  }
  return best;
}

namespace {
TopicId labeled_intruder(const RankGroup& g) {
  for (const auto& inst : g.instances)
    if (inst.label == 1) return inst.topic_id;
  throw Error("group for " + g.doc_id + " has no labeled intruder");
}
}  // namespace

std::vector<SystemPrecision> system_model_precision(const LinearRankModel& model,
                                                    const std::vector<RankGroup>& groups) {
  std::map<std::string, SystemPrecision> acc;
  for (const auto& g : groups) {
    auto& sp = acc[g.model_name];
    sp.model_name = g.model_name;
    const bool correct = predict_intruder(model, g) == labeled_intruder(g);
    sp.per_doc.push_back({g.doc_id, g.item_id, correct ? 1.0 : 0.0, 1});
  }
  std::vector<SystemPrecision> out;
  for (auto& [name, sp] : acc) {
    std::sort(sp.per_doc.begin(), sp.per_doc.end(),
              [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
    double s = 0.0;
    for (const auto& d : sp.per_doc) s += d.value;
    sp.mean = sp.per_doc.empty() ? 0.0 : s / static_cast<double>(sp.per_doc.size());
    out.push_back(std::move(sp));
  }
  return out;
}

double group_accuracy(const LinearRankModel& model, const std::vector<RankGroup>& groups) {
  if (groups.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& g : groups)
    if (predict_intruder(model, g) == labeled_intruder(g)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(groups.size());
}

std::optional<double> correlate(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("correlate: vectors differ in length");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

namespace {
constexpr std::string_view kRankerMagic = "#topeval-ranker";

template <typename It>
std::string join_doubles(It first, It last) {
  std::ostringstream o;
  o.precision(17);
  for (auto it = first; it != last; ++it) o << (it == first ? "" : "\t") << *it;
  return o.str();
}
}  // namespace

void save_ranker(const std::filesystem::path& path, const LinearRankModel& model,
                 std::string_view config_hash) {
  std::ostringstream out;
  out.precision(17);
  out << kRankerMagic << "\t1\t" << config_hash << '\n';
  out << "weights\t" << join_doubles(model.weights.begin(), model.weights.end()) << '\n';
  out << "bias\t" << model.bias << '\n';
  out << "mean\t" << join_doubles(model.scaling.mean.begin(), model.scaling.mean.end()) << '\n';
  out << "stddev\t" << join_doubles(model.scaling.stddev.begin(), model.scaling.stddev.end())
      << '\n';
  out << "c\t" << model.trainer.c << '\n';
  out << "seed\t" << model.trainer.seed << '\n';
  out << "epochs\t" << model.trainer.epochs << '\n';
  out << "learning_rate\t" << model.trainer.learning_rate << '\n';
  out << "train_groups\t" << model.train_groups << '\n';
  out << "train_pairs\t" << model.train_pairs << '\n';
  out << "degenerate\t" << (model.degenerate ? 1 : 0) << '\n';
  write_file_atomic(path, out.str());
}

LinearRankModel load_ranker(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ranker: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind(std::string(kRankerMagic) + "\t1\t", 0) != 0)
    throw Error(path.string() + ": not a version-1 ranker file");
  LinearRankModel m;
  auto read3 = [&](std::istringstream& ls, FeatureVector& v) {
    for (double& x : v) ls >> x;
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "weights") read3(ls, m.weights);
    else if (key == "bias") ls >> m.bias;
    else if (key == "mean") read3(ls, m.scaling.mean);
    else if (key == "stddev") read3(ls, m.scaling.stddev);
    else if (key == "c") ls >> m.trainer.c;
    else if (key == "seed") ls >> m.trainer.seed;
    else if (key == "epochs") ls >> m.trainer.epochs;
    else if (key == "learning_rate") ls >> m.trainer.learning_rate;
    else if (key == "train_groups") ls >> m.train_groups;
    else if (key == "train_pairs") ls >> m.train_pairs;
    else if (key == "degenerate") {
      int d = 0;
      ls >> d;
      m.degenerate = d != 0;
    } else if (!key.empty()) {
      throw Error(path.string() + ": unknown key '" + key + "'");
    }
    if (ls.fail()) throw Error(path.string() + ": bad value for '" + key + "'");
  }
  for (double sd : m.scaling.stddev)
    if (!(sd > 0.0)) throw Error(path.string() + ": stddev entries must be positive");
  return m;
}

}  // namespace topeval
