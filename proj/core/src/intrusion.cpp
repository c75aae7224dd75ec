#include "topeval/intrusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "topeval/hash.hpp"

namespace topeval {
namespace {

constexpr std::size_t kShownWords = 10;

std::vector<std::string> words_of(const std::vector<TypeId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TypeId t : ids) out.push_back(vocab.types.at(static_cast<std::size_t>(t)));
  return out;
}

template <typename T>
T pick_uniform(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

IntruderSampler::IntruderSampler(const TopicModelArtifact& model, SamplerOptions options)
    : model_(&model), options_(options), high_rank_docs_(model.num_topics(), 0) {
  if (model.num_topics() < 4)
    throw Error("intruder sampling needs at least 4 topics; model '" + model.name + "' has " +
                std::to_string(model.num_topics()));
  if (options_.high_rank < 1) throw Error("high_rank must be at least 1");
  const auto depth = static_cast<std::size_t>(options_.high_rank);
  for (const auto& [id, alloc] : model.allocations) {
    const auto order = alloc.ranked();
    for (std::size_t r = 0; r < std::min(depth, order.size()); ++r)
      ++high_rank_docs_[static_cast<std::size_t>(order[r])];
  }
}

std::vector<TopicId> IntruderSampler::candidates(std::string_view doc_id, double low_tau) const {
  const auto* alloc = model_->allocation(doc_id);
  if (!alloc) throw Error("no allocation for document " + std::string(doc_id) + " in model '" +
                          model_->name + "'");
  const auto order = alloc->ranked();
  const auto depth = static_cast<std::size_t>(options_.high_rank);
  std::vector<int> own_rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) own_rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  std::vector<TopicId> out;
  for (std::size_t t = 0; t < order.size(); ++t) {
    const int rank = own_rank[t];
    if (rank < 3) continue;  // the document's own top three are shown anyway
    if (!(alloc->theta[t] < low_tau)) continue;
    const int elsewhere = high_rank_docs_[t] - (static_cast<std::size_t>(rank) < depth ? 1 : 0);
    if (elsewhere > 0) out.push_back(static_cast<TopicId>(t));
  }
  return out;
}

std::optional<IntruderSample> IntruderSampler::sample(std::string_view doc_id,
                                                      std::uint64_t seed) const {
  double tau = options_.low_tau;
  for (int step = 0; step <= options_.max_relax_steps; ++step) {
    const auto cands = candidates(doc_id, tau);
    if (!cands.empty()) {
      std::mt19937_64 rng(seed);
      return IntruderSample{pick_uniform(cands, rng), tau, step > 0};
    }
    if (tau >= 1.0) break;
    tau = std::min(1.0, tau * 2.0);
  }
  return std::nullopt;
}

std::optional<IntruderSample> sample_intruder(std::string_view doc_id,
                                              const TopicModelArtifact& model,
                                              std::uint64_t seed, SamplerOptions options) {
  return IntruderSampler(model, options).sample(doc_id, seed);
}

ControlTopic make_control(const Vocabulary& vocab, std::uint64_t seed, std::size_t n_words) {
  if (vocab.size() < n_words)
    throw Error("make_control: vocabulary has fewer than " + std::to_string(n_words) + " types");
  std::vector<TypeId> pool(vocab.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_words; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  ControlTopic out;
  out.words.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_words));
  out.dist.topic_id = kControlTopic;
  out.dist.probs.assign(vocab.size(), 0.0);
  for (TypeId w : out.words)
    out.dist.probs[static_cast<std::size_t>(w)] = 1.0 / static_cast<double>(n_words);
  return out;
}

IntrusionSet generate_intrusion(const std::vector<const TopicModelArtifact*>& models,
                                const std::vector<Document>& docs,
                                const std::vector<std::string>& doc_ids, const Vocabulary& vocab,
                                const GenerationOptions& options,
                                const std::vector<std::string>& control_doc_ids) {
  if (models.empty()) throw Error("generate_intrusion: no models");
  IntrusionSet set;
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);
  auto doc_of = [&](const std::string& id) -> const Document& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("generate_intrusion: unknown document " + id);
    return *it->second;
  };

  std::vector<IntruderSampler> samplers;
  for (const auto* m : models) samplers.emplace_back(*m, options.sampler);

  auto fill_common = [&](IntrusionItem& item, const Document& doc) {
    item.doc_id = doc.id;
    item.snippet = doc.snippet;
    item.full_text = doc.raw_text;
  };

  std::vector<IntrusionItem> content;
  for (const auto& doc_id : doc_ids) {
    const auto& doc = doc_of(doc_id);
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto& model = *models[m];
      const auto* alloc = model.allocation(doc_id);
      if (!alloc) {
        set.flags.push_back("model '" + model.name + "' has no allocation for " + doc_id);
        continue;
      }
      auto sample = samplers[m].sample(doc_id, derive_seed(options.seed, doc_id, model.name));
      if (!sample) {
        set.flags.push_back("no valid intruder for " + doc_id + " under '" + model.name + "'");
        continue;
      }
      IntrusionItem item;
      fill_common(item, doc);
      item.item_id = model.name + ":" + doc_id;
      item.model_name = model.name;
      const auto order = alloc->ranked();
      std::copy_n(order.begin(), 3, item.top3.begin());
      std::array<TopicId, 4> shown{item.top3[0], item.top3[1], item.top3[2], sample->topic};
      std::mt19937_64 rng(derive_seed(options.seed, doc_id, model.name + "/order"));
      std::shuffle(shown.begin(), shown.end(), rng);
      item.shown_topics = shown;
      item.intruder_pos = static_cast<int>(
          std::find(shown.begin(), shown.end(), sample->topic) - shown.begin());
      for (std::size_t p = 0; p < 4; ++p)
        item.topic_words[p] = words_of(
            model.topics[static_cast<std::size_t>(shown[p])].top_words(kShownWords), vocab);
      item.low_tau = sample->low_tau;
      item.high_rank = options.sampler.high_rank;
      item.relaxed = sample->relaxed;
      if (item.relaxed)
        set.flags.push_back(item.item_id + ": low_tau relaxed to " + std::to_string(item.low_tau));
      content.push_back(std::move(item));
    }
  }

  // Control documents: explicit list, otherwise the documents whose top-3
  // mass under the first model is most concentrated.
  const auto& control_model = *models.front();
  std::vector<std::string> controls = control_doc_ids;
  if (controls.empty()) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& doc : docs) {
      const auto* alloc = control_model.allocation(doc.id);
      if (!alloc) continue;
      auto theta = alloc->theta;
      std::partial_sort(theta.begin(), theta.begin() + 3, theta.end(), std::greater<>());
      scored.emplace_back(theta[0] + theta[1] + theta[2], doc.id);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < std::min(options.n_control_docs, scored.size()); ++i)
      controls.push_back(scored[i].second);
  }
  if (controls.empty()) throw Error("generate_intrusion: no control documents available");

  std::mt19937_64 rng(derive_seed(options.seed, "hits"));
  std::shuffle(content.begin(), content.end(), rng);
  const std::size_t per_hit = std::max<std::size_t>(1, options.items_per_hit);
  const std::size_t n_hits = (content.size() + per_hit - 1) / per_hit;
  std::vector<IntrusionItem> control_items;
  for (std::size_t h = 0; h < n_hits; ++h) {
    const auto& doc_id = controls[h % controls.size()];
    const auto& doc = doc_of(doc_id);
    const auto* alloc = control_model.allocation(doc_id);
    if (!alloc) throw Error("control document " + doc_id + " has no allocation");
    IntrusionItem item;
    fill_common(item, doc);
    item.item_id = "control:" + std::to_string(h);
    item.model_name = control_model.name;
    item.is_control = true;
    const auto order = alloc->ranked();
    std::copy_n(order.begin(), 3, item.top3.begin());
    const auto control = make_control(vocab, derive_seed(options.seed, item.item_id), kShownWords);
    const auto pos = std::uniform_int_distribution<int>(0, 3)(rng);
    std::size_t next = 0;
    for (int p = 0; p < 4; ++p) {
      if (p == pos) {
        item.shown_topics[static_cast<std::size_t>(p)] = kControlTopic;
        item.topic_words[static_cast<std::size_t>(p)] = words_of(control.words, vocab);
      } else {
        const TopicId t = item.top3[next++];
        item.shown_topics[static_cast<std::size_t>(p)] = t;
        item.topic_words[static_cast<std::size_t>(p)] = words_of(
            control_model.topics[static_cast<std::size_t>(t)].top_words(kShownWords), vocab);
      }
    }
    item.intruder_pos = pos;

    Hit hit;
    hit.hit_id = "hit" + std::to_string(h);
    for (std::size_t i = h * per_hit; i < std::min(content.size(), (h + 1) * per_hit); ++i)
      hit.item_ids.push_back(content[i].item_id);
    if (hit.item_ids.size() < per_hit)
      set.flags.push_back(hit.hit_id + " has only " + std::to_string(hit.item_ids.size()) +
                          " content items");
    const auto at = std::uniform_int_distribution<std::size_t>(0, hit.item_ids.size())(rng);
    hit.item_ids.insert(hit.item_ids.begin() + static_cast<std::ptrdiff_t>(at), item.item_id);
    set.hits.push_back(std::move(hit));
    control_items.push_back(std::move(item));
  }

  std::sort(content.begin(), content.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  set.items = std::move(content);
  for (auto& c : control_items) set.items.push_back(std::move(c));
  return set;
}

// ---- metrics ------------------------------------------------------------

QcResult quality_filter(const std::vector<AnnotationRecord>& annotations,
                        const std::vector<IntrusionItem>& items, double threshold) {
  std::unordered_map<std::string_view, const IntrusionItem*> by_id;
  for (const auto& it : items) by_id.emplace(it.item_id, &it);
  std::map<std::string, WorkerQc> workers;
  for (const auto& a : annotations) {
    auto& w = workers[a.worker_id];
    w.worker_id = a.worker_id;
    auto it = by_id.find(a.item_id);
    if (it == by_id.end() || !it->second->is_control) continue;
    ++w.control_total;
    if (a.chosen_pos == it->second->intruder_pos) ++w.control_correct;
  }
  QcResult out;
  for (auto& [id, w] : workers) {
    w.no_controls = w.control_total == 0;
    w.accuracy = w.no_controls ? 0.0
                               : static_cast<double>(w.control_correct) /
                                     static_cast<double>(w.control_total);
    w.kept = !w.no_controls && w.accuracy > threshold;
    out.workers.push_back(w);
  }
  for (const auto& a : annotations)
    if (workers.at(a.worker_id).kept) out.kept.push_back(a);
  return out;
}

ModelMetrics* MetricReport::find(std::string_view name) {
  for (auto& m : models)
    if (m.model_name == name) return &m;
  return nullptr;
}

const ModelMetrics* MetricReport::find(std::string_view name) const {
  return const_cast<MetricReport*>(this)->find(name);
}

namespace {

ModelMetrics& entry(MetricReport& report, const std::string& name) {
  if (auto* m = report.find(name)) return *m;
  report.models.push_back({});
  report.models.back().model_name = name;
  std::sort(report.models.begin(), report.models.end(),
            [](const auto& a, const auto& b) { return a.model_name < b.model_name; });
  return *report.find(name);
}

// Non-control items with their annotations, in item order.
std::vector<std::pair<const IntrusionItem*, std::vector<const AnnotationRecord*>>> by_item(
    const std::vector<AnnotationRecord>& annotations, const std::vector<IntrusionItem>& items) {
  std::unordered_map<std::string_view, std::size_t> pos;
  std::vector<std::pair<const IntrusionItem*, std::vector<const AnnotationRecord*>>> out;
  for (const auto& it : items) {
    if (it.is_control) continue;
    pos.emplace(it.item_id, out.size());
    out.push_back({&it, {}});
  }
  for (const auto& a : annotations) {
    auto p = pos.find(a.item_id);
    if (p != pos.end()) out[p->second].second.push_back(&a);
  }
  return out;
}

double mean_of(const std::vector<DocScore>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : v) s += d.value;
  return s / static_cast<double>(v.size());
}

void sort_scores(std::vector<DocScore>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
}

}  // namespace

MetricReport model_precision(const std::vector<AnnotationRecord>& annotations,
                             const std::vector<IntrusionItem>& items) {
  MetricReport report;
  for (const auto& [item, anns] : by_item(annotations, items)) {
    auto& m = entry(report, item->model_name);
    if (anns.empty()) {
      report.flags.push_back(item->item_id + ": no surviving annotations; excluded");
      continue;
    }
    int correct = 0;
    for (const auto* a : anns)
      if (a->chosen_pos == item->intruder_pos) ++correct;
    m.precision.push_back({item->doc_id, item->item_id,
                           static_cast<double>(correct) / static_cast<double>(anns.size()),
                           static_cast<int>(anns.size())});
  }
  for (auto& m : report.models) {
    sort_scores(m.precision);
    m.mean_precision = mean_of(m.precision);
  }
  return report;
}

void topic_log_odds(const std::vector<AnnotationRecord>& annotations,
                    const std::vector<IntrusionItem>& items,
                    const std::map<std::string, const TopicModelArtifact*, std::less<>>& models,
                    MetricReport& report) {
  for (const auto& [item, anns] : by_item(annotations, items)) {
    if (anns.empty()) continue;
    auto mit = models.find(item->model_name);
    if (mit == models.end()) throw Error("topic_log_odds: unknown model " + item->model_name);
    const auto* alloc = mit->second->allocation(item->doc_id);
    if (!alloc) throw Error("topic_log_odds: no allocation for " + item->doc_id);
    auto theta = [&](TopicId t) {
      return std::log(std::max(alloc->theta.at(static_cast<std::size_t>(t)), kLogFloor));
    };
    const double intruder = theta(item->intruder());
    double sum = 0.0;
    bool violated = false;
    for (const auto* a : anns) {
      const double term = intruder - theta(item->shown_topics.at(static_cast<std::size_t>(a->chosen_pos)));
      if (term > 0.0) violated = true;
      sum += term;
    }
    if (violated)
      report.flags.push_back(item->item_id +
                             ": intruder has higher theta than a chosen topic (TLO > 0 term)");
    entry(report, item->model_name)
        .log_odds.push_back({item->doc_id, item->item_id, sum / static_cast<double>(anns.size()),
                             static_cast<int>(anns.size())});
  }
  for (auto& m : report.models) {
    sort_scores(m.log_odds);
    m.mean_log_odds = mean_of(m.log_odds);
  }
}

std::map<std::string, double, std::less<>> direct_rating_report(
    const std::vector<RatingRecord>& ratings) {
  std::map<std::string, std::pair<double, std::size_t>, std::less<>> acc;
  for (const auto& r : ratings) {
    if (r.rating < 0 || r.rating > 3) throw Error("rating out of range 0-3");
    auto& a = acc[r.model_name];
    a.first += r.rating;
    ++a.second;
  }
  std::map<std::string, double, std::less<>> out;
  for (const auto& [name, a] : acc) out[name] = a.first / static_cast<double>(a.second);
  return out;
}

std::vector<std::string> under_annotated(const std::vector<AnnotationRecord>& kept,
                                         const std::vector<IntrusionItem>& items, int min_valid) {
  std::vector<std::string> out;
  for (const auto& [item, anns] : by_item(kept, items))
    if (static_cast<int>(anns.size()) < min_valid) out.push_back(item->item_id);
  return out;
}

}  // namespace topeval
