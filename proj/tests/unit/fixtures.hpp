#pragma once

#include <random>
#include <string>
#include <vector>

#include "topeval/autoeval.hpp"
#include "topeval/intrusion.hpp"

namespace topeval::test {

inline IntrusionItem make_item(std::string item_id, std::string doc_id, std::string model,
                               std::array<TopicId, 4> shown, int intruder_pos,
                               bool control = false) {
  IntrusionItem it;
  it.item_id = std::move(item_id);
  it.doc_id = std::move(doc_id);
  it.model_name = std::move(model);
  it.shown_topics = shown;
  it.intruder_pos = intruder_pos;
  it.is_control = control;
  for (std::size_t p = 0; p < 4; ++p) it.topic_words[p] = {"w" + std::to_string(p)};
  return it;
}

// n annotations on item from workers prefix0..; `correct` of them pick the intruder.
inline std::vector<AnnotationRecord> votes(const IntrusionItem& item, int n, int correct,
                                           const std::string& prefix = "w") {
  std::vector<AnnotationRecord> out;
  for (int i = 0; i < n; ++i) {
    const int pos = i < correct ? item.intruder_pos : (item.intruder_pos + 1) % 4;
    out.push_back({prefix + std::to_string(i), item.item_id, pos, 0});
  }
  return out;
}

// Model with K topics over V words and Dirichlet(alpha) allocations for docs d0..d{n-1}.
inline TopicModelArtifact dirichlet_model(std::size_t k, std::size_t v, std::size_t n_docs,
                                          double alpha, std::uint64_t seed,
                                          std::string name = "m") {
  std::mt19937_64 rng(seed);
  auto draw = [&](std::size_t n, double a) {
    std::gamma_distribution<double> g(a, 1.0);
    std::vector<double> x(n);
    double s = 0;
    for (auto& e : x) s += (e = g(rng) + 1e-9);
    for (auto& e : x) e /= s;
    return x;
  };
  TopicModelArtifact m;
  m.name = std::move(name);
  for (std::size_t t = 0; t < k; ++t) m.topics.push_back({static_cast<TopicId>(t), draw(v, 0.5)});
  for (std::size_t d = 0; d < n_docs; ++d) {
    const auto id = "d" + std::to_string(d);
    m.allocations.emplace(id, DocTopicDist{id, draw(k, alpha)});
  }
  return m;
}

// Groups of four instances with N(0,1) features; the intruder (at a random
// slot) has every feature shifted by `offset` standard deviations.
inline std::vector<RankGroup> offset_groups(std::size_t n, double offset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> slot(0, 3);
  std::vector<RankGroup> out(n);
  for (std::size_t g = 0; g < n; ++g) {
    out[g].doc_id = "g" + std::to_string(g);
    out[g].model_name = "m";
    const int pos = slot(rng);
    for (int t = 0; t < 4; ++t) {
      RankInstance in;
      in.topic_id = t;
      in.label = t == pos ? 1 : 0;
      for (auto& f : in.features) f = z(rng) + (in.label ? offset : 0.0);
      out[g].instances.push_back(in);
    }
  }
  return out;
}

}  // namespace topeval::test
