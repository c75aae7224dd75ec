#include "topeval/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "topeval/hash.hpp"
#include "topeval/parallel.hpp"

namespace topeval {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<double> normalized(std::vector<double> scores, bool* degenerate) {
  double sum = 0.0;
  for (double s : scores) sum += s;
  if (sum <= 0.0) {
    *degenerate = true;
    std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(scores.size()));
    return scores;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

}  // namespace

namespace {

struct Run {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assign;
  double inertia = 0.0;
  int iterations = 0;
  bool converged = false;
};

Run lloyd(const std::vector<std::span<const double>>& points, std::size_t k, std::size_t dim,
          std::uint64_t seed, int max_iterations) {
  const std::size_t n = points.size();
  Run result;
  // Greedy k-means++ seeding: each step draws several D^2-weighted
  // candidates and keeps the one that most reduces the potential.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  const auto trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  auto take = [&](std::size_t i) {
    chosen[i] = true;
    centroids.emplace_back(points[i].begin(), points[i].end());
    for (std::size_t p = 0; p < n; ++p) d2[p] = std::min(d2[p], sq_dist(points[p], centroids.back()));
  };
  auto draw = [&](double total) {
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (chosen[p]) continue;
      pick = p;
      r -= d2[p];
      if (r < 0.0) break;
    }
    return pick;
  };
  take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      if (!chosen[p]) total += d2[p];
    std::size_t pick = n;
    if (total > 0.0) {
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t cand = draw(total);
        double potential = 0.0;
        for (std::size_t p = 0; p < n; ++p)
          potential += std::min(d2[p], sq_dist(points[p], points[cand]));
        if (potential < best_potential) {
          best_potential = potential;
          pick = cand;
        }
      }
    } else {
      for (std::size_t p = 0; p < n && pick == n; ++p)
        if (!chosen[p]) pick = p;
    }
    take(pick);
  }

  std::vector<std::size_t> assign(n, k);
  std::vector<std::size_t> next(n);
  std::vector<double> best_d(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    parallel_for(n, [&](std::size_t p) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(points[p], centroids[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      next[p] = best;
      best_d[p] = bd;
    });
    result.iterations = iter + 1;
    if (next == assign) {
      result.converged = true;
      break;
    }
    assign = next;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++sizes[assign[p]];
      for (std::size_t i = 0; i < dim; ++i) sums[assign[p]][i] += points[p][i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Re-seed an empty cluster with the point farthest from its centroid.
        std::size_t far = 0;
        for (std::size_t p = 1; p < n; ++p)
          if (best_d[p] > best_d[far]) far = p;
        best_d[far] = 0.0;
        centroids[c].assign(points[far].begin(), points[far].end());
        continue;
      }
      for (std::size_t i = 0; i < dim; ++i)
        centroids[c][i] = sums[c][i] / static_cast<double>(sizes[c]);
    }
  }

  result.centroids = std::move(centroids);
  result.assign = std::move(assign);
  for (std::size_t p = 0; p < n; ++p)
    result.inertia += sq_dist(points[p], result.centroids[result.assign[p]]);
  return result;
}

}  // namespace

KMeansResult kmeans_clusters(const EmbeddingTable& emb, const Vocabulary& vocab, std::size_t k,
                             std::uint64_t seed, int max_iterations, int n_init) {
  KMeansResult result;
  std::vector<TypeId> types;
  std::vector<std::span<const double>> points;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    if (auto v = emb.vector_of(vocab.types[t])) {
      types.push_back(static_cast<TypeId>(t));
      points.push_back(*v);
    } else {
      result.dropped.push_back(static_cast<TypeId>(t));
    }
  }
  const std::size_t n = points.size();
  const std::size_t dim = emb.dim();
  if (k == 0) throw Error("k-means: k must be positive");
  if (k > n)
    throw Error("k-means: k=" + std::to_string(k) + " exceeds the " + std::to_string(n) +
                " embedded vocabulary types");

  if (n_init < 1) throw Error("k-means: n_init must be positive");
  Run best;
  for (int r = 0; r < n_init; ++r) {
    auto run = lloyd(points, k, dim, r == 0 ? seed : derive_seed(seed, "kmeans", std::to_string(r)),
                     max_iterations);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c) result.clusters[c].centroid = best.centroids[c];
  for (std::size_t p = 0; p < n; ++p) result.clusters[best.assign[p]].members.push_back(types[p]);
  return result;
}

TopicWordDist cluster_topic_dist(std::span<const double> centroid, const EmbeddingTable& emb,
                                 const Vocabulary& vocab, CosineScore score) {
  if (std::all_of(centroid.begin(), centroid.end(), [](double x) { return x == 0.0; }))
    throw Error("cluster_topic_dist: zero centroid");
  TopicWordDist dist;
  dist.probs.assign(vocab.size(), 0.0);
  double sum = 0.0;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    auto v = emb.vector_of(vocab.types[t]);
    if (!v) continue;
    const double c = cosine(*v, centroid);
    const double s = score == CosineScore::similarity ? std::max(0.0, c) : 1.0 - c;
    dist.probs[t] = s;
    sum += s;
  }
  if (sum <= 0.0) throw Error("cluster_topic_dist: all word scores are zero");
  for (double& p : dist.probs) p /= sum;
  return dist;
}

std::vector<double> topic_vector(const TopicWordDist& topic, const EmbeddingTable& emb,
                                 const Vocabulary& vocab, std::size_t top_n) {
  std::vector<double> mean(emb.dim(), 0.0);
  std::size_t used = 0;
  for (TypeId w : topic.top_words(top_n)) {
    auto v = emb.vector_of(vocab.types[static_cast<std::size_t>(w)]);
    if (!v) continue;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*v)[i];
    ++used;
  }
  if (used == 0) return {};
  for (double& x : mean) x /= static_cast<double>(used);
  return mean;
}

AllocationResult cluster_allocation(const Document& doc,
                                    const std::vector<std::vector<double>>& topic_vectors,
                                    const EmbeddingTable& emb) {
  AllocationResult out;
  out.dist.doc_id = doc.id;
  const std::size_t k = topic_vectors.size();
  std::vector<double> mean(emb.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& tok : doc.tokens) {
    auto v = emb.vector_of(tok);
    if (!v) continue;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*v)[i];
    ++used;
  }
  std::vector<double> scores(k, 0.0);
  if (used > 0) {
    for (double& x : mean) x /= static_cast<double>(used);
    for (std::size_t t = 0; t < k; ++t)
      if (!topic_vectors[t].empty()) scores[t] = std::max(0.0, cosine(mean, topic_vectors[t]));
  }
  out.dist.theta = normalized(std::move(scores), &out.degenerate);
  return out;
}

AllocationResult cluster_allocation(const Document& doc, const std::vector<TopicWordDist>& topics,
                                    const EmbeddingTable& emb, const Vocabulary& vocab) {
  std::vector<std::vector<double>> vecs;
  vecs.reserve(topics.size());
  for (const auto& t : topics) vecs.push_back(topic_vector(t, emb, vocab));
  return cluster_allocation(doc, vecs, emb);
}

ClusterModelResult build_cluster_model(const EmbeddingTable& emb, const Vocabulary& vocab,
                                       const std::vector<Document>& docs, std::size_t k,
                                       std::uint64_t seed, CosineScore score) {
  ClusterModelResult result;
  auto km = kmeans_clusters(emb, vocab, k, seed);
  if (!km.dropped.empty())
    result.flags.push_back(std::to_string(km.dropped.size()) +
                           " vocabulary types have no embedding and were dropped");
  if (!km.converged)
    result.flags.push_back("k-means stopped at the iteration cap without converging");
  auto& model = result.model;
  model.name = "cluster";
  for (std::size_t c = 0; c < km.clusters.size(); ++c) {
    auto dist = cluster_topic_dist(km.clusters[c].centroid, emb, vocab, score);
    dist.topic_id = static_cast<TopicId>(c);
    model.topics.push_back(std::move(dist));
  }
  std::vector<std::vector<double>> vecs;
  for (const auto& t : model.topics) vecs.push_back(topic_vector(t, emb, vocab));
  std::size_t degenerate = 0;
  for (const auto& doc : docs) {
    auto alloc = cluster_allocation(doc, vecs, emb);
    if (alloc.degenerate) ++degenerate;
    model.allocations.emplace(doc.id, std::move(alloc.dist));
  }
  if (degenerate)
    result.flags.push_back(std::to_string(degenerate) +
                           " documents had no usable embedding signal; allocated uniformly");
  return result;
}

}  // namespace topeval
