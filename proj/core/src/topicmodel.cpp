#include "topeval/topicmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "topeval/records.hpp"

namespace topeval {
namespace {

using json = nlohmann::json;
constexpr std::string_view kModelFormat = "topeval.model";

template <typename Index>
std::vector<Index> ranked_indices(const std::vector<double>& values) {
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });
  return order;
}

void check_row(std::vector<double>& row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(what + ": negative or non-finite entry");
    sum += p;
  }
  const double dev = std::abs(sum - 1.0);
  if (dev > kRenormalizeTolerance)
    throw Error(what + ": sums to " + std::to_string(sum) + ", outside tolerance");
  if (dev > 0.0)
    for (double& p : row) p /= sum;
}

}  // namespace

std::vector<TypeId> TopicWordDist::top_words(std::size_t n) const {
  auto order = ranked_indices<TypeId>(probs);
  std::vector<TypeId> out;
  for (TypeId t : order) {
    if (out.size() >= n || probs[static_cast<std::size_t>(t)] <= 0.0) break;
    out.push_back(t);
  }
  return out;
}

std::vector<TopicId> DocTopicDist::ranked() const { return ranked_indices<TopicId>(theta); }

const DocTopicDist* TopicModelArtifact::allocation(std::string_view doc_id) const {
  auto it = allocations.find(doc_id);
  return it == allocations.end() ? nullptr : &it->second;
}

void validate_model(TopicModelArtifact& model, std::size_t vocab_size) {
  if (model.topics.empty()) throw Error("model '" + model.name + "' has no topics");
  const std::size_t k = model.topics.size();
  for (std::size_t t = 0; t < k; ++t) {
    auto& topic = model.topics[t];
    topic.topic_id = static_cast<TopicId>(t);
    if (topic.probs.size() != vocab_size)
      throw Error("model '" + model.name + "' topic " + std::to_string(t) +
                  ": vocabulary size mismatch");
    check_row(topic.probs, "model '" + model.name + "' topic " + std::to_string(t));
  }
  for (auto& [id, alloc] : model.allocations) {
    alloc.doc_id = id;
    if (alloc.theta.size() != k)
      throw Error("model '" + model.name + "' document " + id + ": expected " +
                  std::to_string(k) + " topic weights");
    check_row(alloc.theta, "model '" + model.name + "' document " + id);
  }
}

void save_model(const std::filesystem::path& path, const TopicModelArtifact& model,
                const Vocabulary& vocab, const SaveOptions& options) {
  const std::size_t v = vocab.size();
  std::string out;
  {
    json h;
    h["format"] = kModelFormat;
    h["version"] = kRecordVersion;
    h["config_hash"] = options.config_hash;
    h["name"] = model.name;
    h["K"] = model.topics.size();
    h["V"] = v;
    out += h.dump() + "\n";
  }
  out += json{{"vocab", vocab.types}}.dump() + "\n";
  for (const auto& topic : model.topics) {
    if (topic.probs.size() != v) throw Error("save_model: topic size does not match vocabulary");
    std::vector<TypeId> keep;
    if (options.max_topic_entries == 0 || options.max_topic_entries >= v) {
      for (std::size_t w = 0; w < v; ++w)
        if (topic.probs[w] > 0.0) keep.push_back(static_cast<TypeId>(w));
    } else {
      keep = topic.top_words(options.max_topic_entries);
      std::sort(keep.begin(), keep.end());
    }
    json entries = json::array();
    double kept_mass = 0.0;
    for (TypeId w : keep) {
      entries.push_back(json::array({w, topic.probs[static_cast<std::size_t>(w)]}));
      kept_mass += topic.probs[static_cast<std::size_t>(w)];
    }
    std::size_t zero_or_omitted = v - keep.size();
    double rest = 0.0;
    if (options.max_topic_entries != 0 && options.max_topic_entries < v)
      rest = std::max(0.0, 1.0 - kept_mass);
    json j;
    j["topic"] = topic.topic_id;
    j["entries"] = std::move(entries);
    j["rest"] = rest;
    j["omitted"] = rest > 0.0 ? zero_or_omitted : 0;
    out += j.dump() + "\n";
  }
  for (const auto& [id, alloc] : model.allocations) {
    json j;
    j["doc"] = id;
    j["theta"] = alloc.theta;
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

TopicModelArtifact load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model: " + path.string());
  auto fail = [&](const std::string& why) { return Error(path.string() + ": " + why); };
  std::string line;
  json header;
  try {
    if (!std::getline(in, line)) throw fail("empty file");
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  if (header.value("format", "") != kModelFormat || header.value("version", 0) != kRecordVersion)
    throw fail("not a version-1 model file");

  TopicModelArtifact model;
  std::size_t k = 0, v = 0;
  try {
    model.name = header.at("name").get<std::string>();
    k = header.at("K").get<std::size_t>();
    v = header.at("V").get<std::size_t>();
  } catch (const json::exception& e) {
    throw fail(std::string("header: ") + e.what());
  }
  if (v != vocab.size())
    throw fail("vocabulary mismatch: model has " + std::to_string(v) + " types, corpus has " +
               std::to_string(vocab.size()));

  std::vector<TypeId> remap(v);
  try {
    std::getline(in, line);
    const auto words = json::parse(line).at("vocab").get<std::vector<std::string>>();
    if (words.size() != v) throw fail("vocab record length differs from V");
    std::vector<bool> hit(v, false);
    for (std::size_t i = 0; i < v; ++i) {
      auto id = vocab.find(words[i]);
      if (!id) throw fail("vocabulary mismatch: '" + words[i] + "' not in corpus vocabulary");
      if (hit[static_cast<std::size_t>(*id)]) throw fail("duplicate vocabulary entry");
      hit[static_cast<std::size_t>(*id)] = true;
      remap[i] = *id;
    }
  } catch (const json::exception& e) {
    throw fail(std::string("vocab record: ") + e.what());
  }

  model.topics.resize(k);
  std::vector<bool> seen(k, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (j.contains("topic")) {
        const auto t = j.at("topic").get<std::size_t>();
        if (t >= k || seen[t]) throw fail("bad or duplicate topic id " + std::to_string(t));
        seen[t] = true;
        auto& topic = model.topics[t];
        topic.topic_id = static_cast<TopicId>(t);
        topic.probs.assign(v, 0.0);
        std::vector<bool> present(v, false);
        for (const auto& e : j.at("entries")) {
          const auto w = e.at(0).get<std::size_t>();
          if (w >= v) throw fail("type id out of range in topic " + std::to_string(t));
          topic.probs[static_cast<std::size_t>(remap[w])] = e.at(1).get<double>();
          present[static_cast<std::size_t>(remap[w])] = true;
        }
        const double rest = j.value("rest", 0.0);
        const auto omitted = j.value("omitted", std::size_t{0});
        if (rest > 0.0 && omitted > 0) {
          const double share = rest / static_cast<double>(omitted);
          for (std::size_t w = 0; w < v; ++w)
            if (!present[w]) topic.probs[w] = share;
        }
      } else if (j.contains("doc")) {
        DocTopicDist alloc;
        alloc.doc_id = j.at("doc").get<std::string>();
        alloc.theta = j.at("theta").get<std::vector<double>>();
        if (!model.allocations.emplace(alloc.doc_id, alloc).second)
          throw fail("duplicate document " + alloc.doc_id);
      } else {
        throw fail("unknown record");
      }
    } catch (const json::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
  }
  for (std::size_t t = 0; t < k; ++t)
    if (!seen[t]) throw fail("missing topic " + std::to_string(t));
  validate_model(model, v);
  return model;
}

}  // namespace topeval
