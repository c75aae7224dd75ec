#include "topeval/records.hpp"

#include <fstream>

#include <json.hpp>

namespace topeval {
namespace {

using json = nlohmann::json;


template <typename T, typename ToLine>
void save_lines(const std::filesystem::path& path, std::string_view kind,
                std::string_view config_hash, const std::vector<T>& values, ToLine&& to_line) {
  std::string out = header_line(kind, config_hash);
  for (const auto& v : values) {
    out += to_line(v);
    out += '\n';
  }
  write_file_atomic(path, out);
}

json parse(std::string_view line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
}

}  // namespace

std::string header_line(std::string_view kind, std::string_view config_hash) {
  // Fixed key order so headers are byte-stable.
  return "{\"format\":" + json(std::string(kind)).dump() +
         ",\"version\":" + std::to_string(kRecordVersion) +
         ",\"config_hash\":" + json(std::string(config_hash)).dump() + "}\n";
}

std::string tsv_header(std::string_view kind, std::string_view config_hash) {
  return "#" + std::string(kind) + "\t" + std::to_string(kRecordVersion) + "\t" +
         std::string(config_hash) + "\n";
}

std::vector<std::string> read_record_lines(const std::filesystem::path& path,
                                           std::string_view kind) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  const auto header = parse(line);
  if (!header.is_object() || header.value("format", "") != kind)
    throw Error(path.string() + ": expected a '" + std::string(kind) + "' file");
  if (header.value("version", 0) != kRecordVersion)
    throw Error(path.string() + ": unsupported format version");
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string item_to_line(const IntrusionItem& item) {
  json j;
  j["item_id"] = item.item_id;
  j["doc_id"] = item.doc_id;
  j["model"] = item.model_name;
  j["shown_topics"] = item.shown_topics;
  j["intruder_pos"] = item.intruder_pos;
  j["top3"] = item.top3;
  j["is_control"] = item.is_control;
  j["snippet"] = item.snippet;
  j["full_text"] = item.full_text;
  j["topic_words"] = item.topic_words;
  j["low_tau"] = item.low_tau;
  j["high_rank"] = item.high_rank;
  j["relaxed"] = item.relaxed;
  return j.dump();
}

IntrusionItem item_from_line(std::string_view line) {
  const auto j = parse(line);
  IntrusionItem item;
  try {
    item.item_id = j.at("item_id").get<std::string>();
    item.doc_id = j.at("doc_id").get<std::string>();
    item.model_name = j.at("model").get<std::string>();
    item.shown_topics = j.at("shown_topics").get<std::array<TopicId, 4>>();
    item.intruder_pos = j.at("intruder_pos").get<int>();
    item.top3 = j.at("top3").get<std::array<TopicId, 3>>();
    item.is_control = j.at("is_control").get<bool>();
    item.snippet = j.value("snippet", "");
    item.full_text = j.value("full_text", "");
    item.topic_words = j.at("topic_words").get<std::array<std::vector<std::string>, 4>>();
    item.low_tau = j.value("low_tau", 0.0);
    item.high_rank = j.value("high_rank", 0);
    item.relaxed = j.value("relaxed", false);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed item record: ") + e.what());
  }
  if (item.intruder_pos < 0 || item.intruder_pos > 3)
    throw Error("item " + item.item_id + ": intruder_pos out of range");
  return item;
}

std::string annotation_to_line(const AnnotationRecord& rec) {
  json j;
  j["worker_id"] = rec.worker_id;
  j["item_id"] = rec.item_id;
  j["chosen_pos"] = rec.chosen_pos;
  j["timestamp"] = rec.timestamp;
  return j.dump();
}

AnnotationRecord annotation_from_line(std::string_view line) {
  const auto j = parse(line);
  AnnotationRecord rec;
  try {
    rec.worker_id = j.at("worker_id").get<std::string>();
    rec.item_id = j.at("item_id").get<std::string>();
    rec.chosen_pos = j.at("chosen_pos").get<int>();
    rec.timestamp = j.value("timestamp", std::int64_t{0});
  } catch (const json::exception& e) {
    throw Error(std::string("malformed annotation record: ") + e.what());
  }
  if (rec.chosen_pos < 0 || rec.chosen_pos > 3)
    throw Error("annotation for " + rec.item_id + ": chosen_pos out of range");
  return rec;
}

std::string rating_to_line(const RatingRecord& rec) {
  json j;
  j["worker_id"] = rec.worker_id;
  j["doc_id"] = rec.doc_id;
  j["model"] = rec.model_name;
  j["topic_id"] = rec.topic_id;
  j["rating"] = rec.rating;
  j["timestamp"] = rec.timestamp;
  return j.dump();
}

RatingRecord rating_from_line(std::string_view line) {
  const auto j = parse(line);
  RatingRecord rec;
  try {
    rec.worker_id = j.at("worker_id").get<std::string>();
    rec.doc_id = j.at("doc_id").get<std::string>();
    rec.model_name = j.at("model").get<std::string>();
    rec.topic_id = j.at("topic_id").get<TopicId>();
    rec.rating = j.at("rating").get<int>();
    rec.timestamp = j.value("timestamp", std::int64_t{0});
  } catch (const json::exception& e) {
    throw Error(std::string("malformed rating record: ") + e.what());
  }
  if (rec.rating < 0 || rec.rating > 3) throw Error("rating out of range 0-3");
  return rec;
}

void save_items(const std::filesystem::path& path, const std::vector<IntrusionItem>& items,
                std::string_view config_hash) {
  save_lines(path, "topeval.items", config_hash, items, item_to_line);
}

std::vector<IntrusionItem> load_items(const std::filesystem::path& path) {
  std::vector<IntrusionItem> out;
  for (const auto& line : read_record_lines(path, "topeval.items"))
    out.push_back(item_from_line(line));
  return out;
}

void save_hits(const std::filesystem::path& path, const std::vector<Hit>& hits,
               std::string_view config_hash) {
  save_lines(path, "topeval.hits", config_hash, hits, [](const Hit& h) {
    json j;
    j["hit_id"] = h.hit_id;
    j["items"] = h.item_ids;
    return j.dump();
  });
}

std::vector<Hit> load_hits(const std::filesystem::path& path) {
  std::vector<Hit> out;
  for (const auto& line : read_record_lines(path, "topeval.hits")) {
    const auto j = parse(line);
    out.push_back({j.at("hit_id").get<std::string>(), j.at("items").get<std::vector<std::string>>()});
  }
  return out;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<AnnotationRecord>& records, std::string_view config_hash) {
  save_lines(path, "topeval.annotations", config_hash, records, annotation_to_line);
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  for (const auto& line : read_record_lines(path, "topeval.annotations"))
    out.push_back(annotation_from_line(line));
  return out;
}

void save_ratings(const std::filesystem::path& path, const std::vector<RatingRecord>& records,
                  std::string_view config_hash) {
  save_lines(path, "topeval.ratings", config_hash, records, rating_to_line);
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
  std::vector<RatingRecord> out;
  for (const auto& line : read_record_lines(path, "topeval.ratings"))
    out.push_back(rating_from_line(line));
  return out;
}

}  // namespace topeval
