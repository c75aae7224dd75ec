#include "topeval/annsvc.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "topeval/hash.hpp"
#include "topeval/records.hpp"

namespace topeval {
namespace {

using json = nlohmann::json;
constexpr std::string_view kLogFormat = "topeval.annsvc-log";

std::string rating_key(std::string_view task, int entry) {
  return std::string(task) + "#" + std::to_string(entry);
}

}  // namespace

AnnotationService::AnnotationService(std::vector<IntrusionItem> items, std::vector<Hit> hits,
                                     std::vector<RatingTask> rating_tasks,
                                     std::filesystem::path log_path, ServiceOptions options,
                                     Clock clock)
    : items_(std::move(items)), hits_(std::move(hits)), rating_tasks_(std::move(rating_tasks)),
      log_path_(std::move(log_path)), options_(std::move(options)), clock_(std::move(clock)) {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (!item_pos_.emplace(items_[i].item_id, i).second)
      throw Error("annotation service: duplicate item " + items_[i].item_id);
  for (std::size_t h = 0; h < hits_.size(); ++h) {
    int controls = 0;
    for (const auto& id : hits_[h].item_ids) {
      auto it = item_pos_.find(id);
      if (it == item_pos_.end()) throw Error("hit " + hits_[h].hit_id + " references unknown item " + id);
      if (items_[it->second].is_control) ++controls;
      hit_of_item_.emplace(id, h);
    }
    if (controls != 1) throw Error("hit " + hits_[h].hit_id + " must contain exactly one control item");
  }
  replay_log();
  const bool fresh = !std::filesystem::exists(log_path_) || std::filesystem::file_size(log_path_) == 0;
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_ = std::make_unique<std::ofstream>(log_path_, std::ios::app | std::ios::binary);
  if (!*log_) throw Error("cannot open annotation log " + log_path_.string());
  if (fresh) {
    *log_ << header_line(kLogFormat, options_.config_hash);
    log_->flush();
  }
}

std::int64_t AnnotationService::now() const {
  if (clock_) return clock_();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

AnnotationService::Session& AnnotationService::session(std::string_view worker_id) {
  auto it = sessions_.find(worker_id);
  if (it == sessions_.end()) it = sessions_.emplace(std::string(worker_id), Session{}).first;
  return it->second;
}

void AnnotationService::update_qc(Session& s) const {
  if (s.control_total >= options_.qc_min_controls &&
      !(static_cast<double>(s.control_correct) / s.control_total > options_.qc_threshold))
    s.qc = QcState::failed;
}

void AnnotationService::apply_annotation(const AnnotationRecord& rec) {
  auto& s = session(rec.worker_id);
  const auto& item = items_[item_pos_.at(rec.item_id)];
  s.completed_items.insert(rec.item_id);
  if (auto h = hit_of_item_.find(rec.item_id); h != hit_of_item_.end())
    s.served_hits.insert(hits_[h->second].hit_id);
  ++item_annotators_[rec.item_id];
  if (item.is_control) {
    ++s.control_total;
    if (rec.chosen_pos == item.intruder_pos) ++s.control_correct;
    update_qc(s);
  }
  annotations_.push_back(rec);
}

void AnnotationService::apply_rating(const RatingRecord& rec, std::string_view task_id) {
  ratings_.push_back(rec);
  (void)task_id;
}

void AnnotationService::append_log(const std::string& line) {
  *log_ << line << '\n';
  log_->flush();
  if (!*log_) throw Error("annotation log write failed");
}

void AnnotationService::replay_log() {
  if (!std::filesystem::exists(log_path_) || std::filesystem::file_size(log_path_) == 0) return;
  for (const auto& line : read_record_lines(log_path_, kLogFormat)) {
    const auto j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "annotation") {
      auto rec = annotation_from_line(j.at("record").dump());
      if (!item_pos_.contains(rec.item_id)) throw Error("annotation log references unknown item " + rec.item_id);
      apply_annotation(rec);
    } else if (type == "rating") {
      auto rec = rating_from_line(j.at("record").dump());
      const auto task = j.at("task_id").get<std::string>();
      session(rec.worker_id).rated_tasks.insert(rating_key(task, j.at("entry").get<int>()));
      apply_rating(rec, task);
    }
  }
}

int AnnotationService::hit_load(const std::string& hit_id) const {
  int load = 0;
  for (const auto& [worker, s] : sessions_) {
    const bool leased = s.lease_hit && *s.lease_hit == hit_id && s.lease_expiry > now();
    if (leased || s.served_hits.contains(hit_id)) ++load;
  }
  return load;
}

std::string AnnotationService::assign_hit(std::string_view worker_id) {
  std::lock_guard lock(mu_);
  auto& s = session(worker_id);
  if (s.qc == QcState::failed) return json{{"status", "blocked"}}.dump();
  const auto t = now();

  auto payload = [&](const Hit& hit) {
    json items = json::array();
    for (const auto& id : hit.item_ids) {
      if (s.completed_items.contains(id)) continue;
      const auto& item = items_[item_pos_.at(id)];
      items.push_back({{"item_id", item.item_id},
                       {"snippet", item.snippet},
                       {"full_text", item.full_text},
                       {"topics", item.topic_words}});
    }
    return json{{"status", "ok"},
                {"hit_id", hit.hit_id},
                {"lease_expires", s.lease_expiry},
                {"items", std::move(items)}}
        .dump();
  };
  auto remaining = [&](const Hit& hit) {
    return std::any_of(hit.item_ids.begin(), hit.item_ids.end(),
                       [&](const std::string& id) { return !s.completed_items.contains(id); });
  };

  if (s.lease_hit) {
    auto hit = std::find_if(hits_.begin(), hits_.end(),
                            [&](const Hit& h) { return h.hit_id == *s.lease_hit; });
    if (s.lease_expiry > t && remaining(*hit)) return payload(*hit);
    s.lease_hit.reset();
  }

  const Hit* best = nullptr;
  int best_load = 0;
  for (const auto& hit : hits_) {
    if (s.served_hits.contains(hit.hit_id)) continue;
    if (std::any_of(hit.item_ids.begin(), hit.item_ids.end(),
                    [&](const std::string& id) { return s.completed_items.contains(id); }))
      continue;
    const int load = hit_load(hit.hit_id);
    if (load >= options_.max_annotators) continue;
    if (!best || load < best_load) {
      best = &hit;
      best_load = load;
    }
  }
  if (!best) return json{{"status", "done"}}.dump();
  s.lease_hit = best->hit_id;
  s.lease_expiry = t + options_.lease.count();
  return payload(*best);
}

SubmitResult AnnotationService::submit_annotation(std::string_view worker_id,
                                                  std::string_view item_id, int chosen_pos) {
  std::lock_guard lock(mu_);
  auto& s = session(worker_id);
  SubmitResult r;
  auto fill = [&] {
    r.qc = s.qc;
    r.control_total = s.control_total;
    r.control_correct = s.control_correct;
    return r;
  };
  if (chosen_pos < 0 || chosen_pos > 3) {
    r.error = "invalid position";
    return fill();
  }
  auto pos = item_pos_.find(item_id);
  if (pos == item_pos_.end()) {
    r.error = "unknown item";
    return fill();
  }
  if (s.completed_items.contains(pos->first)) {
    r.error = "duplicate";
    return fill();
  }
  const auto h = hit_of_item_.find(item_id);
  if (h == hit_of_item_.end() || !s.lease_hit || *s.lease_hit != hits_[h->second].hit_id ||
      s.lease_expiry <= now()) {
    r.error = "unknown lease";
    return fill();
  }
  if (item_annotators_[pos->first] >= options_.max_annotators) {
    r.error = "item full";
    return fill();
  }
  AnnotationRecord rec{std::string(worker_id), pos->first, chosen_pos, now()};
  append_log(json{{"type", "annotation"}, {"record", json::parse(annotation_to_line(rec))}}.dump());
  apply_annotation(rec);
  const auto& hit = hits_[h->second];
  if (std::all_of(hit.item_ids.begin(), hit.item_ids.end(),
                  [&](const std::string& id) { return s.completed_items.contains(id); }))
    s.lease_hit.reset();
  r.accepted = true;
  return fill();
}

std::string AnnotationService::assign_rating(std::string_view worker_id) {
  std::lock_guard lock(mu_);
  auto& s = session(worker_id);
  if (s.qc == QcState::failed) return json{{"status", "blocked"}}.dump();
  for (const auto& task : rating_tasks_) {
    json entries = json::array();
    for (std::size_t e = 0; e < task.entries.size(); ++e)
      if (!s.rated_tasks.contains(rating_key(task.task_id, static_cast<int>(e))))
        entries.push_back({{"entry", e}, {"words", task.entries[e].words}});
    if (entries.empty()) continue;
    return json{{"status", "ok"},
                {"task_id", task.task_id},
                {"snippet", task.snippet},
                {"full_text", task.full_text},
                {"entries", std::move(entries)}}
        .dump();
  }
  return json{{"status", "done"}}.dump();
}

SubmitResult AnnotationService::submit_rating(std::string_view worker_id, std::string_view task_id,
                                              int entry, int rating) {
  std::lock_guard lock(mu_);
  auto& s = session(worker_id);
  SubmitResult r;
  r.qc = s.qc;
  r.control_total = s.control_total;
  r.control_correct = s.control_correct;
  auto task = std::find_if(rating_tasks_.begin(), rating_tasks_.end(),
                           [&](const RatingTask& t) { return t.task_id == task_id; });
  if (task == rating_tasks_.end()) {
    r.error = "unknown task";
    return r;
  }
  if (entry < 0 || static_cast<std::size_t>(entry) >= task->entries.size()) {
    r.error = "invalid entry";
    return r;
  }
  if (rating < 0 || rating > 3) {
    r.error = "invalid rating";
    return r;
  }
  if (s.qc == QcState::failed) {
    r.error = "blocked";
    return r;
  }
  const auto key = rating_key(task_id, entry);
  if (s.rated_tasks.contains(key)) {
    r.error = "duplicate";
    return r;
  }
  const auto& e = task->entries[static_cast<std::size_t>(entry)];
  RatingRecord rec{std::string(worker_id), task->doc_id, e.model_name, e.topic_id, rating, now()};
  append_log(json{{"type", "rating"},
                  {"task_id", task->task_id},
                  {"entry", entry},
                  {"record", json::parse(rating_to_line(rec))}}
                 .dump());
  s.rated_tasks.insert(key);
  apply_rating(rec, task_id);
  r.accepted = true;
  return r;
}

AnnotationService::Snapshot AnnotationService::snapshot() const {
  std::lock_guard lock(mu_);
  return {annotations_, ratings_};
}

std::string AnnotationService::export_annotations() const {
  const auto snap = snapshot();
  std::string out = header_line("topeval.annotations", options_.config_hash);
  for (const auto& a : snap.annotations) out += annotation_to_line(a) + "\n";
  return out;
}

std::string AnnotationService::export_ratings() const {
  const auto snap = snapshot();
  std::string out = header_line("topeval.ratings", options_.config_hash);
  for (const auto& r : snap.ratings) out += rating_to_line(r) + "\n";
  return out;
}

void AnnotationService::export_to(const std::filesystem::path& dir) const {
  const auto snap = snapshot();
  save_annotations(dir / "annotations.jsonl", snap.annotations, options_.config_hash);
  save_ratings(dir / "ratings.jsonl", snap.ratings, options_.config_hash);
}

std::vector<std::string> AnnotationService::repost_queue() const {
  std::lock_guard lock(mu_);
  std::map<std::string, int, std::less<>> valid;
  for (const auto& a : annotations_) {
    auto s = sessions_.find(a.worker_id);
    if (s != sessions_.end() && s->second.qc == QcState::failed) continue;
    ++valid[a.item_id];
  }
  std::vector<std::string> out;
  for (const auto& item : items_) {
    if (item.is_control) continue;
    auto it = valid.find(item.item_id);
    if ((it == valid.end() ? 0 : it->second) < options_.repost_min_valid) out.push_back(item.item_id);
  }
  return out;
}

std::optional<QcState> AnnotationService::qc_state(std::string_view worker_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(worker_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.qc;
}

std::vector<RatingTask> make_rating_tasks(const std::vector<std::string>& doc_ids,
                                          const std::vector<Document>& docs,
                                          const std::vector<const TopicModelArtifact*>& models,
                                          const Vocabulary& vocab) {
  std::vector<RatingTask> out;
  for (const auto& id : doc_ids) {
    auto doc = std::find_if(docs.begin(), docs.end(), [&](const Document& d) { return d.id == id; });
    if (doc == docs.end()) throw Error("rating task: unknown document " + id);
    RatingTask task;
    task.task_id = "rate:" + id;
    task.doc_id = id;
    task.snippet = doc->snippet;
    task.full_text = doc->raw_text;
    for (const auto* m : models) {
      const auto* alloc = m->allocation(id);
      if (!alloc) continue;
      RatingTask::Entry e;
      e.model_name = m->name;
      e.topic_id = alloc->ranked().front();
      for (TypeId w : m->topics[static_cast<std::size_t>(e.topic_id)].top_words(10))
        e.words.push_back(vocab.types[static_cast<std::size_t>(w)]);
      task.entries.push_back(std::move(e));
    }
    std::mt19937_64 rng(derive_seed(0, id, "rating-order"));
    std::shuffle(task.entries.begin(), task.entries.end(), rng);
    out.push_back(std::move(task));
  }
  return out;
}

void save_rating_tasks(const std::filesystem::path& path, const std::vector<RatingTask>& tasks,
                       std::string_view config_hash) {
  std::string out = header_line("topeval.rating-tasks", config_hash);
  for (const auto& t : tasks) {
    json entries = json::array();
    for (const auto& e : t.entries)
      entries.push_back({{"model", e.model_name}, {"topic", e.topic_id}, {"words", e.words}});
    out += json{{"task_id", t.task_id},
                {"doc_id", t.doc_id},
                {"snippet", t.snippet},
                {"full_text", t.full_text},
                {"entries", std::move(entries)}}
               .dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<RatingTask> load_rating_tasks(const std::filesystem::path& path) {
  std::vector<RatingTask> out;
  for (const auto& line : read_record_lines(path, "topeval.rating-tasks")) {
    try {
      const auto j = json::parse(line);
      RatingTask t;
      t.task_id = j.at("task_id").get<std::string>();
      t.doc_id = j.at("doc_id").get<std::string>();
      t.snippet = j.at("snippet").get<std::string>();
      t.full_text = j.at("full_text").get<std::string>();
      for (const auto& e : j.at("entries"))
        t.entries.push_back({e.at("model").get<std::string>(), e.at("topic").get<TopicId>(),
                             e.at("words").get<std::vector<std::string>>()});
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw Error(path.string() + ": malformed rating task: " + e.what());
    }
  }
  return out;
}

// ---- HTTP ----------------------------------------------------------------

struct AnnotationServer::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}
  AnnotationService& service;
  httplib::Server server;
  std::thread thread;
};

namespace {

json submit_json(const SubmitResult& r) {
  return {{"accepted", r.accepted},
          {"error", r.error},
          {"qc_state", r.qc == QcState::active ? "active" : "failed"}};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationService& service, std::filesystem::path ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  auto& svc = impl_->service;

  svr.Get("/hit", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto worker = req.get_param_value("worker");
    if (worker.empty()) return reply(res, 400, {{"error", "missing worker"}});
    const bool rating = req.get_param_value("mode") == "rating";
    res.set_content(rating ? svc.assign_rating(worker) : svc.assign_hit(worker), "application/json");
  });

  svr.Post("/annotation", [&svc](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
      const auto r = svc.submit_annotation(body.at("worker_id").get<std::string>(),
                                           body.at("item_id").get<std::string>(),
                                           body.at("chosen_pos").get<int>());
      reply(res, r.accepted ? 200 : 409, submit_json(r));
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  });

  svr.Post("/rating", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = json::parse(req.body);
      const auto r = svc.submit_rating(body.at("worker_id").get<std::string>(),
                                       body.at("task_id").get<std::string>(),
                                       body.at("entry").get<int>(), body.at("rating").get<int>());
      reply(res, r.accepted ? 200 : 409, submit_json(r));
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  });

  svr.Get("/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto kind = req.has_param("kind") ? req.get_param_value("kind") : "annotations";
    if (kind == "annotations")
      res.set_content(svc.export_annotations(), "application/x-ndjson");
    else if (kind == "ratings")
      res.set_content(svc.export_ratings(), "application/x-ndjson");
    else
      reply(res, 400, {{"error", "kind must be annotations or ratings"}});
  });

  svr.Get("/repost-queue", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"items", svc.repost_queue()}});
  });

  if (!ui_dir.empty()) svr.set_mount_point("/", ui_dir.string());
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool AnnotationServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace topeval
