#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/intrusion.hpp"

namespace topeval {

// One direct-rating task: a document plus the top-1 topic of each model.
// Entries are presented by position only; the model behind an entry is
// never sent to the client.
struct RatingTask {
  std::string task_id;
  std::string doc_id;
  std::string snippet;
  std::string full_text;
  struct Entry {
    std::string model_name;
    TopicId topic_id = 0;
    std::vector<std::string> words;
  };
  std::vector<Entry> entries;
};

struct ServiceOptions {
  std::chrono::seconds lease{600};
  int max_annotators = 10;     // per item
  double qc_threshold = 0.6;   // live QC, same strict rule as quality_filter
  int qc_min_controls = 3;     // controls answered before live QC can fail a worker
  int repost_min_valid = 3;
  std::string config_hash;
};

enum class QcState { active, failed };

struct SubmitResult {
  bool accepted = false;
  std::string error;  // "unknown lease", "duplicate", "invalid position", ...
  QcState qc = QcState::active;
  int control_total = 0;
  int control_correct = 0;
};

// In-process annotation state machine behind the HTTP endpoints. All
// mutations are serialized through one mutex; every accepted record is
// appended and flushed to the log before the call returns, and the log is
// replayed on construction.
class AnnotationService {
 public:
  using Clock = std::function<std::int64_t()>;  // seconds

  AnnotationService(std::vector<IntrusionItem> items, std::vector<Hit> hits,
                    std::vector<RatingTask> rating_tasks, std::filesystem::path log_path,
                    ServiceOptions options = {}, Clock clock = {});

  // Payload JSON (as text) of the worker's hit, {"status":"done"} when none
  // remain, {"status":"blocked"} after failing QC.
  std::string assign_hit(std::string_view worker_id);
  std::string assign_rating(std::string_view worker_id);

  SubmitResult submit_annotation(std::string_view worker_id, std::string_view item_id,
                                 int chosen_pos);
  SubmitResult submit_rating(std::string_view worker_id, std::string_view task_id,
                             int entry, int rating);

  struct Snapshot {
    std::vector<AnnotationRecord> annotations;
    std::vector<RatingRecord> ratings;
  };
  Snapshot snapshot() const;

  // Export file contents (header + records), byte-stable for a given state.
  std::string export_annotations() const;
  std::string export_ratings() const;
  void export_to(const std::filesystem::path& dir) const;

  // Items whose annotations from workers not currently failing QC number
  // fewer than repost_min_valid.
  std::vector<std::string> repost_queue() const;

  std::optional<QcState> qc_state(std::string_view worker_id) const;

 private:
  struct Session {
    std::set<std::string> served_hits;
    std::set<std::string> completed_items;
    std::optional<std::string> lease_hit;
    std::int64_t lease_expiry = 0;
    std::set<std::string> rated_tasks;
    int control_total = 0;
    int control_correct = 0;
    QcState qc = QcState::active;
  };

  std::int64_t now() const;
  Session& session(std::string_view worker_id);
  void apply_annotation(const AnnotationRecord& rec);
  void apply_rating(const RatingRecord& rec, std::string_view task_id);
  void update_qc(Session& s) const;
  void append_log(const std::string& line);
  int hit_load(const std::string& hit_id) const;
  void replay_log();

  std::vector<IntrusionItem> items_;
  std::map<std::string, std::size_t, std::less<>> item_pos_;
  std::vector<Hit> hits_;
  std::map<std::string, std::size_t, std::less<>> hit_of_item_;
  std::vector<RatingTask> rating_tasks_;
  std::filesystem::path log_path_;
  ServiceOptions options_;
  Clock clock_;

  mutable std::mutex mu_;
  std::map<std::string, Session, std::less<>> sessions_;
  std::map<std::string, int, std::less<>> item_annotators_;
  std::vector<AnnotationRecord> annotations_;
  std::vector<RatingRecord> ratings_;
  std::unique_ptr<std::ofstream> log_;
};

// Item records -> rating tasks: task per document listing each model's top-1
// topic words.
std::vector<RatingTask> make_rating_tasks(
    const std::vector<std::string>& doc_ids, const std::vector<Document>& docs,
    const std::vector<const TopicModelArtifact*>& models, const Vocabulary& vocab);

void save_rating_tasks(const std::filesystem::path& path, const std::vector<RatingTask>& tasks,
                       std::string_view config_hash);
std::vector<RatingTask> load_rating_tasks(const std::filesystem::path& path);

// HTTP front end. Endpoints: GET /hit?worker=W[&mode=rating], POST /annotation,
// POST /rating, GET /export?kind=annotations|ratings, GET /repost-queue.
// Static files are served from ui_dir when it is set.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationService& service, std::filesystem::path ui_dir = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound
  // port. Serving runs on a background thread until stop().
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks the calling thread serving requests.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topeval
