#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "support.hpp"
#include "topeval/annsvc.hpp"
#include "topeval/records.hpp"

using namespace topeval;
using json = nlohmann::json;

namespace {

struct World {
  std::vector<IntrusionItem> items;
  std::vector<Hit> hits;
  std::vector<RatingTask> tasks;
};

// Two hits, each of four model items plus one control.
World small_world(int n_hits = 2) {
  World w;
  for (int h = 0; h < n_hits; ++h) {
    Hit hit{"hit" + std::to_string(h), {}};
    for (int i = 0; i < 4; ++i) {
      const auto doc = "d" + std::to_string(h * 4 + i);
      w.items.push_back(test::make_item("m:" + doc, doc, "m", {0, 1, 2, 3}, (h + i) % 4));
      hit.item_ids.push_back(w.items.back().item_id);
    }
    const auto cid = "control:" + std::to_string(h);
    w.items.push_back(test::make_item(cid, "c" + std::to_string(h), "m", {0, kControlTopic, 1, 2}, 1, true));
    hit.item_ids.insert(hit.item_ids.begin() + (h % 5), cid);
    w.hits.push_back(hit);
  }
  RatingTask t{"rate:d0", "d0", "snip", "full", {{"a", 3, {"x", "y"}}, {"b", 1, {"p", "q"}}}};
  w.tasks.push_back(t);
  return w;
}

const IntrusionItem& item_of(const World& w, const std::string& id) {
  return *std::find_if(w.items.begin(), w.items.end(), [&](const auto& i) { return i.item_id == id; });
}

struct FakeClock {
  std::int64_t t = 1000;
  AnnotationService::Clock fn() {
    return [this] { return t; };
  }
};

}  // namespace

TEST(AnnotationService, PayloadHidesTheAnswer) {
  test::TempDir dir;
  const auto w = small_world();
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  const auto j = json::parse(svc.assign_hit("alice"));
  EXPECT_EQ(j.at("status"), "ok");
  ASSERT_EQ(j.at("items").size(), 5u);
  for (const auto& it : j.at("items")) {
    EXPECT_FALSE(it.contains("intruder_pos"));
    EXPECT_FALSE(it.contains("is_control"));
    EXPECT_FALSE(it.contains("model_name"));
    EXPECT_EQ(it.at("topics").size(), 4u);
  }
  const auto r = json::parse(svc.assign_rating("alice"));
  for (const auto& e : r.at("entries")) {
    EXPECT_FALSE(e.contains("model"));
    EXPECT_FALSE(e.contains("model_name"));
  }
}

TEST(AnnotationService, HitsNotRepeatedThenDone) {
  test::TempDir dir;
  const auto w = small_world();
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  std::set<std::string> seen;
  for (int round = 0; round < 2; ++round) {
    const auto j = json::parse(svc.assign_hit("alice"));
    ASSERT_EQ(j.at("status"), "ok");
    EXPECT_TRUE(seen.insert(j.at("hit_id")).second);
    // Asking again before finishing returns the same lease.
    EXPECT_EQ(json::parse(svc.assign_hit("alice")).at("hit_id"), j.at("hit_id"));
    for (const auto& it : j.at("items")) {
      const auto& item = item_of(w, it.at("item_id"));
      EXPECT_TRUE(svc.submit_annotation("alice", item.item_id, item.intruder_pos).accepted);
    }
  }
  EXPECT_EQ(json::parse(svc.assign_hit("alice")).at("status"), "done");
  EXPECT_EQ(svc.snapshot().annotations.size(), 10u);
}

TEST(AnnotationService, RejectsBadSubmissions) {
  test::TempDir dir;
  const auto w = small_world();
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  const auto j = json::parse(svc.assign_hit("alice"));
  const std::string first = j.at("items")[0].at("item_id");
  EXPECT_EQ(svc.submit_annotation("alice", first, 4).error, "invalid position");
  EXPECT_EQ(svc.submit_annotation("alice", "nope", 0).error, "unknown item");
  EXPECT_EQ(svc.submit_annotation("bob", first, 0).error, "unknown lease");
  const std::string other_hit_item = j.at("hit_id") == "hit0" ? "m:d4" : "m:d0";
  EXPECT_EQ(svc.submit_annotation("alice", other_hit_item, 0).error, "unknown lease");
  EXPECT_TRUE(svc.submit_annotation("alice", first, 0).accepted);
  EXPECT_EQ(svc.submit_annotation("alice", first, 1).error, "duplicate");
  EXPECT_EQ(svc.snapshot().annotations.size(), 1u);
}

TEST(AnnotationService, LeasesExpire) {
  test::TempDir dir;
  const auto w = small_world(1);
  FakeClock clock;
  ServiceOptions o;
  o.lease = std::chrono::seconds(60);
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl", o, clock.fn());
  const auto j = json::parse(svc.assign_hit("alice"));
  EXPECT_EQ(j.at("lease_expires"), 1060);
  clock.t = 1061;
  EXPECT_EQ(svc.submit_annotation("alice", j.at("items")[0].at("item_id").get<std::string>(), 0).error, "unknown lease");
}

TEST(AnnotationService, ItemCapacityIsEnforced) {
  test::TempDir dir;
  const auto w = small_world(1);
  ServiceOptions o;
  o.max_annotators = 2;
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl", o);
  EXPECT_EQ(json::parse(svc.assign_hit("a")).at("status"), "ok");
  EXPECT_EQ(json::parse(svc.assign_hit("b")).at("status"), "ok");
  EXPECT_EQ(json::parse(svc.assign_hit("c")).at("status"), "done");
}

TEST(AnnotationService, LiveQualityControlBlocksWorkers) {
  test::TempDir dir;
  const auto w = small_world(4);
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  // Worker answers content items right and every control wrong.
  SubmitResult last;
  for (int h = 0; h < 3; ++h) {
    const auto j = json::parse(svc.assign_hit("lazy"));
    ASSERT_EQ(j.at("status"), "ok");
    for (const auto& it : j.at("items")) {
      const auto& item = item_of(w, it.at("item_id"));
      last = svc.submit_annotation("lazy", item.item_id, item.is_control ? (item.intruder_pos + 1) % 4 : 0);
      ASSERT_TRUE(last.accepted) << last.error;
    }
  }
  EXPECT_EQ(last.control_total, 3);
  EXPECT_EQ(last.control_correct, 0);
  EXPECT_EQ(last.qc, QcState::failed);
  EXPECT_EQ(json::parse(svc.assign_hit("lazy")).at("status"), "blocked");
  EXPECT_EQ(svc.qc_state("lazy"), QcState::failed);
  EXPECT_FALSE(svc.qc_state("stranger"));
  // Annotations of failed workers do not count towards coverage.
  EXPECT_EQ(svc.repost_queue().size(), 16u);
}

TEST(AnnotationService, ControlAccuracyCountsOnlyControls) {
  test::TempDir dir;
  const auto w = small_world(1);
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  const auto j = json::parse(svc.assign_hit("a"));
  SubmitResult r;
  for (const auto& it : j.at("items")) {
    const auto& item = item_of(w, it.at("item_id"));
    r = svc.submit_annotation("a", item.item_id, item.intruder_pos);
  }
  EXPECT_EQ(r.control_total, 1);
  EXPECT_EQ(r.control_correct, 1);
  EXPECT_EQ(r.qc, QcState::active);  // too few controls to judge yet
}

TEST(AnnotationService, RatingsByEntryIndex) {
  test::TempDir dir;
  const auto w = small_world(1);
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  EXPECT_EQ(svc.submit_rating("a", "rate:d0", 0, 4).error, "invalid rating");
  EXPECT_EQ(svc.submit_rating("a", "rate:d0", 2, 1).error, "invalid entry");
  EXPECT_EQ(svc.submit_rating("a", "rate:zz", 0, 1).error, "unknown task");
  EXPECT_TRUE(svc.submit_rating("a", "rate:d0", 1, 0).accepted);
  EXPECT_EQ(svc.submit_rating("a", "rate:d0", 1, 2).error, "duplicate");
  const auto j = json::parse(svc.assign_rating("a"));
  ASSERT_EQ(j.at("entries").size(), 1u);
  EXPECT_EQ(j.at("entries")[0].at("entry"), 0);
  EXPECT_TRUE(svc.submit_rating("a", "rate:d0", 0, 3).accepted);
  EXPECT_EQ(json::parse(svc.assign_rating("a")).at("status"), "done");
  const auto ratings = svc.snapshot().ratings;
  ASSERT_EQ(ratings.size(), 2u);
  EXPECT_EQ(ratings[0].model_name, "b");
  EXPECT_EQ(ratings[0].topic_id, 1);
  EXPECT_EQ(ratings[0].rating, 0);
  EXPECT_EQ(ratings[1].model_name, "a");
}

TEST(AnnotationService, LogReplayRestoresState) {
  test::TempDir dir;
  const auto w = small_world();
  std::string exported;
  {
    AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
    const auto j = json::parse(svc.assign_hit("a"));
    for (const auto& it : j.at("items")) svc.submit_annotation("a", it.at("item_id").get<std::string>(), 2);
    svc.submit_rating("a", "rate:d0", 0, 3);
    exported = svc.export_annotations();
  }
  AnnotationService again(w.items, w.hits, w.tasks, dir / "log.jsonl");
  EXPECT_EQ(again.export_annotations(), exported);
  EXPECT_EQ(again.snapshot().ratings.size(), 1u);
  EXPECT_EQ(again.submit_rating("a", "rate:d0", 0, 1).error, "duplicate");
  // The finished hit is not handed out again.
  const auto j = json::parse(again.assign_hit("a"));
  ASSERT_EQ(j.at("status"), "ok");
  for (const auto& it : j.at("items"))
    EXPECT_EQ(exported.find("\"" + it.at("item_id").get<std::string>() + "\""), std::string::npos);
}

TEST(AnnotationService, EmptyExportHasHeaders) {
  test::TempDir dir;
  const auto w = small_world(1);
  ServiceOptions o;
  o.config_hash = "h1";
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl", o);
  EXPECT_EQ(svc.export_annotations(), header_line("topeval.annotations", "h1"));
  EXPECT_EQ(svc.export_ratings(), header_line("topeval.ratings", "h1"));
  svc.export_to(dir.path());
  EXPECT_TRUE(load_annotations(dir / "annotations.jsonl").empty());
  EXPECT_TRUE(load_ratings(dir / "ratings.jsonl").empty());
}

TEST(AnnotationService, ExportedRecordsScoreLikeMemory) {
  test::TempDir dir;
  const auto w = small_world(3);
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl");
  for (int k = 0; k < 4; ++k) {
    const auto worker = "w" + std::to_string(k);
    for (auto j = json::parse(svc.assign_hit(worker)); j.at("status") == "ok"; j = json::parse(svc.assign_hit(worker)))
      for (const auto& it : j.at("items")) {
        const auto& item = item_of(w, it.at("item_id"));
        svc.submit_annotation(worker, item.item_id, (k + item.item_id.size()) % 2 ? item.intruder_pos : 0);
      }
  }
  svc.export_to(dir.path());
  const auto mem = model_precision(svc.snapshot().annotations, w.items);
  const auto disk = model_precision(load_annotations(dir / "annotations.jsonl"), w.items);
  EXPECT_EQ(mem.models[0].mean_precision, disk.models[0].mean_precision);
  EXPECT_EQ(load_annotations(dir / "annotations.jsonl"), svc.snapshot().annotations);
}

TEST(AnnotationService, ConcurrentSubmitsDuringExport) {
  test::TempDir dir;
  const auto w = small_world(5);
  ServiceOptions o;
  o.max_annotators = 20;
  AnnotationService svc(w.items, w.hits, w.tasks, dir / "log.jsonl", o);
  std::atomic<bool> stop{false};
  std::thread exporter([&] {
    while (!stop) {
      const auto text = svc.export_annotations();
      ASSERT_EQ(text.back(), '\n');
    }
  });
  std::vector<std::thread> workers;
  for (int k = 0; k < 4; ++k)
    workers.emplace_back([&, k] {
      const auto worker = "w" + std::to_string(k);
      for (auto j = json::parse(svc.assign_hit(worker)); j.at("status") == "ok"; j = json::parse(svc.assign_hit(worker)))
        for (const auto& it : j.at("items")) svc.submit_annotation(worker, it.at("item_id").get<std::string>(), 1);
    });
  for (auto& t : workers) t.join();
  stop = true;
  exporter.join();
  EXPECT_EQ(svc.snapshot().annotations.size(), 4u * 25u);
  const auto lines = read_record_lines(dir / "log.jsonl", "topeval.annsvc-log");
  EXPECT_EQ(lines.size(), 100u);
}

TEST(AnnotationService, HitsNeedExactlyOneControl) {
  test::TempDir dir;
  auto w = small_world(1);
  w.hits[0].item_ids.erase(std::find(w.hits[0].item_ids.begin(), w.hits[0].item_ids.end(), "control:0"));
  EXPECT_THROW(AnnotationService(w.items, w.hits, w.tasks, dir / "log.jsonl"), Error);
}

TEST(RatingTasks, OneEntryPerModelRoundTrip) {
  test::TempDir dir;
  auto docs = test::docs_from({"a b c d e f g h i j k l", "a b c"});
  const auto vocab = make_vocabulary(docs);
  auto m1 = test::dirichlet_model(4, vocab.size(), 2, 0.5, 1, "one");
  auto m2 = test::dirichlet_model(4, vocab.size(), 2, 0.5, 2, "two");
  const auto tasks = make_rating_tasks({"d0", "d1"}, docs, {&m1, &m2}, vocab);
  ASSERT_EQ(tasks.size(), 2u);
  for (const auto& t : tasks) {
    std::set<std::string> names;
    for (const auto& e : t.entries) {
      names.insert(e.model_name);
      const auto* m = e.model_name == "one" ? &m1 : &m2;
      EXPECT_EQ(e.topic_id, m->allocation(t.doc_id)->ranked().front());
      EXPECT_EQ(e.words.size(), 10u);
    }
    EXPECT_EQ(names, (std::set<std::string>{"one", "two"}));
  }
  save_rating_tasks(dir / "t.jsonl", tasks, "h");
  const auto back = load_rating_tasks(dir / "t.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].entries[1].words, tasks[1].entries[1].words);
  EXPECT_EQ(back[0].full_text, tasks[0].full_text);
}

class AnnotationHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    world_ = small_world();
    svc_ = std::make_unique<AnnotationService>(world_.items, world_.hits, world_.tasks, dir_ / "log.jsonl");
    server_ = std::make_unique<AnnotationServer>(*svc_);
    port_ = server_->start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  test::TempDir dir_;
  World world_;
  std::unique_ptr<AnnotationService> svc_;
  std::unique_ptr<AnnotationServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(AnnotationHttp, CardPositionIsTransmittedZeroBased) {
  auto res = client_->Get("/hit?worker=ui");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto hit = json::parse(res->body);
  const std::string item = hit.at("items")[0].at("item_id");
  // The third card on screen is position 2.
  res = post("/annotation", {{"worker_id", "ui"}, {"item_id", item}, {"chosen_pos", 2}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).at("accepted"), true);
  EXPECT_EQ(svc_->snapshot().annotations.at(0).chosen_pos, 2);
}

TEST_F(AnnotationHttp, RetriedSubmissionIsStoredOnce) {
  const auto hit = json::parse(client_->Get("/hit?worker=flaky")->body);
  const std::string item = hit.at("items")[1].at("item_id");
  const json body = {{"worker_id", "flaky"}, {"item_id", item}, {"chosen_pos", 0}};
  int accepted = 0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    const auto res = post("/annotation", body);
    ASSERT_TRUE(res);
    const auto j = json::parse(res->body);
    if (j.at("accepted")) ++accepted;
    else EXPECT_EQ(j.at("error"), "duplicate");
  }
  EXPECT_EQ(accepted, 1);
  EXPECT_EQ(read_record_lines(dir_ / "log.jsonl", "topeval.annsvc-log").size(), 1u);
}

TEST_F(AnnotationHttp, RatingZeroIsAccepted) {
  const auto task = json::parse(client_->Get("/hit?worker=r&mode=rating")->body);
  EXPECT_EQ(task.at("status"), "ok");
  const auto res = post("/rating", {{"worker_id", "r"}, {"task_id", task.at("task_id")}, {"entry", 0}, {"rating", 0}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(svc_->snapshot().ratings.at(0).rating, 0);
}

TEST_F(AnnotationHttp, ErrorsAndExports) {
  EXPECT_EQ(client_->Get("/hit")->status, 400);
  EXPECT_EQ(client_->Post("/annotation", "{not json", "application/json")->status, 400);
  EXPECT_EQ(post("/annotation", {{"worker_id", "x"}, {"item_id", "m:d0"}, {"chosen_pos", 0}})->status, 409);
  const auto exp = client_->Get("/export?kind=annotations");
  ASSERT_TRUE(exp);
  EXPECT_EQ(exp->body, svc_->export_annotations());
  EXPECT_EQ(client_->Get("/export?kind=other")->status, 400);
  const auto q = json::parse(client_->Get("/repost-queue")->body);
  EXPECT_EQ(q.at("items").size(), 8u);
}
