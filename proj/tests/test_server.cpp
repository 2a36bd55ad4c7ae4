#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "subsetvis/server.hpp"
#include "subsetvis/synthetic.hpp"

#include "httplib.h"

using namespace subsetvis;
using namespace subsetvis::server;
using nlohmann::json;

namespace {

const json kQuickTrain{{"max_epochs", 100}, {"seed", 2}};
const json kQuickTsne{{"iterations", 250}, {"seed", 2}};

class ServiceTest : public ::testing::Test {
 protected:
  Response call(const std::string& method, const std::string& path, const json& body = nullptr,
                const std::string& token = {}) {
    return service.handle({method, path, body.is_null() ? "" : body.dump(), token});
  }

  // Uploads a synthetic dataset and opens a session on it.
  std::string open_session(std::size_t records = 2000) {
    const auto t = make_crime_like(records, 4);
    const auto d = call("POST", "/datasets", {{"name", "crime"}, {"csv", t.csv}, {"schema", t.schema}});
    EXPECT_EQ(d.status, 201) << d.body.dump();
    const auto s = call("POST", "/sessions", {{"dataset_id", d.body.at("id")}, {"seed", 5}});
    EXPECT_EQ(s.status, 201) << s.body.dump();
    return s.body.at("id");
  }

  json project(const std::string& sid, const json& ids) {
    const auto r = call("POST", "/sessions/" + sid + "/project",
                        {{"subset_ids", ids}, {"train_cfg", kQuickTrain}, {"tsne_cfg", kQuickTsne}});
    EXPECT_EQ(r.status, 202) << r.body.dump();
    const std::string job = r.body.at("job_id");
    service.wait_job(sid, job);
    const auto j = call("GET", "/sessions/" + sid + "/jobs/" + job);
    EXPECT_EQ(j.status, 200) << j.body.dump();
    return j.body;
  }

  static std::string error_code(const Response& r) { return r.body.at("error").at("code"); }

  Service service;
};

json subset_ids(const json& candidate_set) {
  json ids = json::array();
  for (const auto& s : candidate_set.at("subsets")) ids.push_back(s.at("id"));
  return ids;
}

}  // namespace

TEST_F(ServiceTest, HealthAndUnknownRoute) {
  EXPECT_EQ(call("GET", "/health").body.at("status"), "ok");
  const auto r = call("GET", "/nope");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(error_code(r), "unknown_route");
  EXPECT_EQ(r.body.at("error").at("kind"), "not_found");
}

TEST_F(ServiceTest, MalformedJson) {
  auto r = service.handle({"POST", "/sessions", "{not json", ""});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "malformed_json");
  r = service.handle({"POST", "/sessions", "[1,2]", ""});
  EXPECT_EQ(error_code(r), "malformed_json");
}

TEST_F(ServiceTest, DatasetLifecycle) {
  const auto sid = open_session(500);
  const auto list = call("GET", "/datasets");
  ASSERT_EQ(list.body.at("datasets").size(), 1u);
  const auto schema = call("GET", "/datasets/d1/schema");
  EXPECT_EQ(schema.status, 200);
  EXPECT_EQ(schema.body.at("record_count"), 500);
  EXPECT_EQ(call("GET", "/datasets/d9/schema").status, 404);
  EXPECT_EQ(error_code(call("POST", "/datasets", {{"name", "x"}})), "missing_field");
  EXPECT_EQ(call("POST", "/datasets", {{"name", "x"}, {"path", "a.csv"}}).status, 400);
  EXPECT_EQ(call("GET", "/sessions").body.at("sessions").size(), 1u);
  EXPECT_EQ(error_code(call("POST", "/sessions", {{"dataset_id", "d7"}})), "unknown_dataset");
  EXPECT_EQ(error_code(call("GET", "/sessions/x9/tree")), "unknown_session");
  EXPECT_EQ(sid, "x1");
}

TEST_F(ServiceTest, BadCsvIsUnprocessable) {
  const auto r = call("POST", "/datasets",
                      {{"name", "bad"}, {"csv", "Week\nFunday\n"},
                       {"schema", {{"Week", {{"kind", "temporal"}, {"temporal_unit", "day_of_week"}}}}}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(error_code(r), "value_outside_domain");
}

TEST_F(ServiceTest, SliceProjectSelectFlow) {
  const auto sid = open_session();
  const auto base = "/sessions/" + sid;
  const auto sliced = call("POST", base + "/nodes/n0/slice", {{"attribute", "Week"}});
  ASSERT_EQ(sliced.status, 201) << sliced.body.dump();
  const auto ids = subset_ids(sliced.body.at("candidate_set"));
  ASSERT_EQ(ids.size(), 7u);
  EXPECT_TRUE(sliced.body.at("measures").is_array() || sliced.body.at("measures").is_object());

  const auto job = project(sid, ids);
  ASSERT_EQ(job.at("status"), "done");
  const auto& points = job.at("projection").at("points");
  ASSERT_EQ(points.size(), 7u);
  for (const auto& p : points) {
    EXPECT_TRUE(p.contains("x") && p.contains("y") && p.contains("size"));
    EXPECT_EQ(p.at("embedding").size(), 30u);
  }
  EXPECT_EQ(job.at("progress").at("epoch"), job.at("progress").at("max_epochs"));

  const auto current = call("GET", base + "/projection");
  EXPECT_EQ(current.status, 200);
  const std::string pid = current.body.at("id");
  EXPECT_EQ(call("GET", base + "/projections/" + pid).body, current.body);

  const auto sel = call("POST", base + "/select", {{"subset_ids", {ids[5], ids[6]}}});
  ASSERT_EQ(sel.status, 201) << sel.body.dump();
  EXPECT_EQ(sel.body.at("node").at("subsets").size(), 2u);
  const std::string nid = sel.body.at("node").at("id");
  EXPECT_EQ(sel.body.at("features").at("features").size(), 4u);

  const auto feats = call("GET", base + "/nodes/" + nid + "/features");
  EXPECT_EQ(feats.body, sel.body.at("features"));
  EXPECT_EQ(call("GET", base + "/nodes/" + nid + "/measures").status, 200);

  const auto hours = call("POST", base + "/nodes/" + nid + "/slice", {{"attribute", 2}});
  ASSERT_EQ(hours.status, 201);
  EXPECT_EQ(hours.body.at("candidate_set").at("subsets").size(), 24u);

  const auto sub = call("GET", base + "/subsets/" + std::string(ids[0]));
  EXPECT_EQ(sub.status, 200);
  EXPECT_TRUE(sub.body.contains("features"));

  const auto tree = call("GET", base + "/tree");
  EXPECT_EQ(tree.body.at("nodes").size(), 2u);
}

TEST_F(ServiceTest, HighlightAndCluster) {
  const auto sid = open_session();
  const auto base = "/sessions/" + sid;
  const auto ids = subset_ids(call("POST", base + "/nodes/n0/slice", {{"attribute", "Hour"}}).body.at("candidate_set"));
  project(sid, ids);
  auto r = call("POST", base + "/highlight", {{"attribute", "Hour"}, {"range", {{"from", 22}, {"to", 3}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body.at("subset_ids").size(), 6u);
  r = call("POST", base + "/highlight", {{"attribute", "Hour"}, {"range", {"22", "23"}}});
  EXPECT_EQ(r.body.at("subset_ids").size(), 2u);
  r = call("POST", base + "/highlight", {{"attribute", "Hour"}, {"range", {"noon"}}});
  EXPECT_EQ(error_code(r), "unknown_bin");
  r = call("POST", base + "/highlight", {{"attribute", "Week"}, {"range", {0}}});
  EXPECT_EQ(error_code(r), "not_a_slicing_attribute");

  r = call("POST", base + "/cluster", {{"method", "kmeans"}, {"params", {{"k", 3}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_TRUE(r.body.is_object());
  r = call("POST", base + "/cluster", {{"method", "spectral"}});
  EXPECT_EQ(r.status, 400);
}

TEST_F(ServiceTest, ErrorStatusMapping) {
  const auto sid = open_session(500);
  const auto base = "/sessions/" + sid;
  const auto ids = subset_ids(call("POST", base + "/nodes/n0/slice", {{"attribute", "Week"}}).body.at("candidate_set"));
  EXPECT_EQ(call("POST", base + "/nodes/n0/slice", {{"attribute", "Nope"}}).status, 404);
  EXPECT_EQ(call("POST", base + "/nodes/n0/slice", {}).status, 400);
  EXPECT_EQ(error_code(call("GET", base + "/projection")), "no_projection");
  EXPECT_EQ(call("POST", base + "/project", {{"subset_ids", {ids[0]}}}).status, 400);
  EXPECT_EQ(call("GET", base + "/jobs/j77").status, 404);
  EXPECT_EQ(call("POST", base + "/project", {{"subset_ids", ids}, {"train_cfg", {{"max_epochs", 0}}}}).status, 400);
  project(sid, {ids[0], ids[1], ids[2]});
  auto r = call("POST", base + "/select", {{"subset_ids", {ids[3]}}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(error_code(r), "subset_not_projected");
  r = call("DELETE", base + "/nodes/n0");
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(error_code(r), "cannot_remove_root");
}

TEST_F(ServiceTest, IdempotentRetries) {
  const auto sid = open_session(500);
  const auto base = "/sessions/" + sid;
  const auto ids = subset_ids(call("POST", base + "/nodes/n0/slice", {{"attribute", "Week"}}).body.at("candidate_set"));
  project(sid, ids);
  const json body{{"subset_ids", {ids[0], ids[1]}}};
  const auto a = call("POST", base + "/select", body, "tok-1");
  const auto b = call("POST", base + "/select", body, "tok-1");
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(call("GET", base + "/tree").body.at("nodes").size(), 2u);
  json with_token = body;
  with_token["request_token"] = "tok-2";
  const auto c = call("POST", base + "/select", with_token);
  const auto d = call("POST", base + "/select", with_token);
  EXPECT_EQ(c.body, d.body);
  EXPECT_NE(c.body.at("node").at("id"), a.body.at("node").at("id"));
  EXPECT_EQ(call("GET", base + "/tree").body.at("nodes").size(), 3u);
  // Without a token every POST applies.
  call("POST", base + "/select", body);
  EXPECT_EQ(call("GET", base + "/tree").body.at("nodes").size(), 4u);

  const auto t = make_crime_like(50, 1);
  const json ds{{"name", "again"}, {"csv", t.csv}, {"schema", t.schema}};
  const auto x = call("POST", "/datasets", ds, "tok-ds");
  const auto y = call("POST", "/datasets", ds, "tok-ds");
  EXPECT_EQ(x.body.at("id"), y.body.at("id"));
}

TEST_F(ServiceTest, DeleteLeafAndRestoreSnapshot) {
  const auto sid = open_session(800);
  const auto base = "/sessions/" + sid;
  const auto ids = subset_ids(call("POST", base + "/nodes/n0/slice", {{"attribute", "Week"}}).body.at("candidate_set"));
  project(sid, ids);
  const auto sel = call("POST", base + "/select", {{"subset_ids", {ids[5], ids[6]}}});
  const std::string nid = sel.body.at("node").at("id");
  const auto snap = call("GET", base + "/snapshot").body;

  const auto copy = call("POST", "/sessions", {{"dataset_id", "d1"}, {"snapshot", snap}});
  ASSERT_EQ(copy.status, 201) << copy.body.dump();
  const std::string other = copy.body.at("id");
  EXPECT_EQ(call("GET", "/sessions/" + other + "/snapshot").body.dump(), snap.dump());

  const auto del = call("DELETE", base + "/nodes/" + nid);
  EXPECT_EQ(del.status, 200);
  EXPECT_EQ(del.body.at("tree").at("nodes").size(), 1u);
  EXPECT_EQ(call("GET", "/sessions/" + other + "/tree").body.at("nodes").size(), 2u);
}

TEST_F(ServiceTest, FailedJobReports422) {
  const auto sid = open_session(500);
  const auto base = "/sessions/" + sid;
  const auto ids = subset_ids(call("POST", base + "/nodes/n0/slice", {{"attribute", "Week"}}).body.at("candidate_set"));
  const auto r = call("POST", base + "/project",
                      {{"subset_ids", ids}, {"train_cfg", {{"lr_subnet", 1e200}, {"lr_embedding", 1e200}, {"max_epochs", 50}}}});
  ASSERT_EQ(r.status, 202);
  service.wait_job(sid, r.body.at("job_id"));
  const auto j = call("GET", base + "/jobs/" + std::string(r.body.at("job_id")));
  EXPECT_EQ(j.status, 422);
  EXPECT_EQ(j.body.at("status"), "failed");
  EXPECT_EQ(j.body.at("error").at("code"), "training_diverged");
}

TEST(ServiceDataDir, LoadsCsvWithSchema) {
  const auto dir = std::filesystem::temp_directory_path() / "subsetvis_data_dir_test";
  std::filesystem::create_directories(dir);
  const auto t = make_crime_like(100, 2);
  std::ofstream(dir / "crime.csv") << t.csv;
  std::ofstream(dir / "crime.schema.json") << t.schema.dump();
  std::ofstream(dir / "orphan.csv") << "a\n1\n";
  ServerOptions opts;
  opts.data_dir = dir.string();
  Service service(opts);
  EXPECT_EQ(service.load_data_dir(), 1u);
  const auto r = service.handle({"POST", "/datasets", json{{"name", "again"}, {"path", "crime.csv"},
                                                           {"schema", t.schema}}.dump(), ""});
  EXPECT_EQ(r.status, 201) << r.body.dump();
  const auto escape = service.handle({"POST", "/datasets", json{{"name", "x"}, {"path", "../../etc/passwd"},
                                                                {"schema", t.schema}}.dump(), ""});
  EXPECT_EQ(escape.status, 400);
  std::filesystem::remove_all(dir);
}

TEST(HttpTransport, LoopbackRoundTrip) {
  Service service;
  HttpServer http(service);
  const int port = http.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { http.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body).at("status"), "ok");
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  const auto t = make_crime_like(300, 3);
  const json body{{"name", "crime"}, {"csv", t.csv}, {"schema", t.schema}};
  auto created = client.Post("/datasets", body.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  auto bad = client.Post("/sessions", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto preflight = client.Options("/sessions");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);

  http.stop();
  loop.join();
}
