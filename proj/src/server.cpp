#include "subsetvis/server.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "subsetvis/error.hpp"

namespace subsetvis::server {

namespace {

namespace fs = std::filesystem;

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::domain: return 422;
  }
  return 500;
}

std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::domain: return "domain";
  }
  return "internal";
}

nlohmann::json error_json(std::string_view code, std::string_view kind, std::string_view message) {
  return {{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
}

Response error_response(const Error& e) {
  return {status_for(e.kind()), error_json(e.code(), kind_name(e.kind()), e.what())};
}

std::vector<std::string> split_path(std::string_view path) {
  if (const auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const auto end = std::min(path.find('/', pos), path.size());
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::not_found, "unknown_file", "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const nlohmann::json& require(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    fail(ErrorKind::invalid_argument, "missing_field", std::string("request body needs '") + key + "'");
  }
  return body.at(key);
}

AttributeId attribute_arg(const Dataset& ds, const nlohmann::json& j) {
  if (j.is_number_unsigned()) {
    const auto id = j.get<AttributeId>();
    ds.attribute(id);
    return id;
  }
  if (j.is_string()) return ds.attribute_id(j.get<std::string>());
  fail(ErrorKind::invalid_argument, "bad_attribute", "attribute must be a name or an id");
}

BinIndex bin_arg(const AttributeSchema& attr, const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<BinIndex>();
  if (j.is_string()) {
    const auto label = j.get<std::string>();
    for (BinIndex b = 0; b < attr.bin_count(); ++b) {
      if (attr.bins[b] == label) return b;
    }
    fail(ErrorKind::invalid_argument, "unknown_bin", "'" + label + "' is not a bin of '" + attr.name + "'");
  }
  fail(ErrorKind::invalid_argument, "bad_range", "bins must be indices or labels");
}

// A list of bins, or {"from", "to"} which wraps around for ordered domains.
std::vector<BinIndex> range_arg(const AttributeSchema& attr, const nlohmann::json& j) {
  std::vector<BinIndex> out;
  if (j.is_array()) {
    for (const auto& b : j) out.push_back(bin_arg(attr, b));
    return out;
  }
  if (j.is_object()) {
    const auto from = bin_arg(attr, require(j, "from"));
    const auto to = bin_arg(attr, require(j, "to"));
    const auto n = static_cast<BinIndex>(attr.bin_count());
    if (from >= n || to >= n) fail(ErrorKind::invalid_argument, "bin_out_of_range", "range end is outside the domain");
    for (BinIndex b = from;; b = (b + 1) % n) {
      out.push_back(b);
      if (b == to) break;
    }
    return out;
  }
  fail(ErrorKind::invalid_argument, "bad_range", "range must be a list or {from, to}");
}

std::vector<std::string> ids_arg(const nlohmann::json& body, const char* key) {
  const auto& j = require(body, key);
  if (!j.is_array()) fail(ErrorKind::invalid_argument, "bad_field", std::string("'") + key + "' must be a list");
  return j.get<std::vector<std::string>>();
}

std::string optional_string_arg(const nlohmann::json& body, const char* key) {
  if (body.is_object() && body.contains(key) && !body.at(key).is_null()) return body.at(key).get<std::string>();
  return {};
}

const nlohmann::json& optional_arg(const nlohmann::json& body, const char* key) {
  static const nlohmann::json null;
  if (body.is_object() && body.contains(key)) return body.at(key);
  return null;
}

bool is_mutation(const std::string& method) { return method == "POST" || method == "DELETE"; }

}  // namespace

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "running";
}

Service::Service(ServerOptions options) : options_(std::move(options)) {}

Service::~Service() {
  std::lock_guard lock(threads_mutex_);
  threads_.clear();  // joins
}

std::string Service::register_dataset(std::string name, Dataset dataset) {
  std::unique_lock lock(registry_mutex_);
  auto entry = std::make_shared<DatasetEntry>();
  entry->id = "d" + std::to_string(next_dataset_++);
  entry->name = std::move(name);
  entry->dataset = std::make_shared<const Dataset>(std::move(dataset));
  const auto id = entry->id;
  datasets_.emplace(id, std::move(entry));
  return id;
}

std::size_t Service::load_data_dir() {
  if (options_.data_dir.empty()) return 0;
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(options_.data_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  std::size_t loaded = 0;
  for (const auto& csv : csvs) {
    auto schema = csv;
    schema.replace_extension(".schema.json");
    if (!fs::exists(schema)) continue;
    auto config = parse_schema_config(nlohmann::json::parse(read_file(schema)));
    register_dataset(csv.stem().string(), ingest(read_file(csv), config));
    ++loaded;
  }
  return loaded;
}

std::shared_ptr<Service::SessionEntry> Service::find_session(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::not_found, "unknown_session", "no session '" + id + "'");
  return it->second;
}

std::shared_ptr<const Service::DatasetEntry> Service::find_dataset(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = datasets_.find(id);
  if (it == datasets_.end()) fail(ErrorKind::not_found, "unknown_dataset", "no dataset '" + id + "'");
  return it->second;
}

Response Service::handle(const Request& request) {
  try {
    nlohmann::json body;
    if (request.body.find_first_not_of(" \t\r\n") != std::string::npos) {
      try {
        body = nlohmann::json::parse(request.body);
      } catch (const nlohmann::json::parse_error& e) {
        return {400, error_json("malformed_json", "invalid_argument", e.what())};
      }
      if (!body.is_object()) return {400, error_json("malformed_json", "invalid_argument", "body must be an object")};
    }
    Request req = request;
    if (req.token.empty() && body.is_object() && body.contains("request_token")) {
      req.token = body.at("request_token").get<std::string>();
    }
    return route(req, split_path(req.path), body);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const nlohmann::json::exception& e) {
    return {400, error_json("bad_request", "invalid_argument", e.what())};
  } catch (const std::exception& e) {
    return {500, error_json("internal", "internal", e.what())};
  }
}

Response Service::route(const Request& req, const std::vector<std::string>& parts, const nlohmann::json& body) {
  const auto& m = req.method;
  const auto n = parts.size();
  if (n == 1 && parts[0] == "health" && m == "GET") return {200, {{"status", "ok"}}};

  if (n >= 1 && parts[0] == "datasets") {
    if (n == 1 && m == "GET") {
      std::shared_lock lock(registry_mutex_);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& [id, d] : datasets_) {
        list.push_back({{"id", id}, {"name", d->name}, {"record_count", d->dataset->record_count()}});
      }
      return {200, {{"datasets", list}}};
    }
    if (n == 1 && m == "POST") {
      std::lock_guard lock(global_replies_mutex_);
      const auto key = "POST /datasets " + req.token;
      if (!req.token.empty()) {
        if (auto it = global_replies_.find(key); it != global_replies_.end()) return it->second;
      }
      auto reply = create_dataset(body);
      if (!req.token.empty()) global_replies_.emplace(key, reply);
      return reply;
    }
    if (n == 3 && parts[2] == "schema" && m == "GET") {
      const auto d = find_dataset(parts[1]);
      return {200, {{"id", d->id}, {"name", d->name}, {"record_count", d->dataset->record_count()},
                    {"schema", schema_to_json(*d->dataset)}}};
    }
  }

  if (n >= 1 && parts[0] == "sessions") {
    if (n == 1 && m == "POST") {
      std::lock_guard lock(global_replies_mutex_);
      const auto key = "POST /sessions " + req.token;
      if (!req.token.empty()) {
        if (auto it = global_replies_.find(key); it != global_replies_.end()) return it->second;
      }
      auto reply = create_session(body);
      if (!req.token.empty()) global_replies_.emplace(key, reply);
      return reply;
    }
    if (n == 1 && m == "GET") {
      std::shared_lock lock(registry_mutex_);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& [id, s] : sessions_) list.push_back(id);
      return {200, {{"sessions", list}}};
    }
    if (n >= 3) {
      auto entry = find_session(parts[1]);
      const std::vector<std::string> rest(parts.begin() + 2, parts.end());
      std::unique_lock lock(entry->mutex);
      std::string key;
      if (is_mutation(m) && !req.token.empty()) {
        key = m + " " + req.path + " " + req.token;
        if (auto it = entry->replies.find(key); it != entry->replies.end()) return it->second;
      }
      Response reply;
      try {
        reply = session_request(*entry, req, rest, body);
      } catch (const Error& e) {
        reply = error_response(e);
      }
      if (!key.empty()) entry->replies.emplace(key, reply);
      return reply;
    }
  }
  return {404, error_json("unknown_route", "not_found", m + " " + req.path + " is not an endpoint")};
}

Response Service::create_dataset(const nlohmann::json& body) {
  const auto& schema_json = require(body, "schema");
  std::string csv;
  std::string name = optional_string_arg(body, "name");
  if (body.contains("csv")) {
    csv = body.at("csv").get<std::string>();
  } else if (body.contains("path")) {
    if (options_.data_dir.empty()) fail(ErrorKind::invalid_argument, "bad_path", "server has no data directory");
    const fs::path rel = body.at("path").get<std::string>();
    if (rel.is_absolute() || std::any_of(rel.begin(), rel.end(), [](const fs::path& p) { return p == ".."; })) {
      fail(ErrorKind::invalid_argument, "bad_path", "path must stay inside the data directory");
    }
    csv = read_file(fs::path(options_.data_dir) / rel);
    if (name.empty()) name = rel.stem().string();
  } else {
    fail(ErrorKind::invalid_argument, "missing_field", "request body needs 'csv' or 'path'");
  }
  auto dataset = ingest(csv, parse_schema_config(schema_json));
  const auto id = register_dataset(name.empty() ? std::string("dataset") : name, std::move(dataset));
  const auto d = find_dataset(id);
  return {201, {{"id", id}, {"name", d->name}, {"record_count", d->dataset->record_count()},
                {"schema", schema_to_json(*d->dataset)}}};
}

Response Service::create_session(const nlohmann::json& body) {
  const auto dataset_id = require(body, "dataset_id").get<std::string>();
  const auto d = find_dataset(dataset_id);
  exploration::SessionOptions opts;
  opts.max_cube_cells = options_.max_cube_cells;
  opts.seed = body.contains("seed") ? body.at("seed").get<std::uint64_t>() : options_.seed;
  opts.policy = options_.policy;
  auto session = body.contains("snapshot") ? exploration::Session::restore(d->dataset, body.at("snapshot"), opts)
                                           : exploration::Session(d->dataset, dataset_id, opts);
  std::unique_lock lock(registry_mutex_);
  const auto id = "x" + std::to_string(next_session_++);
  auto entry = std::make_shared<SessionEntry>(id, std::move(session));
  auto tree = entry->session.tree_json();
  sessions_.emplace(id, std::move(entry));
  return {201, {{"id", id}, {"dataset_id", dataset_id}, {"tree", std::move(tree)}}};
}

Response Service::session_request(SessionEntry& entry, const Request& req, const std::vector<std::string>& rest,
                                  const nlohmann::json& body) {
  auto& s = entry.session;
  const auto& m = req.method;
  const auto n = rest.size();
  const auto& head = rest[0];

  if (n == 1 && head == "tree" && m == "GET") return {200, s.tree_json()};
  if (n == 1 && head == "snapshot" && m == "GET") return {200, s.snapshot()};

  if (head == "nodes" && n >= 2) {
    const auto& nid = rest[1];
    if (n == 2 && m == "DELETE") {
      s.remove_leaf(nid);
      return {200, {{"removed", nid}, {"tree", s.tree_json()}}};
    }
    if (n == 3 && rest[2] == "slice" && m == "POST") {
      const auto attr = attribute_arg(s.dataset(), require(body, "attribute"));
      const auto& cs = s.slice_node(nid, attr);
      return {201, {{"candidate_set", s.candidate_set_json(cs.id)}, {"measures", s.node_measures_json(nid)}}};
    }
    if (n == 3 && rest[2] == "features" && m == "GET") return {200, s.node_features_json(nid)};
    if (n == 3 && rest[2] == "measures" && m == "GET") return {200, s.node_measures_json(nid)};
  }

  if (n == 1 && head == "project" && m == "POST") return start_projection(entry, body);
  if (n == 2 && head == "jobs" && m == "GET") return job_json(entry, rest[1]);
  if (n == 2 && head == "projections" && m == "GET") return {200, s.projection_json(s.projection(rest[1]))};
  if (n == 1 && head == "projection" && m == "GET") return {200, s.projection_json(s.current_projection())};
  if (n == 2 && head == "subsets" && m == "GET") {
    auto j = s.subset_json(rest[1]);
    j["features"] = subset_to_json(s.subset(rest[1]), s.dataset()).at("features");
    return {200, j};
  }

  if (n == 1 && head == "select" && m == "POST") {
    const auto ids = ids_arg(body, "subset_ids");
    const auto& node = s.select(ids, optional_string_arg(body, "projection_id"));
    const auto tree = s.tree_json();
    for (const auto& j : tree.at("nodes")) {
      if (j.at("id") == node.id) return {201, {{"node", j}, {"features", s.node_features_json(node.id)}}};
    }
  }
  if (n == 1 && head == "highlight" && m == "POST") {
    const auto attr = attribute_arg(s.dataset(), require(body, "attribute"));
    const auto bins = range_arg(s.dataset().attribute(attr), require(body, "range"));
    return {200, {{"subset_ids", s.highlight(attr, bins, optional_string_arg(body, "projection_id"))}}};
  }
  if (n == 1 && head == "cluster" && m == "POST") {
    const auto params = exploration::cluster_params_from_json(body);
    const auto pid = optional_string_arg(body, "projection_id");
    s.cluster(params, pid);
    const auto& p = pid.empty() ? s.current_projection() : s.projection(pid);
    return {200, s.projection_json(p).at("clusters")};
  }
  return {404, error_json("unknown_route", "not_found", m + " " + req.path + " is not an endpoint")};
}

Response Service::start_projection(SessionEntry& entry, const nlohmann::json& body) {
  const auto ids = ids_arg(body, "subset_ids");
  sen::TrainConfig train_base;
  train_base.seed = entry.session.options().seed;
  tsne::TsneConfig tsne_base;
  tsne_base.seed = entry.session.options().seed;
  const auto train_cfg = sen::config_from_json(optional_arg(body, "train_cfg"), train_base);
  const auto tsne_cfg = tsne::config_from_json(optional_arg(body, "tsne_cfg"), tsne_base);
  auto input = entry.session.prepare_projection(ids, train_cfg, tsne_cfg);

  auto job = std::make_shared<Job>();
  job->id = "j" + std::to_string(entry.next_job++);
  job->max_epochs = input.train_config.max_epochs;
  entry.jobs.emplace(job->id, job);

  auto session_entry = find_session(entry.id);
  std::lock_guard lock(threads_mutex_);
  threads_.emplace_back([session_entry, job, input = std::move(input)] {
    try {
      auto state = exploration::compute_projection(input, [&](std::size_t epoch, double) { job->epoch = epoch + 1; });
      std::lock_guard l(session_entry->mutex);
      job->projection_id = session_entry->session.commit_projection(std::move(state)).id;
      job->status = JobStatus::done;
    } catch (const Error& e) {
      std::lock_guard l(session_entry->mutex);
      job->error = error_json(e.code(), kind_name(e.kind()), e.what()).at("error");
      job->status = JobStatus::failed;
    } catch (const std::exception& e) {
      std::lock_guard l(session_entry->mutex);
      job->error = error_json("internal", "internal", e.what()).at("error");
      job->status = JobStatus::failed;
    }
    session_entry->job_done.notify_all();
  });
  return {202, {{"job_id", job->id}, {"status", to_string(JobStatus::running)}}};
}

Response Service::job_json(SessionEntry& entry, const std::string& job_id) {
  const auto it = entry.jobs.find(job_id);
  if (it == entry.jobs.end()) fail(ErrorKind::not_found, "unknown_job", "no job '" + job_id + "'");
  const auto& job = *it->second;
  const auto status = job.status.load();
  nlohmann::json j{{"job_id", job.id},
                   {"status", to_string(status)},
                   {"progress", {{"epoch", job.epoch.load()}, {"max_epochs", job.max_epochs}}}};
  if (status == JobStatus::done) {
    j["projection"] = entry.session.projection_json(entry.session.projection(job.projection_id));
  } else if (status == JobStatus::failed) {
    j["error"] = job.error;
    // 422 keeps machine-readable training failures apart from transport errors.
    return {422, j};
  }
  return {200, j};
}

void Service::wait_job(const std::string& session_id, const std::string& job_id) {
  auto entry = find_session(session_id);
  std::unique_lock lock(entry->mutex);
  const auto it = entry->jobs.find(job_id);
  if (it == entry->jobs.end()) fail(ErrorKind::not_found, "unknown_job", "no job '" + job_id + "'");
  auto job = it->second;
  entry->job_done.wait(lock, [&] { return job->status.load() != JobStatus::running; });
}

HttpServer::HttpServer(Service& service) : service_(service), impl_(std::make_unique<httplib::Server>()) {
  const auto& origin = service_.options().cors_origin;
  impl_->set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  auto forward = [this](const httplib::Request& in, httplib::Response& out) {
    Request req{in.method, in.path, in.body, in.get_header_value("Idempotency-Key")};
    const auto reply = service_.handle(req);
    out.status = reply.status;
    out.set_content(reply.body.dump(), "application/json");
  };
  impl_->Get(".*", forward);
  impl_->Post(".*", forward);
  impl_->Delete(".*", forward);
  impl_->Options(".*", [](const httplib::Request&, httplib::Response& out) { out.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->bind_to_any_port(host);
  return impl_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->stop();
}

}  // namespace subsetvis::server
