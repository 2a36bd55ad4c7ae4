#pragma once

// JSON-over-HTTP service for datasets, exploration sessions and projection
// jobs. Service holds all state and answers requests without any transport,
// so it can be driven directly; serve() mounts it on an HTTP listener.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsetvis/dataset.hpp"
#include "subsetvis/exploration.hpp"

namespace httplib {
class Server;
}

namespace subsetvis::server {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;  // CSV files with a sibling <name>.schema.json
  std::size_t max_cube_cells = kDefaultMaxCubeCells;
  std::uint64_t seed = 0;
  std::string cors_origin = "*";
  ExecPolicy policy = ExecPolicy::parallel;
};

struct Request {
  std::string method;
  std::string path;
  std::string body;
  std::string token;  // Idempotency-Key header, if any
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

enum class JobStatus { running, done, failed };
std::string_view to_string(JobStatus s);

class Service {
 public:
  explicit Service(ServerOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response handle(const Request& request);

  // Loads every <name>.csv with a <name>.schema.json in data_dir.
  std::size_t load_data_dir();

  // Blocks until the job leaves the running state.
  void wait_job(const std::string& session_id, const std::string& job_id);

  const ServerOptions& options() const { return options_; }

 private:
  struct DatasetEntry {
    std::string id;
    std::string name;
    std::shared_ptr<const Dataset> dataset;
  };

  struct Job {
    std::string id;
    std::atomic<JobStatus> status{JobStatus::running};
    std::atomic<std::size_t> epoch{0};
    std::size_t max_epochs = 0;
    std::string projection_id;
    nlohmann::json error;
  };

  struct SessionEntry {
    std::string id;
    std::mutex mutex;
    std::condition_variable job_done;
    exploration::Session session;
    std::map<std::string, std::shared_ptr<Job>> jobs;
    std::uint64_t next_job = 1;
    std::map<std::string, Response> replies;  // by idempotency key

    SessionEntry(std::string sid, exploration::Session s) : id(std::move(sid)), session(std::move(s)) {}
  };

  Response route(const Request& req, const std::vector<std::string>& parts, const nlohmann::json& body);
  Response create_dataset(const nlohmann::json& body);
  Response create_session(const nlohmann::json& body);
  Response session_request(SessionEntry& entry, const Request& req, const std::vector<std::string>& rest,
                           const nlohmann::json& body);
  Response start_projection(SessionEntry& entry, const nlohmann::json& body);
  Response job_json(SessionEntry& entry, const std::string& job_id);

  std::shared_ptr<SessionEntry> find_session(const std::string& id) const;
  std::shared_ptr<const DatasetEntry> find_dataset(const std::string& id) const;
  std::string register_dataset(std::string name, Dataset dataset);

  ServerOptions options_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::mutex global_replies_mutex_;
  std::map<std::string, Response> global_replies_;
  std::uint64_t next_dataset_ = 1;
  std::uint64_t next_session_ = 1;

  std::mutex threads_mutex_;
  std::vector<std::jthread> threads_;
};

// HTTP transport with CORS headers for the configured origin.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> impl_;
};

}  // namespace subsetvis::server
