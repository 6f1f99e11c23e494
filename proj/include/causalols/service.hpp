#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "causalols/pipeline.hpp"

namespace httplib {
class Server;
}

namespace causalols {

inline constexpr int kSchemaVersion = 1;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_sessions = 16;
  std::size_t max_rows = 60'000'000;

  /// Overrides from CAUSALOLS_HOST, CAUSALOLS_PORT, CAUSALOLS_MAX_SESSIONS,
  /// CAUSALOLS_MAX_ROWS.
  static ServiceConfig from_env();
  static ServiceConfig from_env(ServiceConfig base);
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct Session {
  std::string id;
  std::chrono::system_clock::time_point created_at;
  Analysis analysis;
  double fit_seconds = 0.0;
};

/// Sessions fit once at creation and are read-only afterwards; any number of
/// queries may run against one session concurrently.
class SessionStore {
 public:
  explicit SessionStore(ServiceConfig config = {});

  Response create(const nlohmann::json& body);
  Response get(const std::string& id) const;
  Response list() const;
  Response remove(const std::string& id);
  Response effects(const std::string& id, const std::map<std::string, std::string>& params) const;

  std::size_t fit_count() const noexcept { return fit_count_.load(); }
  std::size_t query_count() const noexcept { return query_count_.load(); }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const Session> find(const std::string& id) const;
  nlohmann::json describe(const Session& s) const;

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Session>> sessions_;
  std::atomic<std::size_t> next_id_{1};
  std::atomic<std::size_t> fit_count_{0};
  mutable std::atomic<std::size_t> query_count_{0};
};

/// Routes HTTP/1.1 requests onto a SessionStore.
class HttpService {
 public:
  explicit HttpService(SessionStore& store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Blocks until stop(). Port 0 binds an ephemeral port, see port().
  bool listen(const std::string& host, int port);
  /// Binds without serving; call serve() afterwards (typically on a thread).
  int bind(const std::string& host, int port = 0);
  bool serve();
  void stop();
  int port() const noexcept { return port_; }

 private:
  SessionStore& store_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

}  // namespace causalols
