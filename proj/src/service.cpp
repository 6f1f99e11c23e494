#include "causalols/service.hpp"

#include <cstdlib>
#include <iomanip>
#include <sstream>

#include <httplib.h>

#include "causalols/covariance.hpp"
#include "causalols/error.hpp"
#include "causalols/solver.hpp"

namespace causalols {

namespace {

using nlohmann::json;

Response error_response(int status, const std::string& code, const std::string& message,
                        json extra = json::object()) {
  json err = {{"code", code}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  return {status, {{"schema_version", kSchemaVersion}, {"error", err}}};
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 400;
    case ErrorKind::data: return 400;
    case ErrorKind::rank: return 422;
    case ErrorKind::verify: return 500;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
  }
  return 500;
}

const char* code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "invalid_request";
    case ErrorKind::data: return "invalid_data";
    case ErrorKind::rank: return "rank_deficient";
    case ErrorKind::verify: return "verify_mismatch";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "group_key_not_compressed";
  }
  return "internal";
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const RankDeficientError& e) {
    return error_response(422, "rank_deficient", e.what(),
                          {{"column", e.column()}, {"term", e.term()}});
  } catch (const Error& e) {
    return error_response(status_for(e.kind()), code_for(e.kind()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "invalid_request", std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

std::size_t env_size(const char* name, std::size_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    fail(ErrorKind::config, std::string("environment variable ") + name + " is not a number");
  }
}

}  // namespace

ServiceConfig ServiceConfig::from_env() { return from_env(ServiceConfig{}); }

ServiceConfig ServiceConfig::from_env(ServiceConfig base) {
  if (const char* h = std::getenv("CAUSALOLS_HOST"); h && *h) base.host = h;
  base.port = static_cast<int>(env_size("CAUSALOLS_PORT", static_cast<std::size_t>(base.port)));
  base.max_sessions = env_size("CAUSALOLS_MAX_SESSIONS", base.max_sessions);
  base.max_rows = env_size("CAUSALOLS_MAX_ROWS", base.max_rows);
  return base;
}

SessionStore::SessionStore(ServiceConfig config) : config_(std::move(config)) {}

std::shared_ptr<const Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

json SessionStore::describe(const Session& s) const {
  json d = s.analysis.diagnostics();
  d["fit_seconds"] = s.fit_seconds;
  d["fit_count"] = 1;
  return {{"schema_version", kSchemaVersion},
          {"session_id", s.id},
          {"created_at", iso_time(s.created_at)},
          {"diagnostics", d},
          {"service",
           {{"fit_count", fit_count()},
            {"query_count", query_count()},
            {"process_fit_calls", fit_invocations()}}}};
}

Response SessionStore::create(const json& body) {
  return guarded([&]() -> Response {
    if (!body.is_object()) fail(ErrorKind::config, "request body must be a JSON object");
    if (!body.contains("data_path") || !body["data_path"].is_string()) {
      fail(ErrorKind::config, "field 'data_path' is required");
    }
    if (!body.contains("spec")) fail(ErrorKind::config, "field 'spec' is required");
    {
      std::shared_lock lock(mutex_);
      if (sessions_.size() >= config_.max_sessions) {
        return error_response(429, "too_many_sessions",
                              "session limit of " + std::to_string(config_.max_sessions) +
                                  " reached; delete a session first");
      }
    }
    json cfg_json = {{"spec", body["spec"]}};
    if (body.contains("compression_keys")) cfg_json["compression_keys"] = body["compression_keys"];
    if (body.contains("schema")) cfg_json["schema"] = body["schema"];
    const AnalysisConfig cfg = config_from_json(cfg_json);

    const auto t0 = std::chrono::steady_clock::now();
    auto data = std::make_shared<const Dataset>(load_csv(body["data_path"].get<std::string>(), cfg.schema));
    const double load_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (data->n_rows() > config_.max_rows) {
      fail(ErrorKind::data, "dataset has " + std::to_string(data->n_rows()) +
                                " rows, above the service limit of " +
                                std::to_string(config_.max_rows));
    }
    auto session = std::make_shared<Session>();
    session->analysis = run_pipeline(std::move(data), cfg);
    session->analysis.timings.load = load_seconds;
    fit_count_.fetch_add(1);
    session->fit_seconds = session->analysis.timings.matrix + session->analysis.timings.compress +
                           session->analysis.timings.fit;
    session->created_at = std::chrono::system_clock::now();
    std::ostringstream id;
    id << "s" << std::setw(6) << std::setfill('0') << next_id_.fetch_add(1);
    session->id = id.str();
    {
      std::unique_lock lock(mutex_);
      sessions_[session->id] = session;
    }
    return {201, describe(*session)};
  });
}

Response SessionStore::get(const std::string& id) const {
  auto s = find(id);
  if (!s) return error_response(404, "not_found", "no session '" + id + "'");
  return {200, describe(*s)};
}

Response SessionStore::list() const {
  json items = json::array();
  std::shared_lock lock(mutex_);
  for (const auto& [id, s] : sessions_) {
    items.push_back({{"session_id", id},
                     {"created_at", iso_time(s->created_at)},
                     {"n", s->analysis.compressed.n},
                     {"p", s->analysis.model.p},
                     {"G", s->analysis.compressed.n_groups()},
                     {"compression_ratio", s->analysis.compressed.compression_ratio()},
                     {"fit_seconds", s->fit_seconds}});
  }
  return {200, {{"schema_version", kSchemaVersion}, {"sessions", items}}};
}

Response SessionStore::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  if (sessions_.erase(id) == 0) return error_response(404, "not_found", "no session '" + id + "'");
  return {204, nullptr};
}

Response SessionStore::effects(const std::string& id,
                               const std::map<std::string, std::string>& params) const {
  auto s = find(id);
  if (!s) return error_response(404, "not_found", "no session '" + id + "'");
  return guarded([&]() -> Response {
    auto param = [&](const char* name) -> std::string {
      auto it = params.find(name);
      return it == params.end() ? std::string() : it->second;
    };
    EffectQuery q;
    q.outcome = param("outcome");
    q.arm = param("arm");
    if (q.outcome.empty()) fail(ErrorKind::config, "query parameter 'outcome' is required");
    if (q.arm.empty()) fail(ErrorKind::config, "query parameter 'arm' is required");
    q.grouping = split_csv_list(param("group_by"));
    const Analysis& a = s->analysis;
    q.covariance = parse_covariance(param("covariance"), a.spec.cluster_key.value_or(""));
    if (const std::string level = param("level"); !level.empty()) {
      try {
        q.confidence_level = std::stod(level);
      } catch (const std::exception&) {
        fail(ErrorKind::config, "query parameter 'level' must be a number");
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto estimates = a.query(q);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    query_count_.fetch_add(1);

    json list = json::array();
    for (const auto& e : estimates) list.push_back(to_json(e));
    const bool is_dte = a.spec.time_key && q.grouping == std::vector<std::string>{*a.spec.time_key};
    return {200,
            {{"schema_version", kSchemaVersion},
             {"session_id", s->id},
             {"query",
              {{"outcome", q.outcome},
               {"arm", q.arm},
               {"reference", a.spec.reference},
               {"group_by", q.grouping},
               {"covariance", q.covariance.name()},
               {"level", q.confidence_level},
               {"kind", q.grouping.empty() ? "ATE" : is_dte ? "DTE" : "CATE"}}},
             {"estimates", list},
             {"timing_ms", ms},
             {"fit_count", fit_count()}}};
  });
}

HttpService::HttpService(SessionStore& store)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };

  server_->Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      reply(res, error_response(400, "invalid_request", std::string("malformed JSON: ") + e.what()));
      return;
    }
    reply(res, store_.create(body));
  });
  server_->Get("/sessions", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, store_.list());
  });
  server_->Get("/sessions/:id", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, store_.get(req.path_params.at("id")));
  });
  server_->Delete("/sessions/:id",
                  [this, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, store_.remove(req.path_params.at("id")));
                  });
  server_->Get("/sessions/:id/effects",
               [this, reply](const httplib::Request& req, httplib::Response& res) {
                 std::map<std::string, std::string> params;
                 for (const auto& [k, v] : req.params) params[k] = v;
                 reply(res, store_.effects(req.path_params.at("id"), params));
               });
}

HttpService::~HttpService() = default;

bool HttpService::listen(const std::string& host, int port) {
  if (bind(host, port) < 0) return false;
  return serve();
}

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  return port_;
}

bool HttpService::serve() { return server_->listen_after_bind(); }

void HttpService::stop() { server_->stop(); }

}  // namespace causalols
