#include "scimine/review_service.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <httplib.h>

#include "scimine/error.hpp"

namespace scimine {

Json schema_palette() {
  struct Row {
    EntityType type;
    const char* color;
    const char* name;
  };
  static const Row rows[] = {
      {EntityType::Model, "#1b5e20", "dark green"},   {EntityType::Task, "#8bc34a", "light green"},
      {EntityType::Method, "#d32f2f", "red"},         {EntityType::Score, "#e65100", "dark orange"},
      {EntityType::Setting, "#ffb74d", "light orange"}, {EntityType::Metric, "#1e88e5", "blue"},
      {EntityType::Dataset, "#8e24aa", "purple"}};
  Json types = Json::array();
  for (const auto& r : rows)
    types.push_back(Json{{"name", std::string(to_string(r.type))},
                         {"color", r.color},
                         {"color_name", r.name},
                         {"in_text", is_text_type(r.type)},
                         {"in_table", true}});
  return Json{{"entity_types", std::move(types)},
              {"relation", Json{{"directed", false}, {"typed", false}, {"same_type_allowed", false}}},
              {"task_statuses", Json::array({"pending", "in_progress", "done"})}};
}

namespace {

int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotFound:
    case ErrorCode::MissingDocument: return 404;
    case ErrorCode::StaleVersion:
    case ErrorCode::TaskConflict: return 409;
    case ErrorCode::InvalidCorrection: return 422;
    case ErrorCode::NoNewGold:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseFailure: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(dump(body), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                Json extra = Json::object()) {
  extra["code"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

Json summary(const ReviewTask& t, const AnnotatedDocument& d) {
  size_t text = 0, table = 0;
  for (const auto& e : d.entities) (is_table(e.anchor) ? table : text)++;
  Json j = to_json(t);
  j["version"] = d.version;
  j["review_state"] = std::string(to_string(d.review_state));
  j["text_entities"] = text;
  j["table_entities"] = table;
  j["table_relations"] = d.relations.size();
  return j;
}

ReviewTask task_for(const Workspace& ws, const AnnotatedDocument& d) {
  if (auto t = ws.task(d.doc.doc_id)) return *t;
  ReviewTask t;
  t.doc_id = d.doc.doc_id;
  t.status = d.review_state == ReviewState::Gold ? TaskStatus::Done : TaskStatus::Pending;
  t.version = d.version;
  t.round = d.round;
  t.domain = d.doc.domain;
  return t;
}

const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>scimine review</title></head>"
    "<body><p>Review API is running. The browser bundle is not installed; see /api/docs.</p></body></html>";

}  // namespace

ReviewService::ReviewService(Workspace ws, ServiceOptions options)
    : ws_(std::move(ws)), opts_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto lock_path = (ws_.root() / ".lock").string();
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw Error(ErrorCode::Io, "cannot open " + lock_path);
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::WorkspaceLocked, ws_.root().string() + " is locked by another process");
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(lock_fd_, 0) == 0) (void)!::write(lock_fd_, pid.data(), pid.size());
  // Default options include SO_REUSEPORT, which would let a second server share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  routes();
}

ReviewService::~ReviewService() {
  stop();
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

std::shared_ptr<std::mutex> ReviewService::doc_mutex(const std::string& doc_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& m = doc_mu_[doc_id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

int ReviewService::bind() {
  if (port_ >= 0) return port_;
  if (opts_.port == 0) {
    port_ = server_->bind_to_any_port(opts_.host);
  } else {
    port_ = server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1;
  }
  if (port_ < 0) throw Error(ErrorCode::AddrInUse, opts_.host + ":" + std::to_string(opts_.port) + " is unavailable");
  return port_;
}

void ReviewService::run() {
  bind();
  server_->listen_after_bind();
}

void ReviewService::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ReviewService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ReviewService::routes() {
  auto& s = *server_;

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (opts_.token.empty() || req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + opts_.token)
      return httplib::Server::HandlerResponse::Unhandled;
    send_error(res, 401, "unauthorized", "missing or wrong bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  // Wraps handlers so library errors become {code, message} bodies.
  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "parse_failure", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  };

  auto reviewer_of = [this](const httplib::Request& req, const Json& body) {
    if (body.is_object() && body.contains("reviewer") && body["reviewer"].is_string())
      return body["reviewer"].get<std::string>();
    auto h = req.get_header_value("X-Reviewer");
    return h.empty() ? opts_.default_reviewer : h;
  };
  auto body_json = [](const httplib::Request& req) {
    return req.body.empty() ? Json::object() : parse_json(req.body);
  };

  s.Get("/api/schema", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, schema_palette());
        }));

  s.Get("/api/rounds", guarded([this](const httplib::Request&, httplib::Response& res) {
          Json arr = Json::array();
          for (const auto& r : ws_.rounds()) arr.push_back(to_json(r));
          send_json(res, 200, Json{{"rounds", std::move(arr)}});
        }));

  s.Get("/api/docs", guarded([this](const httplib::Request& req, httplib::Response& res) {
          std::optional<TaskStatus> status;
          std::optional<Domain> domain;
          if (req.has_param("status") && !req.get_param_value("status").empty()) {
            status = parse_task_status(req.get_param_value("status"));
            if (!status) throw Error(ErrorCode::InvalidArgument, "unknown status " + req.get_param_value("status"));
          }
          if (req.has_param("domain") && !req.get_param_value("domain").empty()) {
            domain = parse_domain(req.get_param_value("domain"));
            if (!domain) throw Error(ErrorCode::InvalidArgument, "unknown domain " + req.get_param_value("domain"));
          }
          Json arr = Json::array();
          for (const auto& id : ws_.annotated_ids()) {
            auto d = ws_.get_annotations(id);
            if (!d) continue;
            auto t = task_for(ws_, *d);
            if (status && t.status != *status) continue;
            if (domain && d->doc.domain != *domain) continue;
            arr.push_back(summary(t, *d));
          }
          send_json(res, 200, Json{{"docs", std::move(arr)}});
        }));

  s.Get(R"(/api/docs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          std::string id = req.matches[1];
          auto d = ws_.get_annotations(id);
          if (!d) throw Error(ErrorCode::NotFound, "no document " + id);
          send_json(res, 200,
                    Json{{"doc_id", id},
                         {"version", d->version},
                         {"task", to_json(task_for(ws_, *d))},
                         {"annotations", to_json(*d)},
                         {"findings", to_json(validate(*d))}});
        }));

  s.Patch(R"(/api/docs/([^/]+))", guarded([this, reviewer_of, body_json](const httplib::Request& req,
                                                                          httplib::Response& res) {
            std::string id = req.matches[1];
            Json body = body_json(req);
            if (!body.contains("version") || !body["version"].is_number_unsigned())
              throw Error(ErrorCode::InvalidArgument, "body needs a version");
            std::vector<Correction> cs;
            for (const auto& c : body.value("corrections", Json::array())) cs.push_back(correction_from_json(c));
            std::string reviewer = reviewer_of(req, body);
            auto lock = doc_mutex(id);
            std::lock_guard<std::mutex> guard(*lock);
            auto d = ws_.get_annotations(id);
            if (!d) throw Error(ErrorCode::NotFound, "no document " + id);
            uint64_t version = body["version"].get<uint64_t>();
            if (version != d->version) {
              send_error(res, 409, "stale_version",
                         "version " + std::to_string(version) + " is stale",
                         Json{{"current_version", d->version}});
              return;
            }
            if (task_for(ws_, *d).status == TaskStatus::Pending) claim_task(ws_, id, reviewer);
            auto merged = submit_corrections(ws_, id, version, cs, reviewer);
            send_json(res, 200, Json{{"doc_id", id}, {"version", merged.version}, {"annotations", to_json(merged)}});
          }));

  auto task_action = [this, reviewer_of, body_json](const std::string& action) {
    return [this, reviewer_of, body_json, action](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      Json body = body_json(req);
      std::string reviewer = reviewer_of(req, body);
      auto lock = doc_mutex(id);
      std::lock_guard<std::mutex> guard(*lock);
      if (action == "claim") {
        send_json(res, 200, to_json(claim_task(ws_, id, reviewer)));
      } else if (action == "reopen") {
        send_json(res, 200, to_json(reopen_task(ws_, id, reviewer)));
      } else {
        auto d = ws_.get_annotations(id);
        if (!d) throw Error(ErrorCode::NotFound, "no document " + id);
        if (task_for(ws_, *d).status == TaskStatus::Pending) claim_task(ws_, id, reviewer);
        auto done = complete_task(ws_, id, reviewer);
        send_json(res, 200,
                  Json{{"doc_id", id}, {"version", done.version},
                       {"review_state", std::string(to_string(done.review_state))}});
      }
    };
  };
  s.Post(R"(/api/docs/([^/]+)/claim)", guarded(task_action("claim")));
  s.Post(R"(/api/docs/([^/]+)/complete)", guarded(task_action("complete")));
  s.Post(R"(/api/docs/([^/]+)/reopen)", guarded(task_action("reopen")));

  if (!opts_.static_dir.empty() && s.set_mount_point("/", opts_.static_dir)) return;
  s.Get("/", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
  });
}

}  // namespace scimine
