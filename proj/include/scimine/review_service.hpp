#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "scimine/pipeline.hpp"
#include "scimine/serialize.hpp"

namespace httplib {
class Server;
}

namespace scimine {

/// Entity types with their display colors and modality.
Json schema_palette();

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string token;       // static bearer token; empty disables auth
  std::string static_dir;  // served at / when set
  std::string default_reviewer = "reviewer";
};

/// Single-tenant review API over a workspace. Holds an exclusive lock on the
/// workspace for its lifetime (WorkspaceLocked when another holder exists).
class ReviewService {
 public:
  ReviewService(Workspace ws, ServiceOptions options);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Binds the listening socket. Throws AddrInUse. Returns the bound port.
  int bind();
  /// Serves until stop(). Binds first if needed.
  void run();
  /// run() on a background thread; returns once the socket is bound.
  void start();
  void stop();
  int port() const { return port_; }

 private:
  void routes();
  std::shared_ptr<std::mutex> doc_mutex(const std::string& doc_id);

  Workspace ws_;
  ServiceOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  int lock_fd_ = -1;
  int port_ = -1;
  std::thread thread_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> doc_mu_;
};

}  // namespace scimine
