#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "gps/backend.hpp"

namespace httplib {
class Server;
}

namespace gps {

/// Inference-service stand-in speaking the JSON protocol on
///   /v1/score /v1/generate /v1/fill /v1/translate.
/// Requests are validated strictly (400 with {"error": ...} on violation) and
/// answered by a MockBackend. Faults can be injected to exercise client
/// retry and timeout handling.
class StubServer {
 public:
  StubServer();
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds 127.0.0.1 (port 0 = any free port) and serves on a background
  /// thread. Returns the bound port.
  int start(int port = 0);
  void stop();

  std::string endpoint() const;

  /// The next `n` requests fail with `status` and an error body.
  void fail_next(int n, int status = 503);
  /// Every request sleeps this long before answering.
  void set_delay_ms(int ms) { delay_ms_ = ms; }
  /// Answer with a body that violates the response schema.
  void set_malformed(bool on) { malformed_ = on; }
  /// Require "Authorization: Bearer <token>"; empty disables the check.
  void require_token(std::string token);

  long request_count(const std::string& path) const;
  long total_requests() const;

 private:
  void install_routes();

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  MockBackend mock_;

  std::atomic<int> fail_remaining_{0};
  std::atomic<int> fail_status_{503};
  std::atomic<int> delay_ms_{0};
  std::atomic<bool> malformed_{false};

  mutable std::mutex mu_;
  std::string token_;
  std::map<std::string, long> counts_;
};

}  // namespace gps
