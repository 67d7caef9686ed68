#include "gps/stub_server.hpp"

#include <chrono>

#include <httplib.h>

namespace gps {

using nlohmann::json;

StubServer::StubServer() : server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

StubServer::~StubServer() { stop(); }

int StubServer::start(int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw std::runtime_error("stub server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void StubServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string StubServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

void StubServer::fail_next(int n, int status) {
  fail_status_ = status;
  fail_remaining_ = n;
}

void StubServer::require_token(std::string token) {
  std::lock_guard lock(mu_);
  token_ = std::move(token);
}

long StubServer::request_count(const std::string& path) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(path);
  return it == counts_.end() ? 0 : it->second;
}

long StubServer::total_requests() const {
  std::lock_guard lock(mu_);
  long n = 0;
  for (const auto& [_, c] : counts_) n += c;
  return n;
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

void StubServer::install_routes() {
  auto route = [this](const std::string& path, auto handler) {
    server_->Post(path, [this, path, handler](const httplib::Request& req,
                                             httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        ++counts_[path];
        if (!token_.empty() &&
            req.get_header_value("Authorization") != "Bearer " + token_) {
          send_error(res, 401, "missing or wrong bearer token");
          return;
        }
      }
      if (const int d = delay_ms_.load(); d > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(d));
      }
      if (fail_remaining_.load() > 0 && fail_remaining_.fetch_sub(1) > 0) {
        send_error(res, fail_status_.load(), "injected failure");
        return;
      }
      if (req.get_header_value("Content-Type").rfind("application/json", 0) != 0) {
        send_error(res, 415, "Content-Type must be application/json");
        return;
      }
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        send_error(res, 400, "body is not a JSON object");
        return;
      }
      if (malformed_.load()) {
        res.set_content(R"({"unexpected": true})", "application/json");
        return;
      }
      try {
        res.set_content(handler(body).dump(), "application/json");
      } catch (const BackendError& e) {
        send_error(res, 400, e.what());
      }
    });
  };

  route("/v1/score", [this](const json& body) {
    return wire::encode(mock_.score_choices(wire::decode_score_request(body)));
  });
  route("/v1/generate", [this](const json& body) {
    return wire::encode(mock_.generate(wire::decode_gen_request(body)));
  });
  route("/v1/fill", [this](const json& body) {
    return wire::encode(mock_.fill_blanks(wire::decode_fill_request(body)));
  });
  route("/v1/translate", [this](const json& body) {
    return wire::encode(mock_.translate(wire::decode_translate_request(body)));
  });
}

}  // namespace gps
