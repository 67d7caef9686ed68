#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "gps/backend.hpp"

namespace gps {

using nlohmann::json;

struct HttpBackend::Gate {
  explicit Gate(int n) : slots(n) {}
  std::counting_semaphore<4096> slots;
};

namespace {

class GateLease {
 public:
  explicit GateLease(std::counting_semaphore<4096>& s) : s_(s) { s_.acquire(); }
  ~GateLease() { s_.release(); }
  GateLease(const GateLease&) = delete;
  GateLease& operator=(const GateLease&) = delete;

 private:
  std::counting_semaphore<4096>& s_;
};

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto path_at =
      endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_at == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_at);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_at), prefix};
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg)
    : cfg_(std::move(cfg)),
      gate_(std::make_unique<Gate>(std::min(cfg_.request_parallelism, 4096))) {
  cfg_.check();
}

HttpBackend::~HttpBackend() = default;

json HttpBackend::post(const std::string& path, const json& body) const {
  httplib::Headers headers;
  if (!cfg_.auth_env.empty()) {
    const char* token = std::getenv(cfg_.auth_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw BackendError(BackendError::Kind::AuthMissing,
                         "environment variable " + cfg_.auth_env + " is unset");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const auto [base, prefix] = split_endpoint(cfg_.endpoint);
  const std::string payload = body.dump();
  const auto secs = cfg_.timeout.count() / 1000;
  const auto usecs = (cfg_.timeout.count() % 1000) * 1000;

  BackendError last(BackendError::Kind::Transport, "no attempt made");
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(25 << std::min(attempt - 1, 5)));
    }
    httplib::Result res;
    {
      GateLease lease(gate_->slots);
      httplib::Client client(base);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      res = client.Post(prefix + path, headers, payload, "application/json");
    }
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::Read ||
                             err == httplib::Error::ConnectionTimeout;
      last = BackendError(
          timed_out ? BackendError::Kind::Timeout : BackendError::Kind::Transport,
          path + ": " + httplib::to_string(err));
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) {
        throw BackendError(BackendError::Kind::MalformedResponse,
                           path + ": response is not a JSON object");
      }
      return parsed;
    }
    std::string message = "HTTP " + std::to_string(res->status);
    json err = json::parse(res->body, nullptr, false);
    if (!err.is_discarded() && err.is_object() && err.contains("error") &&
        err["error"].is_string()) {
      message += ": " + err["error"].get<std::string>();
    }
    last = BackendError(BackendError::Kind::HttpStatus, path + ": " + message,
                        res->status);
    const bool retryable = res->status >= 500 || res->status == 429;
    if (!retryable) throw last;
  }
  throw last;
}

ScoreResponse HttpBackend::score_choices(const ScoreRequest& req) const {
  if (req.choices.empty() || req.prompt.empty()) {
    throw BackendError(BackendError::Kind::InvalidRequest,
                       "score needs a prompt and choices");
  }
  auto resp = wire::decode_score_response(post("/v1/score", wire::encode(req)));
  if (resp.logprobs.size() != req.choices.size()) {
    throw BackendError(BackendError::Kind::MalformedResponse,
                       "logprobs length does not match choices");
  }
  if (resp.forward_passes < static_cast<long>(req.choices.size())) {
    throw BackendError(BackendError::Kind::MalformedResponse,
                       "forward_passes below number of choices");
  }
  return resp;
}

GenResponse HttpBackend::generate(const GenRequest& req) const {
  if (req.max_tokens < 1) {
    throw BackendError(BackendError::Kind::InvalidRequest, "max_tokens < 1");
  }
  return wire::decode_gen_response(post("/v1/generate", wire::encode(req)));
}

FillResponse HttpBackend::fill_blanks(const FillRequest& req) const {
  const auto blanks = count_blank_markers(req.text_with_blanks);
  if (blanks == 0) {
    throw BackendError(BackendError::Kind::NoBlanks, "no blank markers");
  }
  auto resp = wire::decode_fill_response(post("/v1/fill", wire::encode(req)));
  for (const auto& c : resp.candidates) {
    if (c.fills.size() != blanks) {
      throw BackendError(BackendError::Kind::MalformedResponse,
                         "candidate fill count does not match blanks");
    }
  }
  std::stable_sort(resp.candidates.begin(), resp.candidates.end(),
                   [](const FillCandidate& a, const FillCandidate& b) {
                     return a.score > b.score;
                   });
  return resp;
}

TranslateResponse HttpBackend::translate(const TranslateRequest& req) const {
  if (!is_supported_language(req.src) || !is_supported_language(req.tgt) ||
      req.src == req.tgt) {
    throw BackendError(BackendError::Kind::UnsupportedLanguage,
                       req.src + "->" + req.tgt);
  }
  return wire::decode_translate_response(post("/v1/translate", wire::encode(req)));
}

}  // namespace gps
