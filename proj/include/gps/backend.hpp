#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gps/template.hpp"

namespace gps {

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    Timeout,
    Transport,
    HttpStatus,
    MalformedResponse,
    AuthMissing,
    NoBlanks,
    UnsupportedLanguage,
    InvalidRequest,
  };

  BackendError(Kind kind, std::string message, int status = 0);

  Kind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

const char* to_string(BackendError::Kind kind);

enum class BackendKind { http, mock, oracle };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // http only, e.g. "http://127.0.0.1:8080"
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::string auth_env;  // variable holding the bearer token; empty = no auth
  int request_parallelism = 4;
  std::string oracle_target;  // hidden template for the oracle backend

  void check() const;
  static BackendConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Lets the synthetic oracle judge the prompt that produced a request. Never
/// sent over the wire.
struct OracleContext {
  std::string template_text;
  int example_index = 0;
  int gold = 0;
};

struct ScoreRequest {
  std::string prompt;
  std::vector<std::string> choices;
  std::optional<OracleContext> oracle;
};

struct ScoreResponse {
  std::vector<double> logprobs;  // nats, one per choice
  long forward_passes = 0;
};

struct GenRequest {
  std::string prompt;
  int max_tokens = 64;
  double top_p = 0.9;
  std::vector<std::string> stop;
  std::int64_t seed = 0;
};

struct GenResponse {
  std::string text;
  long forward_passes = 0;
};

struct FillRequest {
  std::string text_with_blanks;
  int n_candidates = 1;
};

struct FillCandidate {
  std::vector<std::string> fills;
  double score = 0.0;
};

struct FillResponse {
  std::vector<FillCandidate> candidates;  // descending score
  long forward_passes = 0;
};

struct TranslateRequest {
  std::string text;
  std::string src;
  std::string tgt;
};

struct TranslateResponse {
  std::string text;
  long forward_passes = 0;
};

// Back-translation pivots: Chinese, Japanese, Korean, French, Spanish,
// Italian, Russian, German, Arabic, Greek, Cantonese.
inline constexpr std::string_view kPivotLanguages[] = {
    "zh", "ja", "ko", "fr", "es", "it", "ru", "de", "ar", "el", "yue"};

bool is_supported_language(std::string_view code);

/// Cost charged per generated/filled/translated candidate.
inline constexpr long kGenerationForwardPasses = 2;

/// Blank markers for fill requests: <X>, <Y>, <Z>, <A>, ... <W>, then <X26>...
std::string blank_marker(std::size_t index);
std::size_t count_blank_markers(std::string_view text);

/// Black-box language model. Implementations must be safe to call
/// concurrently from multiple threads.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual ScoreResponse score_choices(const ScoreRequest& req) const = 0;
  virtual GenResponse generate(const GenRequest& req) const = 0;
  virtual FillResponse fill_blanks(const FillRequest& req) const = 0;
  virtual TranslateResponse translate(const TranslateRequest& req) const = 0;

  virtual int parallelism() const { return 1; }
};

/// Deterministic stand-in for a language model. Every output is a pure
/// function of the request:
///   score     logprob(c) = -(h(prompt § c) mod 1000) / 100
///   generate  synonym paraphrase of the "Sentence 1:" payload, seeded
///   fill      blank i of candidate k = filler[h(text § i § k) mod |filler|]
///   translate per-language word permutation out, inverse + paraphrase back
/// where h is FNV-1a 64 and § the U+00A7 separator.
class MockBackend : public Backend {
 public:
  ScoreResponse score_choices(const ScoreRequest& req) const override;
  GenResponse generate(const GenRequest& req) const override;
  FillResponse fill_blanks(const FillRequest& req) const override;
  TranslateResponse translate(const TranslateRequest& req) const override;
  int parallelism() const override { return 1 << 10; }

  static double mock_logprob(std::string_view prompt, std::string_view choice);

  /// Replaces every synonym-table word w with row[h(w § seed) mod |row|].
  static std::string paraphrase(std::string_view text, std::string_view seed);

  /// The text between the last "Sentence 1:" and the following
  /// "Sentence 2:" marker (one trailing comma dropped); the whole prompt if
  /// the markers are absent.
  static std::string continuation_payload(std::string_view prompt);

  static std::span<const std::vector<std::string_view>> synonym_table();
  static std::span<const std::string_view> filler_table();
};

/// Synthetic fitness landscape: a prompt's per-example correctness is a hash
/// draw against its word-level similarity to a hidden target template.
class OracleBackend : public MockBackend {
 public:
  explicit OracleBackend(Template hidden);

  ScoreResponse score_choices(const ScoreRequest& req) const override;

  const Template& hidden() const { return hidden_; }

  /// 1 - word_levenshtein / max_len over protected texts.
  double similarity(std::string_view candidate_text) const;
  bool oracle_score(std::string_view candidate_text, int example_index) const;

  static double threshold(double sim);
  static double draw(std::string_view candidate_text, int example_index);

 private:
  Template hidden_;
  std::vector<std::string> hidden_tokens_;
};

/// JSON-over-HTTP client for an external inference service.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);
  ~HttpBackend() override;

  ScoreResponse score_choices(const ScoreRequest& req) const override;
  GenResponse generate(const GenRequest& req) const override;
  FillResponse fill_blanks(const FillRequest& req) const override;
  TranslateResponse translate(const TranslateRequest& req) const override;
  int parallelism() const override { return cfg_.request_parallelism; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  BackendConfig cfg_;
  struct Gate;
  std::unique_ptr<Gate> gate_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

// Wire encoding shared by the client and the bundled stub server.
namespace wire {
nlohmann::json encode(const ScoreRequest& r);
nlohmann::json encode(const ScoreResponse& r);
nlohmann::json encode(const GenRequest& r);
nlohmann::json encode(const GenResponse& r);
nlohmann::json encode(const FillRequest& r);
nlohmann::json encode(const FillResponse& r);
nlohmann::json encode(const TranslateRequest& r);
nlohmann::json encode(const TranslateResponse& r);

// Strict decoders: throw BackendError(MalformedResponse) on any schema
// violation. Requests decode with InvalidRequest instead.
ScoreRequest decode_score_request(const nlohmann::json& j);
GenRequest decode_gen_request(const nlohmann::json& j);
FillRequest decode_fill_request(const nlohmann::json& j);
TranslateRequest decode_translate_request(const nlohmann::json& j);
ScoreResponse decode_score_response(const nlohmann::json& j);
GenResponse decode_gen_response(const nlohmann::json& j);
FillResponse decode_fill_response(const nlohmann::json& j);
TranslateResponse decode_translate_response(const nlohmann::json& j);
}  // namespace wire

}  // namespace gps
