#include "gps/backend.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <unordered_map>

#include "gps/text.hpp"

namespace gps {

using nlohmann::json;

BackendError::BackendError(Kind kind, std::string message, int status)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      status_(status) {}

const char* to_string(BackendError::Kind kind) {
  using K = BackendError::Kind;
  switch (kind) {
    case K::Timeout: return "Timeout";
    case K::Transport: return "Transport";
    case K::HttpStatus: return "HttpStatus";
    case K::MalformedResponse: return "MalformedResponse";
    case K::AuthMissing: return "AuthMissing";
    case K::NoBlanks: return "NoBlanks";
    case K::UnsupportedLanguage: return "UnsupportedLanguage";
    case K::InvalidRequest: return "InvalidRequest";
  }
  return "BackendError";
}

void BackendConfig::check() const {
  if (timeout.count() <= 0) throw std::invalid_argument("timeout must be > 0");
  if (request_parallelism < 1) {
    throw std::invalid_argument("request_parallelism must be >= 1");
  }
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (kind == BackendKind::http && endpoint.empty()) {
    throw std::invalid_argument("http backend needs an endpoint");
  }
  if (kind == BackendKind::oracle && oracle_target.empty()) {
    throw std::invalid_argument("oracle backend needs oracle_target");
  }
}

BackendConfig BackendConfig::from_json(const json& j) {
  BackendConfig cfg;
  const std::string kind = j.value("kind", std::string("mock"));
  if (kind == "http") {
    cfg.kind = BackendKind::http;
  } else if (kind == "mock") {
    cfg.kind = BackendKind::mock;
  } else if (kind == "oracle") {
    cfg.kind = BackendKind::oracle;
  } else {
    throw std::invalid_argument("unknown backend kind '" + kind + "'");
  }
  cfg.endpoint = j.value("endpoint", std::string());
  cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  cfg.max_retries = j.value("max_retries", 2);
  cfg.auth_env = j.value("auth_env", std::string());
  cfg.request_parallelism = j.value("request_parallelism", 4);
  cfg.oracle_target = j.value("oracle_target", std::string());
  cfg.check();
  return cfg;
}

json BackendConfig::to_json() const {
  json j;
  j["kind"] = kind == BackendKind::http     ? "http"
              : kind == BackendKind::oracle ? "oracle"
                                            : "mock";
  if (!endpoint.empty()) j["endpoint"] = endpoint;
  j["timeout_ms"] = timeout.count();
  j["max_retries"] = max_retries;
  if (!auth_env.empty()) j["auth_env"] = auth_env;
  j["request_parallelism"] = request_parallelism;
  if (!oracle_target.empty()) j["oracle_target"] = oracle_target;
  return j;
}

bool is_supported_language(std::string_view code) {
  if (code == "en") return true;
  return std::find(std::begin(kPivotLanguages), std::end(kPivotLanguages),
                   code) != std::end(kPivotLanguages);
}

namespace {

constexpr std::string_view kMarkerLetters = "XYZABCDEFGHIJKLMNOPQRSTUVW";

}  // namespace

std::string blank_marker(std::size_t index) {
  if (index < kMarkerLetters.size()) {
    return std::string("<") + kMarkerLetters[index] + ">";
  }
  return "<X" + std::to_string(index) + ">";
}

std::size_t count_blank_markers(std::string_view text) {
  std::size_t n = 0;
  while (text.find(blank_marker(n)) != std::string_view::npos) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

const std::unordered_map<std::string, std::size_t>& synonym_index() {
  static const auto index = [] {
    std::unordered_map<std::string, std::size_t> m;
    const auto table = MockBackend::synonym_table();
    for (std::size_t row = 0; row < table.size(); ++row) {
      for (auto word : table[row]) m.emplace(std::string(word), row);
    }
    return m;
  }();
  return index;
}

bool is_leading_punct(char c) { return c == '"' || c == '\'' || c == '('; }

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == '?' || c == '!' || c == ':' ||
         c == ';' || c == '"' || c == '\'' || c == ')';
}

std::string substitute_word(std::string_view token, std::string_view seed) {
  std::size_t b = 0, e = token.size();
  while (b < e && is_leading_punct(token[b])) ++b;
  while (e > b && is_trailing_punct(token[e - 1])) --e;
  const std::string_view core = token.substr(b, e - b);
  if (core.empty()) return std::string(token);

  const auto& index = synonym_index();
  auto it = index.find(to_lower_ascii(core));
  if (it == index.end()) return std::string(token);

  const auto& row = MockBackend::synonym_table()[it->second];
  std::string pick(row[hash_fields({core, seed}) % row.size()]);
  if (std::isupper(static_cast<unsigned char>(core[0]))) {
    pick[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(pick[0])));
  }
  std::string out(token.substr(0, b));
  out += pick;
  out += token.substr(e);
  return out;
}

std::vector<std::size_t> language_permutation(std::string_view lang,
                                              std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(fnv1a64(lang));
  fisher_yates(perm, rng);
  return perm;
}

std::string to_pivot(std::string_view text, std::string_view lang) {
  const auto words = split_words(text);
  const auto perm = language_permutation(lang, words.size());
  std::vector<std::string> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out[i] = words[perm[i]];
  return "[" + std::string(lang) + "] " + join(out, " ");
}

std::string from_pivot(std::string_view text, std::string_view lang) {
  const std::string marker = "[" + std::string(lang) + "]";
  std::string_view body = trim(text);
  if (body.substr(0, marker.size()) == marker) {
    body.remove_prefix(marker.size());
    const auto words = split_words(body);
    const auto perm = language_permutation(lang, words.size());
    std::vector<std::string> out(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) out[perm[i]] = words[i];
    return MockBackend::paraphrase(join(out, " "), lang);
  }
  return MockBackend::paraphrase(body, lang);
}

}  // namespace

double MockBackend::mock_logprob(std::string_view prompt,
                                 std::string_view choice) {
  return -static_cast<double>(hash_fields({prompt, choice}) % 1000) / 100.0;
}

std::string MockBackend::paraphrase(std::string_view text,
                                    std::string_view seed) {
  std::vector<std::string> out;
  for (const auto& tok : whitespace_tokens(text)) {
    out.push_back(substitute_word(tok.text, seed));
  }
  return join(out, " ");
}

std::string MockBackend::continuation_payload(std::string_view prompt) {
  constexpr std::string_view kFirst = "Sentence 1:";
  constexpr std::string_view kSecond = "Sentence 2:";
  const std::size_t second = prompt.rfind(kSecond);
  if (second == std::string_view::npos) return std::string(trim(prompt));
  const std::size_t first = prompt.rfind(kFirst, second);
  if (first == std::string_view::npos) return std::string(trim(prompt));
  std::string_view payload = trim(
      prompt.substr(first + kFirst.size(), second - first - kFirst.size()));
  if (!payload.empty() && payload.back() == ',') payload.remove_suffix(1);
  return std::string(trim(payload));
}

ScoreResponse MockBackend::score_choices(const ScoreRequest& req) const {
  if (req.choices.empty()) {
    throw BackendError(BackendError::Kind::InvalidRequest, "no choices");
  }
  if (req.prompt.empty()) {
    throw BackendError(BackendError::Kind::InvalidRequest, "empty prompt");
  }
  ScoreResponse resp;
  resp.logprobs.reserve(req.choices.size());
  for (const auto& c : req.choices) {
    resp.logprobs.push_back(mock_logprob(req.prompt, c));
  }
  resp.forward_passes = static_cast<long>(req.choices.size());
  return resp;
}

GenResponse MockBackend::generate(const GenRequest& req) const {
  if (req.max_tokens < 1) {
    throw BackendError(BackendError::Kind::InvalidRequest, "max_tokens < 1");
  }
  auto words = split_words(
      paraphrase(continuation_payload(req.prompt), std::to_string(req.seed)));
  if (words.size() > static_cast<std::size_t>(req.max_tokens)) {
    words.resize(static_cast<std::size_t>(req.max_tokens));
  }
  std::string text = join(words, " ");
  for (const auto& stop : req.stop) {
    if (stop.empty()) continue;
    const auto at = text.find(stop);
    if (at != std::string::npos) text.resize(at);
  }
  return {text, kGenerationForwardPasses};
}

FillResponse MockBackend::fill_blanks(const FillRequest& req) const {
  const std::size_t blanks = count_blank_markers(req.text_with_blanks);
  if (blanks == 0) {
    throw BackendError(BackendError::Kind::NoBlanks, "no blank markers");
  }
  if (req.n_candidates < 1) {
    throw BackendError(BackendError::Kind::InvalidRequest, "n_candidates < 1");
  }
  const auto fillers = filler_table();
  FillResponse resp;
  for (int k = 0; k < req.n_candidates; ++k) {
    FillCandidate cand;
    for (std::size_t i = 0; i < blanks; ++i) {
      const auto h = hash_fields(
          {req.text_with_blanks, std::to_string(i), std::to_string(k)});
      cand.fills.emplace_back(fillers[h % fillers.size()]);
    }
    cand.score = -static_cast<double>(k);
    resp.candidates.push_back(std::move(cand));
  }
  resp.forward_passes = kGenerationForwardPasses * req.n_candidates;
  return resp;
}

TranslateResponse MockBackend::translate(const TranslateRequest& req) const {
  if (!is_supported_language(req.src) || !is_supported_language(req.tgt) ||
      req.src == req.tgt) {
    throw BackendError(BackendError::Kind::UnsupportedLanguage,
                       req.src + "->" + req.tgt);
  }
  std::string text = req.text;
  if (req.src != "en") text = from_pivot(text, req.src);
  if (req.tgt != "en") text = to_pivot(text, req.tgt);
  return {text, kGenerationForwardPasses};
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

std::vector<std::string> protected_tokens(std::string_view template_text) {
  try {
    return sentinel_aware_tokens(protect(Template::parse(template_text)).text);
  } catch (const TemplateError&) {
    return sentinel_aware_tokens(template_text);
  }
}

}  // namespace

OracleBackend::OracleBackend(Template hidden)
    : hidden_(std::move(hidden)),
      hidden_tokens_(sentinel_aware_tokens(protect(hidden_).text)) {}

double OracleBackend::similarity(std::string_view candidate_text) const {
  const auto tokens = protected_tokens(candidate_text);
  const std::size_t longest = std::max(tokens.size(), hidden_tokens_.size());
  if (longest == 0) return 1.0;
  const auto dist = levenshtein(tokens, hidden_tokens_);
  return 1.0 - static_cast<double>(dist) / static_cast<double>(longest);
}

double OracleBackend::threshold(double sim) {
  return std::clamp(sim, 0.05, 0.95);
}

double OracleBackend::draw(std::string_view candidate_text, int example_index) {
  const auto h =
      hash_fields({candidate_text, std::to_string(example_index)}) % 1000000ull;
  return static_cast<double>(h) / 1e6;
}

bool OracleBackend::oracle_score(std::string_view candidate_text,
                                 int example_index) const {
  return draw(candidate_text, example_index) <
         threshold(similarity(candidate_text));
}

ScoreResponse OracleBackend::score_choices(const ScoreRequest& req) const {
  if (!req.oracle) return MockBackend::score_choices(req);
  if (req.choices.empty()) {
    throw BackendError(BackendError::Kind::InvalidRequest, "no choices");
  }
  const auto& ctx = *req.oracle;
  const std::size_t n = req.choices.size();
  const auto gold = static_cast<std::size_t>(ctx.gold);
  if (gold >= n) {
    throw BackendError(BackendError::Kind::InvalidRequest, "gold out of range");
  }
  ScoreResponse resp;
  resp.logprobs.assign(n, -2.0);
  if (n == 1 || oracle_score(ctx.template_text, ctx.example_index)) {
    resp.logprobs[gold] = 0.0;
  } else {
    resp.logprobs[gold] = -1.0;
    resp.logprobs[(gold + 1) % n] = 0.0;
  }
  resp.forward_passes = static_cast<long>(n);
  return resp;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  cfg.check();
  switch (cfg.kind) {
    case BackendKind::mock:
      return std::make_unique<MockBackend>();
    case BackendKind::oracle:
      return std::make_unique<OracleBackend>(Template::parse(cfg.oracle_target));
    case BackendKind::http:
      return std::make_unique<HttpBackend>(cfg);
  }
  throw std::invalid_argument("unknown backend kind");
}

// ---------------------------------------------------------------------------
// Wire

namespace wire {

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw BackendError(BackendError::Kind::MalformedResponse, why);
}

[[noreturn]] void invalid(const std::string& why) {
  throw BackendError(BackendError::Kind::InvalidRequest, why);
}

template <typename Fail>
const json& field(const json& j, const char* key, Fail fail) {
  if (!j.is_object() || !j.contains(key)) fail(std::string("missing '") + key + "'");
  return j.at(key);
}

template <typename Fail>
std::string string_field(const json& j, const char* key, Fail fail) {
  const json& v = field(j, key, fail);
  if (!v.is_string()) fail(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename Fail>
std::vector<std::string> string_array(const json& j, const char* key, Fail fail) {
  const json& v = field(j, key, fail);
  if (!v.is_array()) fail(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail(std::string("'") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

template <typename Fail>
std::int64_t int_field(const json& j, const char* key, Fail fail) {
  const json& v = field(j, key, fail);
  if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

template <typename Fail>
double number_field(const json& j, const char* key, Fail fail) {
  const json& v = field(j, key, fail);
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

json encode(const ScoreRequest& r) {
  return {{"prompt", r.prompt}, {"choices", r.choices}};
}
json encode(const ScoreResponse& r) {
  return {{"logprobs", r.logprobs}, {"forward_passes", r.forward_passes}};
}
json encode(const GenRequest& r) {
  return {{"prompt", r.prompt},
          {"max_tokens", r.max_tokens},
          {"top_p", r.top_p},
          {"stop", r.stop},
          {"seed", r.seed}};
}
json encode(const GenResponse& r) { return {{"text", r.text}}; }
json encode(const FillRequest& r) {
  return {{"text", r.text_with_blanks}, {"n_candidates", r.n_candidates}};
}
json encode(const FillResponse& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"fills", c.fills}, {"score", c.score}});
  }
  return {{"candidates", cands}};
}
json encode(const TranslateRequest& r) {
  return {{"text", r.text}, {"src", r.src}, {"tgt", r.tgt}};
}
json encode(const TranslateResponse& r) { return {{"text", r.text}}; }

ScoreRequest decode_score_request(const json& j) {
  ScoreRequest r;
  r.prompt = string_field(j, "prompt", invalid);
  r.choices = string_array(j, "choices", invalid);
  if (r.choices.empty()) invalid("'choices' is empty");
  return r;
}

GenRequest decode_gen_request(const json& j) {
  GenRequest r;
  r.prompt = string_field(j, "prompt", invalid);
  r.max_tokens = static_cast<int>(int_field(j, "max_tokens", invalid));
  r.top_p = number_field(j, "top_p", invalid);
  r.stop = string_array(j, "stop", invalid);
  r.seed = int_field(j, "seed", invalid);
  if (r.max_tokens < 1) invalid("'max_tokens' must be >= 1");
  if (!(r.top_p > 0.0 && r.top_p <= 1.0)) invalid("'top_p' must be in (0,1]");
  return r;
}

FillRequest decode_fill_request(const json& j) {
  FillRequest r;
  r.text_with_blanks = string_field(j, "text", invalid);
  r.n_candidates = static_cast<int>(int_field(j, "n_candidates", invalid));
  if (r.n_candidates < 1) invalid("'n_candidates' must be >= 1");
  return r;
}

TranslateRequest decode_translate_request(const json& j) {
  TranslateRequest r;
  r.text = string_field(j, "text", invalid);
  r.src = string_field(j, "src", invalid);
  r.tgt = string_field(j, "tgt", invalid);
  return r;
}

ScoreResponse decode_score_response(const json& j) {
  ScoreResponse r;
  const auto& lp = field(j, "logprobs", malformed);
  if (!lp.is_array()) malformed("'logprobs' must be an array");
  for (const auto& v : lp) {
    if (!v.is_number()) malformed("'logprobs' must hold numbers");
    r.logprobs.push_back(v.get<double>());
  }
  r.forward_passes = static_cast<long>(int_field(j, "forward_passes", malformed));
  if (r.forward_passes < 0) malformed("negative forward_passes");
  return r;
}

GenResponse decode_gen_response(const json& j) {
  return {string_field(j, "text", malformed), kGenerationForwardPasses};
}

FillResponse decode_fill_response(const json& j) {
  FillResponse r;
  const auto& cands = field(j, "candidates", malformed);
  if (!cands.is_array()) malformed("'candidates' must be an array");
  for (const auto& c : cands) {
    FillCandidate fc;
    fc.fills = string_array(c, "fills", malformed);
    fc.score = number_field(c, "score", malformed);
    r.candidates.push_back(std::move(fc));
  }
  r.forward_passes =
      kGenerationForwardPasses * static_cast<long>(r.candidates.size());
  return r;
}

TranslateResponse decode_translate_response(const json& j) {
  return {string_field(j, "text", malformed), kGenerationForwardPasses};
}

}  // namespace wire

}  // namespace gps
