#include "gps/scoring.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace gps {

using nlohmann::json;

const char* to_string(ScorerKind kind) {
  return kind == ScorerKind::accuracy ? "accuracy" : "avg_logits";
}

ScorerKind scorer_from_string(const std::string& name) {
  if (name == "accuracy") return ScorerKind::accuracy;
  if (name == "avg_logits") return ScorerKind::avg_logits;
  throw std::invalid_argument("unknown scorer '" + name + "'");
}

json PromptScore::to_json() const {
  json per = json::array();
  for (const auto& e : per_example) {
    per.push_back({{"id", e.example_id},
                   {"predicted", e.predicted},
                   {"gold_logprob", e.gold_logprob}});
  }
  json j{{"prompt_id", prompt_id},
         {"kind", to_string(kind)},
         {"failed", failed},
         {"correct", correct},
         {"total", total},
         {"per_example", per},
         {"forward_passes", forward_passes}};
  if (failed) {
    j["metric"] = nullptr;
    j["failure"] = failure;
  } else {
    j["metric"] = metric;
  }
  return j;
}

PromptScore PromptScore::from_json(const json& j) {
  PromptScore s;
  s.prompt_id = j.at("prompt_id").get<std::string>();
  s.kind = scorer_from_string(j.at("kind").get<std::string>());
  s.failed = j.at("failed").get<bool>();
  if (s.failed) {
    s.failure = j.value("failure", std::string());
  } else {
    s.metric = j.at("metric").get<double>();
  }
  s.correct = j.at("correct").get<long>();
  s.total = j.at("total").get<long>();
  for (const auto& e : j.at("per_example")) {
    s.per_example.push_back({e.at("id").get<std::string>(),
                             e.at("predicted").get<int>(),
                             e.at("gold_logprob").get<double>()});
  }
  s.forward_passes = j.at("forward_passes").get<long>();
  return s;
}

int compare_quality(const PromptScore& a, const PromptScore& b) {
  if (a.failed || b.failed) return (a.failed ? 0 : 1) - (b.failed ? 0 : 1);
  if (a.kind == ScorerKind::accuracy && b.kind == ScorerKind::accuracy &&
      a.total > 0 && b.total > 0) {
    const long lhs = a.correct * b.total;
    const long rhs = b.correct * a.total;
    return (lhs > rhs) - (lhs < rhs);
  }
  return (a.metric > b.metric) - (a.metric < b.metric);
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

PromptScore score_impl(const Template& t, const EvalContext& ctx,
                       ScorerKind kind) {
  PromptScore s;
  s.prompt_id = t.id();
  s.kind = kind;
  s.total = static_cast<long>(ctx.dev.dev.size());
  double logit_sum = 0.0;
  for (std::size_t i = 0; i < ctx.dev.dev.size(); ++i) {
    const Example& ex = ctx.dev.dev[i];
    std::string prompt;
    try {
      prompt = render(t, ex.values);
    } catch (const TemplateError& e) {
      s.failed = true;
      s.failure = e.what();
      s.per_example.clear();
      s.correct = 0;
      s.metric = 0.0;
      return s;
    }
    ScoreRequest req;
    req.prompt = std::move(prompt);
    req.choices = effective_choices(ctx.task, ex);
    req.oracle = OracleContext{t.raw(), static_cast<int>(i), ex.gold};
    const ScoreResponse resp = ctx.backend.score_choices(req);
    if (resp.logprobs.size() != req.choices.size()) {
      throw BackendError(BackendError::Kind::MalformedResponse,
                         "logprobs length does not match choices");
    }
    s.forward_passes += resp.forward_passes;
    const auto predicted = argmax_lowest(resp.logprobs);
    const double gold_lp = resp.logprobs[static_cast<std::size_t>(ex.gold)];
    if (static_cast<int>(predicted) == ex.gold) ++s.correct;
    logit_sum += gold_lp;
    s.per_example.push_back({ex.id, static_cast<int>(predicted), gold_lp});
  }
  if (s.total == 0) {
    s.metric = 0.0;
  } else if (kind == ScorerKind::accuracy) {
    s.metric = static_cast<double>(s.correct) / static_cast<double>(s.total);
  } else {
    s.metric = logit_sum / static_cast<double>(s.total);
  }
  return s;
}

}  // namespace

PromptScore score_accuracy(const Template& t, const EvalContext& ctx) {
  return score_impl(t, ctx, ScorerKind::accuracy);
}

PromptScore score_avg_logits(const Template& t, const EvalContext& ctx) {
  return score_impl(t, ctx, ScorerKind::avg_logits);
}

PromptScore score_prompt(const Template& t, const EvalContext& ctx,
                         ScorerKind kind) {
  return score_impl(t, ctx, kind);
}

PoolError::PoolError(std::string message,
                     std::vector<std::optional<PromptScore>> partial)
    : std::runtime_error(std::move(message)), partial_(std::move(partial)) {}

std::vector<PromptScore> evaluate_pool(std::span<const Template> templates,
                                       const EvalContext& ctx, ScorerKind kind,
                                       int parallelism) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<std::optional<PromptScore>> slots(templates.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex error_mu;
  std::string first_error;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= templates.size()) return;
      try {
        slots[i] = score_impl(templates[i], ctx, kind);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        if (!abort.exchange(true)) {
          first_error = "prompt " + std::to_string(i) + ": " + e.what();
        }
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(
      static_cast<std::size_t>(parallelism), templates.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t k = 0; k < n_threads; ++k) threads.emplace_back(worker);
  }

  if (abort.load()) throw PoolError(first_error, std::move(slots));
  std::vector<PromptScore> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace gps
