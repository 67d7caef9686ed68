#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gps/backend.hpp"
#include "gps/task_data.hpp"
#include "gps/template.hpp"

namespace gps {

enum class ScorerKind { accuracy, avg_logits };

const char* to_string(ScorerKind kind);
ScorerKind scorer_from_string(const std::string& name);

struct ExampleOutcome {
  std::string example_id;
  int predicted = 0;
  double gold_logprob = 0.0;

  bool operator==(const ExampleOutcome&) const = default;
};

struct PromptScore {
  std::string prompt_id;
  ScorerKind kind = ScorerKind::accuracy;
  bool failed = false;  // ScoringFailed: ranks below every scored prompt
  std::string failure;
  double metric = 0.0;
  // Exact accuracy as a rational; for avg_logits these still count hits.
  long correct = 0;
  long total = 0;
  std::vector<ExampleOutcome> per_example;
  long forward_passes = 0;

  nlohmann::json to_json() const;
  static PromptScore from_json(const nlohmann::json& j);
  bool operator==(const PromptScore&) const = default;
};

/// Three-way comparison on quality: >0 when a is better than b. Failed scores
/// lose to everything; accuracies compare as exact rationals.
int compare_quality(const PromptScore& a, const PromptScore& b);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

struct EvalContext {
  const TaskSpec& task;
  const DataSplit& dev;
  const Backend& backend;
};

PromptScore score_accuracy(const Template& t, const EvalContext& ctx);
PromptScore score_avg_logits(const Template& t, const EvalContext& ctx);
PromptScore score_prompt(const Template& t, const EvalContext& ctx,
                         ScorerKind kind);

/// Raised when a backend error aborts a pool evaluation. Entries that
/// finished before the abort are kept.
class PoolError : public std::runtime_error {
 public:
  PoolError(std::string message, std::vector<std::optional<PromptScore>> partial);

  const std::vector<std::optional<PromptScore>>& partial() const {
    return partial_;
  }

 private:
  std::vector<std::optional<PromptScore>> partial_;
};

/// Scores every template; output order matches input order for any
/// parallelism.
std::vector<PromptScore> evaluate_pool(std::span<const Template> templates,
                                       const EvalContext& ctx, ScorerKind kind,
                                       int parallelism);

}  // namespace gps
