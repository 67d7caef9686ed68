#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gps/backend.hpp"
#include "gps/task_data.hpp"
#include "gps/template.hpp"

namespace gps {

enum class Operator { back_translation, cloze, sentence_continuation };

const char* to_string(Operator op);
Operator operator_from_string(const std::string& name);

inline constexpr std::string_view kDefaultContinuationPrompt =
    "Write two sentences that mean the same thing. Sentence 1: {parent}, "
    "Sentence 2:";

struct MutationConfig {
  Operator op = Operator::sentence_continuation;
  std::vector<std::string> bt_languages{std::begin(kPivotLanguages),
                                        std::end(kPivotLanguages)};
  double mask_fraction = 0.15;
  int n_fill_candidates = 5;
  std::string sc_meta_prompt{kDefaultContinuationPrompt};
  double top_p = 0.9;
  int children_per_parent = 0;  // 0 = derive from pool size and K
  int max_gen_tokens = 64;
  std::int64_t seed = 0;

  void check() const;
  static MutationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class MutationError : public std::runtime_error {
 public:
  enum class Kind { AllPivotsFailed, NoMaskableTokens };
  MutationError(Kind kind, std::string message);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Candidate {
  Template tmpl;
  std::string parent_id;
  std::string op;  // operator tag, or "seed"
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Candidate from_json(const nlohmann::json& j);
};

struct MutationResult {
  std::vector<Candidate> children;
  std::vector<std::string> dropped;  // one reason per rejected child
  long forward_passes = 0;
};

MutationResult mutate_back_translation(const Template& parent,
                                       const Backend& backend,
                                       const MutationConfig& cfg);

MutationResult mutate_cloze(const Template& parent, const Backend& backend,
                            const MutationConfig& cfg);

MutationResult mutate_sentence_continuation(const Template& parent,
                                            const Backend& backend,
                                            const MutationConfig& cfg);

/// Runs cfg.op on the parent. Operator-level failures and empty yields fall
/// back to re-emitting the parent, tagged {"fallback": "keep_parent"}.
MutationResult reproduce(const Template& parent, const Backend& backend,
                         const MutationConfig& cfg);

/// Keeps candidates whose normalized text is new (against `existing` and
/// earlier kept candidates) and that pass validate_for_task. Order-preserving.
std::vector<Candidate> filter_candidates(std::vector<Candidate> candidates,
                                         const std::set<std::string>& existing,
                                         const TaskSpec& schema);

}  // namespace gps
