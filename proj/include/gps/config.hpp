#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gps/backend.hpp"
#include "gps/search.hpp"
#include "gps/task_data.hpp"

namespace gps {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitPolicy {
  int n_splits = 3;
  int dev_size = 32;
  std::int64_t base_seed = 0;
  int heldout_size = 0;  // 0: no held-out scoring
};

inline constexpr int kConfigVersion = 1;

/// Run configuration file (JSON):
///   {
///     "version": 1,
///     "task": {...} | "task_file": "tasks/cb.json",
///     "dataset": "cb.jsonl",
///     "prompts": ["..."] | "prompts_file": "prompts/cb.json",
///     "splits":   {"n_splits": 3, "dev_size": 32, "base_seed": 0,
///                  "heldout_size": 0},
///     "backend":  {"kind": "mock" | "oracle" | "http", ...},
///     "search":   {"iterations": 6, "top_k": 0, "pool_size": 30, ...},
///     "mutation": {"operator": "sentence_continuation", ...}
///   }
/// Relative paths resolve against the config file's directory. Tokens never
/// live in the file; "backend.auth_env" names the variable holding one.
struct RunConfig {
  std::filesystem::path source;
  TaskSpec task;
  std::filesystem::path dataset;
  std::vector<std::string> prompts;
  SplitPolicy splits;
  BackendConfig backend;
  SearchConfig search;
  nlohmann::json raw;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir);

  /// Parses the seed prompts; throws ConfigError on a template error.
  std::vector<Template> seed_templates() const;
};

/// Prompt-set file: either a JSON array of template strings or an object
/// {"task": name, "prompts": [...]}.
std::vector<std::string> load_prompt_set(const std::filesystem::path& path);

}  // namespace gps
