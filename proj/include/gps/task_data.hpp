#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gps {

class DataError : public std::runtime_error {
 public:
  enum class Kind {
    Io,
    ParseError,
    SchemaMismatch,
    BadLabel,
    InsufficientClassData,
    DuplicateId,
    BadTaskSpec,
  };

  DataError(Kind kind, std::string message, std::size_t line = 0);

  Kind kind() const { return kind_; }
  /// 1-based line for dataset errors, 0 otherwise.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

const char* to_string(DataError::Kind kind);

struct TaskSpec {
  std::string name;
  std::map<std::string, std::string> input_fields;  // name -> description
  std::set<std::string> control_fields;
  std::vector<std::string> answer_choices;  // static choices, or empty
  std::optional<std::string> choice_field;  // per-example choices
  int num_classes = 0;
  std::set<std::string> required_placeholders;

  bool has_field(const std::string& field) const {
    return input_fields.contains(field) || control_fields.contains(field);
  }

  /// Throws DataError(BadTaskSpec) when an invariant is violated.
  void check() const;

  static TaskSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static TaskSpec load(const std::filesystem::path& path);
};

struct Example {
  std::string id;
  std::map<std::string, std::string> values;
  int gold = 0;
  std::optional<std::vector<std::string>> choices;
};

/// The choice list an example is scored against.
const std::vector<std::string>& effective_choices(const TaskSpec& task,
                                                  const Example& example);

/// Validates one JSON record against the task schema.
Example parse_example(const nlohmann::json& j, const TaskSpec& task,
                      std::size_t line = 0);

std::vector<Example> load_dataset(const std::filesystem::path& path,
                                  const TaskSpec& task);

struct DataSplit {
  std::vector<Example> dev;
  std::int64_t seed = 0;
  int size = 0;
};

/// Per-class quota for a balanced draw: total / classes each, with the
/// remainder going to the lowest class indices.
std::vector<int> class_quotas(int total, int num_classes);

/// Balanced seeded draw. Within each class the pool ids are sorted, then
/// shuffled with SplitMix64(seed) (one generator shared across classes, which
/// are visited in index order) and the first quota items are kept.
DataSplit sample_balanced_dev(std::span<const Example> pool, int total,
                              std::int64_t seed, int num_classes);

std::vector<DataSplit> make_splits(std::span<const Example> pool, int total,
                                   int n_splits, std::int64_t base_seed,
                                   int num_classes);

}  // namespace gps
