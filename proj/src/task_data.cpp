#include "gps/task_data.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "gps/text.hpp"

namespace gps {

using nlohmann::json;

DataError::DataError(Kind kind, std::string message, std::size_t line)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      line_(line) {}

const char* to_string(DataError::Kind kind) {
  using K = DataError::Kind;
  switch (kind) {
    case K::Io: return "Io";
    case K::ParseError: return "ParseError";
    case K::SchemaMismatch: return "SchemaMismatch";
    case K::BadLabel: return "BadLabel";
    case K::InsufficientClassData: return "InsufficientClassData";
    case K::DuplicateId: return "DuplicateId";
    case K::BadTaskSpec: return "BadTaskSpec";
  }
  return "DataError";
}

void TaskSpec::check() const {
  auto fail = [this](const std::string& why) {
    throw DataError(DataError::Kind::BadTaskSpec, name + ": " + why);
  };
  if (name.empty()) fail("empty task name");
  for (const auto& f : input_fields) {
    if (!is_identifier(f.first)) fail("bad field name '" + f.first + "'");
  }
  for (const auto& f : control_fields) {
    if (!is_identifier(f)) fail("bad field name '" + f + "'");
  }
  for (const auto& r : required_placeholders) {
    if (!has_field(r)) fail("required placeholder '" + r + "' is not a field");
  }
  if (choice_field && !answer_choices.empty()) {
    fail("answer_choices and choice_field are mutually exclusive");
  }
  if (!choice_field) {
    if (answer_choices.size() < 2) fail("need at least two answer choices");
    if (static_cast<int>(answer_choices.size()) != num_classes) {
      fail("num_classes does not match answer_choices");
    }
  }
  if (num_classes < 1) fail("num_classes must be positive");
}

TaskSpec TaskSpec::from_json(const json& j) {
  try {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    for (const auto& [k, v] : j.at("input_fields").items()) {
      t.input_fields[k] = v.is_string() ? v.get<std::string>() : std::string();
    }
    if (j.contains("control_fields")) {
      t.control_fields = j["control_fields"].get<std::set<std::string>>();
    }
    if (j.contains("answer_choices")) {
      t.answer_choices = j["answer_choices"].get<std::vector<std::string>>();
    }
    if (j.contains("choice_field") && !j["choice_field"].is_null()) {
      t.choice_field = j["choice_field"].get<std::string>();
    }
    t.num_classes = j.contains("num_classes")
                        ? j["num_classes"].get<int>()
                        : static_cast<int>(t.answer_choices.size());
    if (j.contains("required_placeholders")) {
      t.required_placeholders =
          j["required_placeholders"].get<std::set<std::string>>();
    }
    t.check();
    return t;
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::BadTaskSpec, e.what());
  }
}

json TaskSpec::to_json() const {
  json j;
  j["name"] = name;
  j["input_fields"] = input_fields;
  j["control_fields"] = control_fields;
  if (choice_field) {
    j["choice_field"] = *choice_field;
  } else {
    j["answer_choices"] = answer_choices;
  }
  j["num_classes"] = num_classes;
  j["required_placeholders"] = required_placeholders;
  return j;
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw DataError(DataError::Kind::BadTaskSpec,
                    "invalid JSON in " + path.string());
  }
  return from_json(j);
}

const std::vector<std::string>& effective_choices(const TaskSpec& task,
                                                  const Example& example) {
  if (task.choice_field && example.choices) return *example.choices;
  return task.answer_choices;
}

Example parse_example(const json& j, const TaskSpec& task, std::size_t line) {
  auto parse_error = [line](const std::string& why) {
    return DataError(DataError::Kind::ParseError,
                     "line " + std::to_string(line) + ": " + why, line);
  };
  if (!j.is_object()) throw parse_error("record is not a JSON object");
  for (const char* key : {"id", "values", "gold"}) {
    if (!j.contains(key)) throw parse_error(std::string("missing key '") + key + "'");
  }
  if (!j["id"].is_string()) throw parse_error("'id' must be a string");
  if (!j["values"].is_object()) throw parse_error("'values' must be an object");
  if (!j["gold"].is_number_integer()) throw parse_error("'gold' must be an integer");

  Example ex;
  ex.id = j["id"].get<std::string>();
  for (const auto& [k, v] : j["values"].items()) {
    if (!v.is_string()) {
      throw DataError(DataError::Kind::SchemaMismatch,
                      "line " + std::to_string(line) + ": field '" + k +
                          "' must be a string",
                      line);
    }
    ex.values[k] = v.get<std::string>();
  }
  auto require_field = [&](const std::string& field) {
    if (!ex.values.contains(field)) {
      throw DataError(DataError::Kind::SchemaMismatch,
                      "line " + std::to_string(line) + ": missing field '" +
                          field + "'",
                      line);
    }
  };
  for (const auto& f : task.input_fields) require_field(f.first);
  for (const auto& f : task.control_fields) require_field(f);

  if (j.contains("choices")) {
    if (!task.choice_field) {
      throw DataError(DataError::Kind::SchemaMismatch,
                      "line " + std::to_string(line) +
                          ": 'choices' given but task uses static choices",
                      line);
    }
    if (!j["choices"].is_array()) throw parse_error("'choices' must be an array");
    ex.choices = j["choices"].get<std::vector<std::string>>();
    if (ex.choices->empty()) throw parse_error("'choices' is empty");
  } else if (task.choice_field) {
    throw DataError(DataError::Kind::SchemaMismatch,
                    "line " + std::to_string(line) + ": missing 'choices'",
                    line);
  }

  const auto n = static_cast<std::int64_t>(effective_choices(task, ex).size());
  const auto gold = j["gold"].get<std::int64_t>();
  if (gold < 0 || gold >= n || (!task.choice_field && gold >= task.num_classes)) {
    throw DataError(DataError::Kind::BadLabel,
                    "example '" + ex.id + "' has gold " + std::to_string(gold),
                    line);
  }
  ex.gold = static_cast<int>(gold);
  return ex;
}

std::vector<Example> load_dataset(const std::filesystem::path& path,
                                  const TaskSpec& task) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(DataError::Kind::ParseError,
                      "line " + std::to_string(lineno) + ": invalid JSON",
                      lineno);
    }
    out.push_back(parse_example(j, task, lineno));
  }
  return out;
}

std::vector<int> class_quotas(int total, int num_classes) {
  std::vector<int> quotas(static_cast<std::size_t>(num_classes),
                          total / num_classes);
  for (int c = 0; c < total % num_classes; ++c) ++quotas[c];
  return quotas;
}

DataSplit sample_balanced_dev(std::span<const Example> pool, int total,
                              std::int64_t seed, int num_classes) {
  if (total < 1 || num_classes < 1) {
    throw std::invalid_argument("total and num_classes must be positive");
  }
  std::vector<std::vector<const Example*>> by_class(
      static_cast<std::size_t>(num_classes));
  std::unordered_set<std::string> ids;
  for (const auto& ex : pool) {
    if (!ids.insert(ex.id).second) {
      throw DataError(DataError::Kind::DuplicateId, "duplicate id " + ex.id);
    }
    if (ex.gold < 0 || ex.gold >= num_classes) {
      throw DataError(DataError::Kind::BadLabel,
                      "example '" + ex.id + "' outside class range");
    }
    by_class[static_cast<std::size_t>(ex.gold)].push_back(&ex);
  }

  const auto quotas = class_quotas(total, num_classes);
  SplitMix64 rng(static_cast<std::uint64_t>(seed));
  DataSplit split;
  split.seed = seed;
  split.size = total;
  for (int c = 0; c < num_classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(members.size()) < quotas[c]) {
      throw DataError(DataError::Kind::InsufficientClassData,
                      "class " + std::to_string(c) + " has " +
                          std::to_string(members.size()) + " examples, needs " +
                          std::to_string(quotas[c]));
    }
    std::sort(members.begin(), members.end(),
              [](const Example* a, const Example* b) { return a->id < b->id; });
    fisher_yates(members, rng);
    for (int k = 0; k < quotas[c]; ++k) split.dev.push_back(*members[k]);
  }
  return split;
}

std::vector<DataSplit> make_splits(std::span<const Example> pool, int total,
                                   int n_splits, std::int64_t base_seed,
                                   int num_classes) {
  if (n_splits < 1) throw std::invalid_argument("n_splits must be >= 1");
  std::vector<DataSplit> out;
  out.reserve(static_cast<std::size_t>(n_splits));
  for (int i = 0; i < n_splits; ++i) {
    out.push_back(sample_balanced_dev(pool, total, base_seed + i, num_classes));
  }
  return out;
}

}  // namespace gps
