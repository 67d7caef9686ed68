#include "gps/config.hpp"

#include <fstream>

namespace gps {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError(std::string("invalid JSON in ") + what + " " + path.string());
  }
  return j;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::string> load_prompt_set(const fs::path& path) {
  const json j = read_json(path, "prompt set");
  const json& list = j.is_object() ? j.value("prompts", json()) : j;
  if (!list.is_array()) throw ConfigError("prompt set must hold an array of strings");
  std::vector<std::string> out;
  for (const auto& p : list) {
    if (!p.is_string()) throw ConfigError("prompt set entries must be strings");
    out.push_back(p.get<std::string>());
  }
  return out;
}

RunConfig RunConfig::load(const fs::path& path) {
  const json j = read_json(path, "config");
  auto cfg = from_json(j, path.parent_path());
  cfg.source = path;
  return cfg;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const int version = j.value("version", kConfigVersion);
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }
  RunConfig cfg;
  cfg.raw = j;
  try {
    if (j.contains("task") && j["task"].is_object()) {
      cfg.task = TaskSpec::from_json(j["task"]);
    } else if (j.contains("task_file")) {
      cfg.task = TaskSpec::load(resolve(base_dir, j["task_file"].get<std::string>()));
    } else {
      throw ConfigError("config needs 'task' or 'task_file'");
    }

    if (!j.contains("dataset")) throw ConfigError("config needs 'dataset'");
    cfg.dataset = resolve(base_dir, j["dataset"].get<std::string>());
    if (!fs::exists(cfg.dataset)) {
      throw ConfigError("dataset file not found: " + cfg.dataset.string());
    }

    if (j.contains("prompts")) {
      cfg.prompts = j["prompts"].get<std::vector<std::string>>();
    } else if (j.contains("prompts_file")) {
      cfg.prompts =
          load_prompt_set(resolve(base_dir, j["prompts_file"].get<std::string>()));
    } else {
      throw ConfigError("config needs 'prompts' or 'prompts_file'");
    }
    if (cfg.prompts.empty()) throw ConfigError("no seed prompts");

    if (j.contains("splits")) {
      const auto& s = j["splits"];
      cfg.splits.n_splits = s.value("n_splits", cfg.splits.n_splits);
      cfg.splits.dev_size = s.value("dev_size", cfg.splits.dev_size);
      cfg.splits.base_seed = s.value("base_seed", cfg.splits.base_seed);
      cfg.splits.heldout_size = s.value("heldout_size", cfg.splits.heldout_size);
    }
    if (cfg.splits.n_splits < 1) throw ConfigError("splits.n_splits must be >= 1");
    if (cfg.splits.dev_size < 1) throw ConfigError("splits.dev_size must be >= 1");
    if (cfg.splits.heldout_size < 0) {
      throw ConfigError("splits.heldout_size must be >= 0");
    }

    cfg.backend = BackendConfig::from_json(j.value("backend", json::object()));
    json search = j.value("search", json::object());
    if (j.contains("mutation")) search["mutation"] = j["mutation"];
    cfg.search = SearchConfig::from_json(search);
    // Feasibility of K and children_per_parent against the seed set.
    (void)cfg.search.resolved(cfg.prompts.size());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::vector<Template> RunConfig::seed_templates() const {
  std::vector<Template> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    try {
      out.push_back(Template::parse(prompts[i]));
    } catch (const TemplateError& e) {
      throw ConfigError("seed prompt " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gps
