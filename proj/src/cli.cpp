#include "gps/cli.hpp"

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

namespace gps {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

long long now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

fs::path checkpoint_path(const fs::path& dir, int split) {
  return dir / ("checkpoint_split" + std::to_string(split) + ".json");
}

// Examples outside the dev split, in pool order, capped at `limit`.
DataSplit heldout_split(std::span<const Example> pool, const DataSplit& dev, int limit) {
  std::set<std::string> used;
  for (const auto& ex : dev.dev) used.insert(ex.id);
  DataSplit out;
  out.seed = dev.seed;
  for (const auto& ex : pool) {
    if (static_cast<int>(out.dev.size()) >= limit) break;
    if (!used.contains(ex.id)) out.dev.push_back(ex);
  }
  out.size = static_cast<int>(out.dev.size());
  return out;
}

fs::path record_path(const fs::path& dir, int split) {
  return dir / ("run_split" + std::to_string(split) + ".json");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<int> parse_values(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("no values given");
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e) ||
      dynamic_cast<const TemplateError*>(&e) ||
      dynamic_cast<const CheckpointError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e)) {
    return kExitConfig;
  }
  if (const auto* se = dynamic_cast<const SearchError*>(&e)) {
    return se->kind() == SearchError::Kind::BackendFatal ? kExitBackend : kExitConfig;
  }
  if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const PoolError*>(&e)) {
    return kExitBackend;
  }
  return kExitInternal;
}

}  // namespace

SplitRunResult run_splits(const RunConfig& cfg, const SplitRunOptions& opts) {
  const auto pool = load_dataset(cfg.dataset, cfg.task);
  const auto splits = make_splits(pool, cfg.splits.dev_size, cfg.splits.n_splits,
                                  cfg.splits.base_seed, cfg.task.num_classes);
  const auto backend = make_backend(cfg.backend);
  const auto seeds = cfg.seed_templates();

  std::ofstream events;
  if (opts.events_path) {
    events.open(*opts.events_path, std::ios::app);
    if (!events) throw ConfigError("cannot open " + opts.events_path->string());
  }

  int start = 0;
  if (opts.resume) {
    start = opts.resume->meta.value("split_index", 0);
    if (start < 0 || start >= static_cast<int>(splits.size())) {
      throw CheckpointError(CheckpointError::Kind::CorruptCheckpoint,
                            "checkpoint split index out of range");
    }
    if (opts.resume->meta.value("task", std::string()) != cfg.task.name) {
      throw ConfigError("checkpoint belongs to a different task");
    }
  }

  SplitRunResult result;
  std::optional<int> budget = opts.halt_after;
  for (int i = start; i < static_cast<int>(splits.size()); ++i) {
    const DataSplit& split = splits[static_cast<std::size_t>(i)];
    const auto t0 = std::chrono::steady_clock::now();
    auto sink = [&events, i](const json& e) {
      if (!events.is_open()) return;
      json line = e;
      line["split"] = i;
      line["ts"] = now_ms();
      events << line.dump() << '\n';
      events.flush();
    };
    SearchContext ctx{cfg.task, split, *backend, sink};

    SearchState state;
    if (i == start && opts.resume) {
      state = *opts.resume;
    } else {
      state = init_search(cfg.search, seeds, cfg.task);
      state.meta = {{"split_index", i},
                    {"split_seed", split.seed},
                    {"task", cfg.task.name}};
      sink({{"event", "run_start"},
            {"task", cfg.task.name},
            {"split_seed", split.seed},
            {"dev_ids", [&] {
               json ids = json::array();
               for (const auto& ex : split.dev) ids.push_back(ex.id);
               return ids;
             }()},
            {"config", state.config.to_json()}});
    }

    std::optional<fs::path> ckpt;
    if (opts.checkpoint_dir) ckpt = checkpoint_path(*opts.checkpoint_dir, i);
    const int before = static_cast<int>(state.generations.size()) +
                       (state.phase == Phase::done ? 1 : 0);
    state = run_to_completion(std::move(state), ctx, ckpt, budget);
    if (budget) {
      const int after = static_cast<int>(state.generations.size()) +
                        (state.phase == Phase::done ? 1 : 0);
      *budget -= after - before;
    }
    if (state.phase != Phase::done) {
      // The budget may run out before this split advanced at all.
      if (ckpt) save_checkpoint(state, *ckpt);
      result.halted = true;
      result.halted_checkpoint = ckpt;
      return result;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto record = make_run_record(state, cfg.task.name + "-split" + std::to_string(i),
                                  cfg.task.name, cfg.raw, i, split, wall);
    if (cfg.splits.heldout_size > 0 && !state.result.empty()) {
      const DataSplit held = heldout_split(pool, split, cfg.splits.heldout_size);
      if (!held.dev.empty()) {
        const auto s = score_prompt(state.result.front().candidate.tmpl,
                                    {cfg.task, held, *backend},
                                    state.config.resolved_scorer());
        record.heldout_top1 = s.failed ? 0.0 : s.metric;
        record.heldout_size = held.size;
      }
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const std::vector<int>& values,
                                      bool parallel_values) {
  for (int v : values) {
    if (axis == AblationAxis::val_size && (v < 8 || v > 128)) {
      throw ConfigError("val_size values must lie in 8..128");
    }
    if (axis == AblationAxis::iterations && (v < 0 || v > 9)) {
      throw ConfigError("iterations values must lie in 0..9");
    }
  }
  auto one = [&cfg, axis](int v) {
    RunConfig c = cfg;
    if (axis == AblationAxis::val_size) {
      c.splits.dev_size = v;
    } else {
      c.search.iterations = v;
    }
    AblationRow row;
    row.value = v;
    row.runs = run_splits(c, {}).records;
    std::vector<double> top1, held;
    for (const auto& r : row.runs) {
      top1.push_back(r.top1());
      if (r.heldout_top1) held.push_back(*r.heldout_top1);
    }
    row.metric = mean_std(top1);
    if (!held.empty()) row.heldout = mean_std(held);
    return row;
  };

  std::vector<AblationRow> rows;
  if (parallel_values) {
    std::vector<std::future<AblationRow>> futures;
    for (int v : values) futures.push_back(std::async(std::launch::async, one, v));
    for (auto& f : futures) rows.push_back(f.get());
  } else {
    for (int v : values) rows.push_back(one(v));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "value,mean,std,runs,heldout_mean,heldout_std\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%zu,", r.value, r.metric.mean,
                  r.metric.std, r.runs.size());
    out << line;
    if (r.heldout) {
      std::snprintf(line, sizeof line, "%.6f,%.6f", r.heldout->mean, r.heldout->std);
      out << line;
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

std::string ablation_curves_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "value,split,t,best_so_far\n";
  char line[128];
  for (const auto& r : rows) {
    for (const auto& run : r.runs) {
      for (const auto& g : run.generations) {
        std::snprintf(line, sizeof line, "%d,%d,%d,%.6f\n", r.value,
                      run.split_index, g.t, g.best_so_far);
        out << line;
      }
    }
  }
  return out.str();
}

CostModel cost_model_for(const RunConfig& cfg) {
  const auto resolved = cfg.search.resolved(cfg.prompts.size());
  CostModel m;
  m.iterations = resolved.iterations;
  m.pool_size = resolved.pool_size;
  m.top_k = resolved.top_k;
  m.dev_size = cfg.splits.dev_size;
  if (cfg.task.choice_field) {
    const auto pool = load_dataset(cfg.dataset, cfg.task);
    double sum = 0.0;
    for (const auto& ex : pool) sum += static_cast<double>(effective_choices(cfg.task, ex).size());
    m.choices_per_example = pool.empty() ? 1.0 : sum / static_cast<double>(pool.size());
  } else {
    m.choices_per_example = static_cast<double>(cfg.task.answer_choices.size());
  }
  return m;
}

namespace {

void print_summary(const std::vector<RunRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    out << "split " << r.split_index << " (seed " << r.split_seed
        << ", forward passes " << r.forward_passes << ")\n";
    for (std::size_t k = 0; k < r.final_top_k.size(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", r.final_top_k[k].metric);
      out << "  #" << k + 1 << " [" << buf << "] " << r.final_top_k[k].text << '\n';
    }
  }
  std::vector<double> top1;
  for (const auto& r : records) top1.push_back(r.top1());
  if (!top1.empty()) {
    const auto ms = mean_std(top1);
    char buf[96];
    std::snprintf(buf, sizeof buf, "top-1 metric: %.4f +- %.4f over %zu split(s)\n",
                  ms.mean, ms.std, top1.size());
    out << buf;
  }
}

int cmd_search(const std::string& config_path, const std::string& out_dir,
               const std::string& resume, int halt_after, std::ostream& out,
               std::ostream& err) {
  const auto cfg = RunConfig::load(config_path);
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  SplitRunOptions opts;
  opts.events_path = dir / "events.jsonl";
  opts.checkpoint_dir = dir;
  if (!resume.empty()) {
    opts.resume = load_checkpoint(resume);
  } else {
    std::ofstream(dir / "events.jsonl", std::ios::trunc);
  }
  if (halt_after >= 0) opts.halt_after = halt_after;

  const auto run = run_splits(cfg, opts);
  for (const auto& r : run.records) {
    write_text(record_path(dir, r.split_index), r.to_json().dump(2) + "\n");
  }
  if (run.halted) {
    err << "halted; resume with --resume "
        << (run.halted_checkpoint ? run.halted_checkpoint->string() : std::string("?"))
        << '\n';
    return kExitOk;
  }

  std::vector<RunRecord> all;
  for (int i = 0; i < cfg.splits.n_splits; ++i) {
    const auto p = record_path(dir, i);
    std::ifstream in(p);
    if (!in) continue;
    all.push_back(RunRecord::from_json(json::parse(in)));
  }
  print_summary(all, out);
  if (!all.empty()) {
    const auto rows = summarize_runs(all);
    write_text(dir / "report.csv", render_csv(rows));
  }
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& axis_name,
               const std::string& values_csv, const std::string& out_dir,
               bool parallel, std::ostream& out) {
  const auto cfg = RunConfig::load(config_path);
  AblationAxis axis;
  if (axis_name == "val_size") {
    axis = AblationAxis::val_size;
  } else if (axis_name == "iterations") {
    axis = AblationAxis::iterations;
  } else {
    throw ConfigError("unknown axis '" + axis_name + "'");
  }
  const auto rows = run_ablation(cfg, axis, parse_values(values_csv), parallel);
  const std::string csv = ablation_csv(rows);
  out << csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / ("ablate_" + axis_name + ".csv"), csv);
    write_text(fs::path(out_dir) / ("ablate_" + axis_name + "_curves.csv"),
               ablation_curves_csv(rows));
  }
  return kExitOk;
}

int cmd_cost(const std::string& config_path, bool no_rerank, double gen_cost,
             std::ostream& out) {
  const auto cfg = RunConfig::load(config_path);
  auto model = cost_model_for(cfg);
  model.rerank_included = !no_rerank;
  model.gen_cost_per_prompt = gen_cost;
  out << render_cost(model, estimate_cost(model));
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& csv_path,
               std::ostream& out) {
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw ConfigError("cannot open " + f);
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON in " + f);
    try {
      records.push_back(RunRecord::from_json(j));
    } catch (const json::exception& e) {
      throw ConfigError(f + ": " + e.what());
    }
  }
  if (records.empty()) throw ConfigError("no run records given");
  const auto rows = summarize_runs(records);
  out << render_table(rows);
  if (csv_path == "-") {
    out << render_csv(rows);
  } else if (!csv_path.empty()) {
    write_text(csv_path, render_csv(rows));
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Genetic prompt search over discrete prompt templates"};
  app.require_subcommand(1);

  std::string config, out_dir = "gps_out", resume;
  int halt_after = -1;
  auto* search = app.add_subcommand("search", "Run the search once per data split");
  search->add_option("-c,--config", config, "Run configuration (JSON)")->required();
  search->add_option("--out", out_dir, "Output directory");
  search->add_option("--resume", resume, "Continue from a checkpoint file");
  search->add_option("--halt-after", halt_after,
                     "Stop after this many search phases, leaving a checkpoint");

  std::string axis, values, ablate_out;
  bool parallel = false;
  auto* ablate = app.add_subcommand("ablate", "Sweep dev size or iteration count");
  ablate->add_option("-c,--config", config, "Run configuration (JSON)")->required();
  ablate->add_option("--axis", axis, "val_size or iterations")->required();
  ablate->add_option("--values", values, "Comma-separated values")->required();
  ablate->add_option("--out", ablate_out, "Directory for the CSV files");
  ablate->add_flag("--parallel-values", parallel,
                   "Run sweep values concurrently (results unchanged)");

  bool no_rerank = false;
  double gen_cost = 2.0;
  auto* cost = app.add_subcommand("cost", "Itemized forward-pass estimate");
  cost->add_option("-c,--config", config, "Run configuration (JSON)")->required();
  cost->add_flag("--no-rerank", no_rerank, "Leave out the final rerank term");
  cost->add_option("--gen-cost", gen_cost, "Forward passes per generated prompt");

  std::vector<std::string> record_files;
  std::string csv_path;
  auto* report = app.add_subcommand("report", "Aggregate run records");
  report->add_option("records", record_files, "RunRecord JSON files")->required();
  report->add_option("--csv", csv_path, "Write CSV here ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (search->parsed()) return cmd_search(config, out_dir, resume, halt_after, out, err);
    if (ablate->parsed()) return cmd_ablate(config, axis, values, ablate_out, parallel, out);
    if (cost->parsed()) return cmd_cost(config, no_rerank, gen_cost, out);
    if (report->parsed()) return cmd_report(record_files, csv_path, out);
  } catch (const std::exception& e) {
    err << "gps: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitInternal;
}

}  // namespace gps
