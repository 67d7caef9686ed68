#include "gps/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace gps {

using nlohmann::json;

double RunRecord::top1() const {
  return final_top_k.empty() ? 0.0 : final_top_k.front().metric;
}

double RunRecord::top_k_mean() const {
  if (final_top_k.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : final_top_k) sum += e.metric;
  return sum / static_cast<double>(final_top_k.size());
}

json RunRecord::to_json() const {
  json gens = json::array();
  for (const auto& g : generations) {
    gens.push_back({{"t", g.t},
                    {"best", g.best},
                    {"mean", g.mean},
                    {"best_so_far", g.best_so_far}});
  }
  json top = json::array();
  for (const auto& e : final_top_k) {
    top.push_back({{"id", e.prompt_id}, {"text", e.text}, {"metric", e.metric}});
  }
  return {{"run_id", run_id},
          {"task", task},
          {"config", config},
          {"split_index", split_index},
          {"split_seed", split_seed},
          {"dev_size", dev_size},
          {"generations", gens},
          {"final_top_k", top},
          {"top1", top1()},
          {"top_k_mean", top_k_mean()},
          {"forward_passes", forward_passes},
          {"wall_seconds", wall_seconds},
          {"heldout_top1", heldout_top1 ? json(*heldout_top1) : json(nullptr)},
          {"heldout_size", heldout_size}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.config = j.value("config", json::object());
  r.split_index = j.value("split_index", 0);
  r.split_seed = j.value("split_seed", std::int64_t{0});
  r.dev_size = j.value("dev_size", 0);
  for (const auto& g : j.at("generations")) {
    r.generations.push_back({g.at("t").get<int>(), g.at("best").get<double>(),
                             g.at("mean").get<double>(),
                             g.at("best_so_far").get<double>()});
  }
  for (const auto& e : j.at("final_top_k")) {
    r.final_top_k.push_back({e.at("id").get<std::string>(),
                             e.at("text").get<std::string>(),
                             e.at("metric").get<double>()});
  }
  r.forward_passes = j.at("forward_passes").get<long>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  if (j.contains("heldout_top1") && j["heldout_top1"].is_number()) {
    r.heldout_top1 = j["heldout_top1"].get<double>();
  }
  r.heldout_size = j.value("heldout_size", 0);
  return r;
}

RunRecord make_run_record(const SearchState& state, std::string run_id,
                          std::string task, json config, int split_index,
                          const DataSplit& split, double wall_seconds) {
  RunRecord r;
  r.run_id = std::move(run_id);
  r.task = std::move(task);
  r.config = std::move(config);
  r.split_index = split_index;
  r.split_seed = split.seed;
  r.dev_size = static_cast<int>(split.dev.size());
  double best_so_far = -INFINITY;
  for (const auto& g : state.generations) {
    GenerationSummary s;
    s.t = g.t;
    double sum = 0.0;
    int n = 0;
    double best = -INFINITY;
    for (const auto& m : g.members) {
      if (m.score.failed) continue;
      sum += m.score.metric;
      ++n;
      best = std::max(best, m.score.metric);
    }
    s.best = n ? best : 0.0;
    s.mean = n ? sum / n : 0.0;
    if (n) best_so_far = std::max(best_so_far, best);
    s.best_so_far = std::isfinite(best_so_far) ? best_so_far : 0.0;
    r.generations.push_back(s);
  }
  for (const auto& m : state.result) {
    r.final_top_k.push_back({m.candidate.tmpl.id(), m.candidate.tmpl.raw(),
                             m.score.failed ? 0.0 : m.score.metric});
  }
  r.forward_passes = state.forward_passes;
  r.wall_seconds = wall_seconds;
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std of empty input");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::vector<ReportRow> summarize_runs(std::span<const RunRecord> records) {
  if (records.empty()) throw std::invalid_argument("no run records to report");
  std::map<std::string, std::vector<const RunRecord*>> by_task;
  for (const auto& r : records) by_task[r.task].push_back(&r);

  std::vector<ReportRow> rows;
  for (const auto& [task, runs] : by_task) {
    std::vector<double> top1, topk, fp;
    for (const auto* r : runs) {
      top1.push_back(r->top1());
      topk.push_back(r->top_k_mean());
      fp.push_back(static_cast<double>(r->forward_passes));
    }
    rows.push_back({task, static_cast<int>(runs.size()), mean_std(top1),
                    mean_std(topk), mean_std(fp).mean});
  }
  return rows;
}

std::string render_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %5s %18s %18s %14s\n", "task", "runs",
                "top1 mean(std)", "topK mean(std)", "fwd passes");
  out << line;
  for (const auto& r : rows) {
    char a[64], b[64];
    std::snprintf(a, sizeof a, "%.4f(%.4f)", r.top1.mean, r.top1.std);
    std::snprintf(b, sizeof b, "%.4f(%.4f)", r.top_k_mean.mean, r.top_k_mean.std);
    std::snprintf(line, sizeof line, "%-20s %5d %18s %18s %14.0f\n",
                  r.task.c_str(), r.runs, a, b, r.mean_forward_passes);
    out << line;
  }
  return out.str();
}

std::string render_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "task,runs,top1_mean,top1_std,topk_mean,topk_std,mean_forward_passes\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%d,%.6f,%.6f,%.6f,%.6f,%.1f\n",
                  r.task.c_str(), r.runs, r.top1.mean, r.top1.std,
                  r.top_k_mean.mean, r.top_k_mean.std, r.mean_forward_passes);
    out << line;
  }
  return out.str();
}

void CostModel::check() const {
  if (iterations < 0 || pool_size < 1 || top_k < 1 || dev_size < 1 ||
      choices_per_example <= 0.0 || gen_cost_per_prompt <= 0.0) {
    throw std::invalid_argument("cost model factors must be positive");
  }
}

CostBreakdown estimate_cost(const CostModel& m) {
  m.check();
  CostBreakdown c;
  const double t = m.iterations;
  c.generation = t * m.pool_size * m.gen_cost_per_prompt;
  c.iteration_scoring = t * m.pool_size * m.dev_size * m.choices_per_example;
  if (m.rerank_included) {
    c.rerank = static_cast<double>(m.top_k) * (t + 1) * m.dev_size *
               m.choices_per_example;
  }
  c.total = c.generation + c.iteration_scoring + c.rerank;
  return c;
}

std::string render_cost(const CostModel& m, const CostBreakdown& c) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line,
                "generation        T*pool*gen            = %d*%d*%g = %.0f\n",
                m.iterations, m.pool_size, m.gen_cost_per_prompt, c.generation);
  out << line;
  std::snprintf(line, sizeof line,
                "iteration scoring T*pool*dev*choices    = %d*%d*%d*%g = %.0f\n",
                m.iterations, m.pool_size, m.dev_size, m.choices_per_example,
                c.iteration_scoring);
  out << line;
  if (m.rerank_included) {
    std::snprintf(line, sizeof line,
                  "final rerank      K*(T+1)*dev*choices   = %d*%d*%d*%g = %.0f\n",
                  m.top_k, m.iterations + 1, m.dev_size, m.choices_per_example,
                  c.rerank);
  } else {
    std::snprintf(line, sizeof line, "final rerank      (excluded)            = 0\n");
  }
  out << line;
  std::snprintf(line, sizeof line, "total forward passes                    = %.0f\n",
                c.total);
  out << line;
  std::snprintf(line, sizeof line,
                "reference figure for GPS (not derived from this formula): %.0f\n",
                kReferenceGpsForwardPasses);
  out << line;
  return out.str();
}

}  // namespace gps
