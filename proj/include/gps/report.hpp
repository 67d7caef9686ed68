#pragma once

#include <cstdint>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gps/search.hpp"

namespace gps {

struct GenerationSummary {
  int t = 0;
  double best = 0.0;
  double mean = 0.0;  // over successfully scored members
  double best_so_far = 0.0;
};

struct FinalEntry {
  std::string prompt_id;
  std::string text;
  double metric = 0.0;
};

struct RunRecord {
  std::string run_id;
  std::string task;
  nlohmann::json config;
  int split_index = 0;
  std::int64_t split_seed = 0;
  int dev_size = 0;
  std::vector<GenerationSummary> generations;
  std::vector<FinalEntry> final_top_k;
  long forward_passes = 0;
  double wall_seconds = 0.0;
  // Final top-1 scored on examples outside the dev split, when requested.
  std::optional<double> heldout_top1;
  int heldout_size = 0;

  /// Metric of the selected prompt (final top-1).
  double top1() const;
  /// Mean metric over the final top-K.
  double top_k_mean() const;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// Summarizes a finished search state.
RunRecord make_run_record(const SearchState& state, std::string run_id,
                          std::string task, nlohmann::json config,
                          int split_index, const DataSplit& split,
                          double wall_seconds);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (n divisor)
};

/// Throws std::invalid_argument on empty input.
MeanStd mean_std(std::span<const double> values);

struct ReportRow {
  std::string task;
  int runs = 0;
  MeanStd top1;
  MeanStd top_k_mean;
  double mean_forward_passes = 0.0;
};

/// One row per task, tasks in lexicographic order. Throws on empty input.
std::vector<ReportRow> summarize_runs(std::span<const RunRecord> records);

std::string render_table(const std::vector<ReportRow>& rows);
std::string render_csv(const std::vector<ReportRow>& rows);

struct CostModel {
  int iterations = 6;  // T
  int pool_size = 30;
  int top_k = 5;
  int dev_size = 32;
  double choices_per_example = 2.0;
  double gen_cost_per_prompt = 2.0;
  bool rerank_included = true;

  void check() const;
};

struct CostBreakdown {
  double generation = 0.0;  // T * pool * gen_cost
  double iteration_scoring = 0.0;  // T * pool * dev * choices
  double rerank = 0.0;  // K * (T+1) * dev * choices, when included
  double total = 0.0;
};

CostBreakdown estimate_cost(const CostModel& m);

/// Itemized human-readable breakdown.
std::string render_cost(const CostModel& m, const CostBreakdown& c);

/// Total reported for GPS in the original cost comparison, printed for
/// reference only.
inline constexpr double kReferenceGpsForwardPasses = 4320.0;

}  // namespace gps
