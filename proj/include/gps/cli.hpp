#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gps/config.hpp"
#include "gps/report.hpp"

namespace gps {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;

enum class AblationAxis { val_size, iterations };

struct AblationRow {
  int value = 0;
  MeanStd metric;  // final top-1 over splits
  std::optional<MeanStd> heldout;  // when splits.heldout_size > 0
  std::vector<RunRecord> runs;
};

/// Runs the search once per data split. Events go to `events_path` (appended)
/// when set; per-split checkpoints land in `checkpoint_dir` when set.
struct SplitRunOptions {
  std::optional<std::filesystem::path> events_path;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::optional<SearchState> resume;
  std::optional<int> halt_after;  // advance budget across all splits
};

struct SplitRunResult {
  std::vector<RunRecord> records;  // records finished by this call
  bool halted = false;
  std::optional<std::filesystem::path> halted_checkpoint;
};

SplitRunResult run_splits(const RunConfig& cfg, const SplitRunOptions& opts);

std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const std::vector<int>& values,
                                      bool parallel_values = false);

/// value,mean,std,runs,heldout_mean,heldout_std (held-out columns empty
/// when not scored)
std::string ablation_csv(const std::vector<AblationRow>& rows);
/// value,split,t,best_so_far
std::string ablation_curves_csv(const std::vector<AblationRow>& rows);

CostModel cost_model_for(const RunConfig& cfg);

/// Entry point for the `gps` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace gps
