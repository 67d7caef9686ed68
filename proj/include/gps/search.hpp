#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gps/backend.hpp"
#include "gps/mutation.hpp"
#include "gps/scoring.hpp"
#include "gps/task_data.hpp"

namespace gps {

struct SearchConfig {
  int iterations = 6;   // T
  int top_k = 0;        // K; 0 means |G0|
  int pool_size = 30;
  std::optional<ScorerKind> scorer;  // unset: bound to the mutation operator
  MutationConfig mutation;
  std::int64_t seed = 0;
  int parallelism = 1;
  int stall_limit = 3;  // zero-yield attempts before a parent is exhausted

  /// Cloze ranks by average gold logit; the others by accuracy.
  ScorerKind resolved_scorer() const;

  /// Fills in K and children_per_parent for a seed set of the given size and
  /// validates the result.
  SearchConfig resolved(std::size_t n_seeds) const;

  void check() const;
  static SearchConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class SearchError : public std::runtime_error {
 public:
  enum class Kind { InvalidSeedPrompt, InvalidConfig, BackendFatal, BadPhase };
  SearchError(Kind kind, std::string message, int index = -1);
  Kind kind() const { return kind_; }
  int index() const { return index_; }

 private:
  Kind kind_;
  int index_;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { CorruptCheckpoint, VersionMismatch, Io };
  CheckpointError(Kind kind, std::string message);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Member {
  Candidate candidate;
  PromptScore score;
};

struct Generation {
  int t = 0;
  std::vector<Member> members;
  std::vector<std::size_t> top_k;  // indices into members, best first
};

struct ArchiveEntry {
  Candidate candidate;
  int generation = 0;
};

enum class Phase { iterating, reranking, done };

struct SearchState {
  SearchConfig config;  // resolved
  Phase phase = Phase::iterating;
  int t = 0;
  std::vector<Candidate> pool;  // G^t, not yet scored
  std::vector<Generation> generations;
  std::vector<ArchiveEntry> archive;
  std::set<std::string> seen;  // normalized texts of every pooled prompt
  std::uint64_t rng_state = 0;
  long forward_passes = 0;
  std::vector<Member> result;  // G^{T+1} once done
  nlohmann::json meta = nlohmann::json::object();  // caller bookkeeping

  nlohmann::json to_json() const;
  static SearchState from_json(const nlohmann::json& j);
};

using EventSink = std::function<void(const nlohmann::json&)>;

struct SearchContext {
  const TaskSpec& task;
  const DataSplit& dev;
  const Backend& backend;
  EventSink events;  // may be empty
};

/// G0 becomes the first pool. Every seed must pass validate_for_task.
SearchState init_search(const SearchConfig& cfg,
                        const std::vector<Template>& seeds,
                        const TaskSpec& task);

/// One generation: score G^t, keep its top K, archive them, and unless t == T
/// breed G^{t+1}. On error the input state is untouched.
SearchState step(SearchState state, const SearchContext& ctx);

/// Fresh scores for every archive member on the same dev split, best K first.
std::vector<Member> final_rerank(const SearchState& state,
                                 const SearchContext& ctx);

/// Advances a state by one step or by the final rerank.
SearchState advance(SearchState state, const SearchContext& ctx);

/// Drives a state to completion. With a checkpoint path, the state is saved
/// after every phase. `max_advances` bounds the number of advances (for
/// interruption); the returned state then is not done.
SearchState run_to_completion(
    SearchState state, const SearchContext& ctx,
    const std::optional<std::filesystem::path>& checkpoint = std::nullopt,
    std::optional<int> max_advances = std::nullopt);

std::vector<Member> run_gps(const SearchConfig& cfg,
                            const std::vector<Template>& seeds,
                            const SearchContext& ctx);

/// Tie-break for archive order: quality desc, earlier generation, then
/// normalized text.
bool archive_before(const Member& a, int gen_a, const Member& b, int gen_b);

inline constexpr int kCheckpointVersion = 1;

/// Writes via a temporary file and rename.
void save_checkpoint(const SearchState& state, const std::filesystem::path& path);
SearchState load_checkpoint(const std::filesystem::path& path);

}  // namespace gps
