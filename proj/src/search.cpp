#include "gps/search.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gps/text.hpp"

namespace gps {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

ScorerKind SearchConfig::resolved_scorer() const {
  if (scorer) return *scorer;
  return mutation.op == Operator::cloze ? ScorerKind::avg_logits
                                        : ScorerKind::accuracy;
}

SearchConfig SearchConfig::resolved(std::size_t n_seeds) const {
  SearchConfig out = *this;
  if (out.top_k == 0) out.top_k = static_cast<int>(n_seeds);
  if (out.mutation.children_per_parent == 0 && out.top_k > 0) {
    out.mutation.children_per_parent =
        (out.pool_size + out.top_k - 1) / out.top_k;
  }
  out.check();
  if (static_cast<long>(out.mutation.children_per_parent) * out.top_k <
      out.pool_size) {
    throw SearchError(SearchError::Kind::InvalidConfig,
                      "children_per_parent x K is smaller than pool_size");
  }
  return out;
}

void SearchConfig::check() const {
  auto fail = [](const std::string& why) {
    throw SearchError(SearchError::Kind::InvalidConfig, why);
  };
  if (iterations < 0) fail("iterations must be >= 0");
  if (pool_size < 1) fail("pool_size must be >= 1");
  if (top_k < 0) fail("top_k must be >= 0");
  if (top_k > pool_size) fail("top_k must not exceed pool_size");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (stall_limit < 1) fail("stall_limit must be >= 1");
  try {
    mutation.check();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

SearchConfig SearchConfig::from_json(const json& j) {
  SearchConfig cfg;
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.top_k = j.value("top_k", cfg.top_k);
  cfg.pool_size = j.value("pool_size", cfg.pool_size);
  const std::string scorer = j.value("scorer", std::string("auto"));
  if (scorer != "auto") cfg.scorer = scorer_from_string(scorer);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.parallelism = j.value("parallelism", cfg.parallelism);
  cfg.stall_limit = j.value("stall_limit", cfg.stall_limit);
  if (j.contains("mutation")) cfg.mutation = MutationConfig::from_json(j["mutation"]);
  cfg.check();
  return cfg;
}

json SearchConfig::to_json() const {
  return {{"iterations", iterations},
          {"top_k", top_k},
          {"pool_size", pool_size},
          {"scorer", scorer ? to_string(*scorer) : "auto"},
          {"seed", seed},
          {"parallelism", parallelism},
          {"stall_limit", stall_limit},
          {"mutation", mutation.to_json()}};
}

SearchError::SearchError(Kind kind, std::string message, int index)
    : std::runtime_error(std::move(message)), kind_(kind), index_(index) {}

CheckpointError::CheckpointError(Kind kind, std::string message)
    : std::runtime_error(std::move(message)), kind_(kind) {}

// ---------------------------------------------------------------------------
// Serialization

namespace {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::iterating: return "iterating";
    case Phase::reranking: return "reranking";
    case Phase::done: return "done";
  }
  return "?";
}

Phase phase_from(const std::string& s) {
  if (s == "iterating") return Phase::iterating;
  if (s == "reranking") return Phase::reranking;
  if (s == "done") return Phase::done;
  throw std::invalid_argument("unknown phase '" + s + "'");
}

json member_json(const Member& m) {
  return {{"candidate", m.candidate.to_json()}, {"score", m.score.to_json()}};
}

Member member_from(const json& j) {
  return {Candidate::from_json(j.at("candidate")),
          PromptScore::from_json(j.at("score"))};
}

}  // namespace

json SearchState::to_json() const {
  json pool_j = json::array();
  for (const auto& c : pool) pool_j.push_back(c.to_json());
  json gens = json::array();
  for (const auto& g : generations) {
    json members = json::array();
    for (const auto& m : g.members) members.push_back(member_json(m));
    gens.push_back({{"t", g.t}, {"members", members}, {"top_k", g.top_k}});
  }
  json arch = json::array();
  for (const auto& a : archive) {
    arch.push_back({{"candidate", a.candidate.to_json()},
                    {"generation", a.generation}});
  }
  json res = json::array();
  for (const auto& m : result) res.push_back(member_json(m));
  return {{"config", config.to_json()},
          {"phase", phase_name(phase)},
          {"t", t},
          {"pool", pool_j},
          {"generations", gens},
          {"archive", arch},
          {"seen", seen},
          {"rng_state", rng_state},
          {"forward_passes", forward_passes},
          {"result", res},
          {"meta", meta}};
}

SearchState SearchState::from_json(const json& j) {
  SearchState s;
  s.config = SearchConfig::from_json(j.at("config"));
  s.phase = phase_from(j.at("phase").get<std::string>());
  s.t = j.at("t").get<int>();
  for (const auto& c : j.at("pool")) s.pool.push_back(Candidate::from_json(c));
  for (const auto& g : j.at("generations")) {
    Generation gen;
    gen.t = g.at("t").get<int>();
    for (const auto& m : g.at("members")) gen.members.push_back(member_from(m));
    gen.top_k = g.at("top_k").get<std::vector<std::size_t>>();
    for (auto idx : gen.top_k) {
      if (idx >= gen.members.size()) {
        throw std::out_of_range("top_k index out of range");
      }
    }
    s.generations.push_back(std::move(gen));
  }
  for (const auto& a : j.at("archive")) {
    s.archive.push_back({Candidate::from_json(a.at("candidate")),
                         a.at("generation").get<int>()});
  }
  s.seen = j.at("seen").get<std::set<std::string>>();
  s.rng_state = j.at("rng_state").get<std::uint64_t>();
  s.forward_passes = j.at("forward_passes").get<long>();
  for (const auto& m : j.at("result")) s.result.push_back(member_from(m));
  s.meta = j.value("meta", json::object());
  return s;
}

void save_checkpoint(const SearchState& state, const std::filesystem::path& path) {
  const json doc{{"format", "gps-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"state", state.to_json()}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError(CheckpointError::Kind::Io,
                            "cannot write " + tmp.string());
    }
    out << doc.dump(1) << '\n';
    if (!out) {
      throw CheckpointError(CheckpointError::Kind::Io,
                            "short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

SearchState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw CheckpointError(CheckpointError::Kind::CorruptCheckpoint,
                          path.string() + " is not valid JSON");
  }
  if (doc.value("format", std::string()) != "gps-checkpoint") {
    throw CheckpointError(CheckpointError::Kind::CorruptCheckpoint,
                          path.string() + " is not a checkpoint");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "unsupported checkpoint version in " + path.string());
  }
  try {
    return SearchState::from_json(doc.at("state"));
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::CorruptCheckpoint,
                          path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Engine

bool archive_before(const Member& a, int gen_a, const Member& b, int gen_b) {
  const int q = compare_quality(a.score, b.score);
  if (q != 0) return q > 0;
  if (gen_a != gen_b) return gen_a < gen_b;
  return a.candidate.tmpl.normalized() < b.candidate.tmpl.normalized();
}

namespace {

void emit(const SearchContext& ctx, json event) {
  if (ctx.events) ctx.events(event);
}

json member_event(const Member& m) {
  json j{{"id", m.candidate.tmpl.id()},
         {"text", m.candidate.tmpl.raw()},
         {"op", m.candidate.op},
         {"parent_id", m.candidate.parent_id},
         {"provenance", m.candidate.provenance},
         {"failed", m.score.failed},
         {"correct", m.score.correct},
         {"total", m.score.total}};
  j["metric"] = m.score.failed ? json(nullptr) : json(m.score.metric);
  return j;
}

std::vector<PromptScore> score_all(const std::vector<Template>& templates,
                                   const SearchContext& ctx,
                                   const SearchConfig& cfg) {
  try {
    return evaluate_pool(templates, EvalContext{ctx.task, ctx.dev, ctx.backend},
                         cfg.resolved_scorer(), cfg.parallelism);
  } catch (const PoolError& e) {
    throw SearchError(SearchError::Kind::BackendFatal, e.what());
  }
}

struct Lane {
  const Member* parent;
  std::deque<Candidate> queue;
  int zero_streak = 0;
  bool exhausted = false;
};

struct BreedStats {
  long calls = 0;
  long dropped = 0;
  long padded = 0;
  long duplicates = 0;
  long forward_passes = 0;
};

std::vector<Candidate> breed(SearchState& s, const std::vector<const Member*>& parents,
                             const SearchContext& ctx, BreedStats& stats) {
  const auto& cfg = s.config;
  const auto pool_size = static_cast<std::size_t>(cfg.pool_size);
  SplitMix64 rng(s.rng_state);
  std::vector<Lane> lanes;
  for (const Member* p : parents) lanes.push_back({p, {}, 0, false});

  std::vector<Candidate> next;
  std::set<std::string> taken;

  auto refill = [&](Lane& lane) {
    MutationConfig mc = cfg.mutation;
    mc.seed = cfg.mutation.seed ^ static_cast<std::int64_t>(rng.next() >> 2);
    MutationResult r = reproduce(lane.parent->candidate.tmpl, ctx.backend, mc);
    ++stats.calls;
    stats.dropped += static_cast<long>(r.dropped.size());
    stats.forward_passes += r.forward_passes;
    auto kept = filter_candidates(std::move(r.children), s.seen, ctx.task);
    std::erase_if(kept, [&](const Candidate& c) {
      return taken.contains(c.tmpl.normalized());
    });
    if (kept.empty()) {
      if (++lane.zero_streak >= cfg.stall_limit) lane.exhausted = true;
      return;
    }
    lane.zero_streak = 0;
    for (auto& c : kept) lane.queue.push_back(std::move(c));
  };

  // Round-robin over parents in rank order, one child per turn.
  while (next.size() < pool_size) {
    bool any_active = false;
    for (auto& lane : lanes) {
      if (next.size() >= pool_size) break;
      if (lane.exhausted && lane.queue.empty()) continue;
      any_active = true;
      while (true) {
        if (lane.queue.empty()) {
          if (lane.exhausted) break;
          refill(lane);
          continue;
        }
        Candidate c = std::move(lane.queue.front());
        lane.queue.pop_front();
        std::string norm = c.tmpl.normalized();
        if (s.seen.contains(norm) || taken.contains(norm)) continue;
        taken.insert(std::move(norm));
        next.push_back(std::move(c));
        break;
      }
    }
    if (!any_active) break;
  }

  // Stall padding: parents not already pooled, then duplicated parents.
  for (const Member* p : parents) {
    if (next.size() >= pool_size) break;
    std::string norm = p->candidate.tmpl.normalized();
    if (taken.contains(norm)) continue;
    taken.insert(std::move(norm));
    next.push_back({p->candidate.tmpl, p->candidate.tmpl.id(), "padding",
                    {{"padding", "parent"}}});
    ++stats.padded;
  }
  for (std::size_t i = 0; next.size() < pool_size && !parents.empty(); ++i) {
    const Member* p = parents[i % parents.size()];
    next.push_back({p->candidate.tmpl, p->candidate.tmpl.id(), "padding",
                    {{"padding", "duplicate"}}});
    ++stats.padded;
    ++stats.duplicates;
  }

  s.seen.insert(taken.begin(), taken.end());
  s.rng_state = rng.state();
  return next;
}

}  // namespace

SearchState init_search(const SearchConfig& cfg, const std::vector<Template>& seeds,
                        const TaskSpec& task) {
  if (seeds.empty()) {
    throw SearchError(SearchError::Kind::InvalidSeedPrompt, "no seed prompts");
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!validate_for_task(seeds[i], task)) {
      throw SearchError(SearchError::Kind::InvalidSeedPrompt,
                        "seed prompt " + std::to_string(i) +
                            " does not fit task " + task.name,
                        static_cast<int>(i));
    }
  }
  SearchState s;
  s.config = cfg.resolved(seeds.size());
  s.rng_state = static_cast<std::uint64_t>(cfg.seed);
  for (const auto& t : seeds) {
    s.pool.push_back({t, "", "seed", json::object()});
    s.seen.insert(t.normalized());
  }
  return s;
}

SearchState step(SearchState s, const SearchContext& ctx) {
  if (s.phase != Phase::iterating) {
    throw SearchError(SearchError::Kind::BadPhase, "step called after iteration");
  }
  const auto& cfg = s.config;

  std::vector<Template> templates;
  templates.reserve(s.pool.size());
  for (const auto& c : s.pool) templates.push_back(c.tmpl);
  auto scores = score_all(templates, ctx, cfg);

  Generation gen;
  gen.t = s.t;
  for (std::size_t i = 0; i < s.pool.size(); ++i) {
    s.forward_passes += scores[i].forward_passes;
    gen.members.push_back({std::move(s.pool[i]), std::move(scores[i])});
  }
  s.pool.clear();

  std::vector<std::size_t> order(gen.members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::string> norms;
  for (const auto& m : gen.members) norms.push_back(m.candidate.tmpl.normalized());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int q = compare_quality(gen.members[a].score, gen.members[b].score);
    if (q != 0) return q > 0;
    return norms[a] < norms[b];
  });
  const auto valid = static_cast<std::size_t>(
      std::count_if(gen.members.begin(), gen.members.end(),
                    [](const Member& m) { return !m.score.failed; }));
  const auto k = std::min(static_cast<std::size_t>(cfg.top_k), valid);
  gen.top_k.assign(order.begin(), order.begin() + static_cast<long>(k));

  std::set<std::string> archived;
  for (const auto& a : s.archive) archived.insert(a.candidate.tmpl.normalized());
  for (auto idx : gen.top_k) {
    if (archived.insert(norms[idx]).second) {
      s.archive.push_back({gen.members[idx].candidate, gen.t});
    }
  }

  json members = json::array();
  for (const auto& m : gen.members) members.push_back(member_event(m));
  json top_ids = json::array(), top_text = json::array();
  for (auto idx : gen.top_k) {
    top_ids.push_back(gen.members[idx].candidate.tmpl.id());
    top_text.push_back(gen.members[idx].candidate.tmpl.raw());
  }
  json gen_event{{"event", "generation"},
                 {"t", gen.t},
                 {"members", members},
                 {"top_k", top_ids},
                 {"top_k_text", top_text},
                 {"archive_size", s.archive.size()},
                 {"forward_passes", s.forward_passes}};

  json pool_event;
  if (s.t >= cfg.iterations) {
    s.phase = Phase::reranking;
  } else {
    std::vector<const Member*> parents;
    if (!gen.top_k.empty()) {
      for (auto idx : gen.top_k) parents.push_back(&gen.members[idx]);
    } else {
      const auto n = std::min(order.size(), static_cast<std::size_t>(cfg.top_k));
      for (std::size_t i = 0; i < n; ++i) parents.push_back(&gen.members[order[i]]);
    }
    BreedStats stats;
    s.pool = breed(s, parents, ctx, stats);
    s.forward_passes += stats.forward_passes;
    ++s.t;
    pool_event = {{"event", "pool"},
                  {"t", s.t},
                  {"size", s.pool.size()},
                  {"mutation_calls", stats.calls},
                  {"dropped", stats.dropped},
                  {"padded", stats.padded},
                  {"duplicates", stats.duplicates},
                  {"forward_passes", s.forward_passes}};
  }
  s.generations.push_back(std::move(gen));

  emit(ctx, std::move(gen_event));
  if (!pool_event.is_null()) emit(ctx, std::move(pool_event));
  return s;
}

namespace {

struct RerankOutcome {
  std::vector<Member> top;
  json archive_event;
  long forward_passes = 0;
};

RerankOutcome rerank_impl(const SearchState& state, const SearchContext& ctx) {
  if (state.phase != Phase::reranking) {
    throw SearchError(SearchError::Kind::BadPhase, "rerank before iteration ended");
  }
  std::vector<Template> templates;
  for (const auto& a : state.archive) templates.push_back(a.candidate.tmpl);
  auto scores = score_all(templates, ctx, state.config);

  RerankOutcome out;
  out.archive_event = json::array();
  std::vector<Member> members;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.forward_passes += scores[i].forward_passes;
    members.push_back({state.archive[i].candidate, std::move(scores[i])});
    json e = member_event(members.back());
    e["generation"] = state.archive[i].generation;
    out.archive_event.push_back(std::move(e));
  }
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return archive_before(members[a], state.archive[a].generation, members[b],
                          state.archive[b].generation);
  });
  const auto k = std::min(order.size(), static_cast<std::size_t>(state.config.top_k));
  for (std::size_t i = 0; i < k; ++i) out.top.push_back(members[order[i]]);
  return out;
}

}  // namespace

std::vector<Member> final_rerank(const SearchState& state, const SearchContext& ctx) {
  return rerank_impl(state, ctx).top;
}

SearchState advance(SearchState state, const SearchContext& ctx) {
  switch (state.phase) {
    case Phase::iterating:
      return step(std::move(state), ctx);
    case Phase::reranking: {
      auto outcome = rerank_impl(state, ctx);
      state.forward_passes += outcome.forward_passes;
      json top = json::array();
      for (const auto& m : outcome.top) top.push_back(member_event(m));
      state.result = std::move(outcome.top);
      state.phase = Phase::done;
      emit(ctx, {{"event", "rerank"},
                 {"archive", std::move(outcome.archive_event)},
                 {"forward_passes", state.forward_passes}});
      emit(ctx, {{"event", "final"}, {"top_k", std::move(top)}});
      return state;
    }
    case Phase::done:
      return state;
  }
  return state;
}

SearchState run_to_completion(SearchState state, const SearchContext& ctx,
                              const std::optional<std::filesystem::path>& checkpoint,
                              std::optional<int> max_advances) {
  int done = 0;
  while (state.phase != Phase::done) {
    if (max_advances && done >= *max_advances) break;
    state = advance(std::move(state), ctx);
    ++done;
    if (checkpoint) save_checkpoint(state, *checkpoint);
  }
  return state;
}

std::vector<Member> run_gps(const SearchConfig& cfg, const std::vector<Template>& seeds,
                            const SearchContext& ctx) {
  return run_to_completion(init_search(cfg, seeds, ctx.task), ctx).result;
}

}  // namespace gps
