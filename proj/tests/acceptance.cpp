// Acceptance checks, one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include <httplib.h>

#include "gps/cli.hpp"
#include "gps/stub_server.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace gps;
using nlohmann::json;
using testing_support::data;
using testing_support::fixture;
using testing_support::scratch_dir;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ------------------------------------------------------------------------

Verdict golden_templates() {
  const auto t0 = Clock::now();
  struct Case {
    std::string task;
    std::size_t index;
    std::map<std::string, std::string> bind;
    std::string expect;
  };
  const std::map<std::string, std::string> hs = {{"ctx", "A man sits down"}};
  const std::map<std::string, std::string> cb = {{"premise", "It rained."},
                                                 {"hypothesis", "The road is wet"}};
  const std::map<std::string, std::string> wsc = {
      {"text", "Tom thanked Ray because he helped."},
      {"span1_text", "Ray"},
      {"span2_text", "he"}};
  const std::map<std::string, std::string> cause = {{"question", "cause"}};
  const std::map<std::string, std::string> effect = {{"question", "effect"}};
  const std::vector<Case> cases = {
      {"hellaswag", 0, hs,
       "If a description of a situation begins like this: A man sits down... Then how "
       "does it continue?"},
      {"hellaswag", 1, hs,
       "If the description of a situation begins like this: A man sits down... Then how "
       "will it continue?"},
      {"hellaswag", 2, hs,
       "If a description of a situation begins like this: A man sits down... then what "
       "is the most likely thing to happen next?"},
      {"copa", 0, cause, "Select the most plausible  cause: "},
      {"copa", 0, effect, "Select the most plausible  effect: "},
      {"copa", 1, cause, "Select the most believable  cause: "},
      {"copa", 1, effect, "Select the most believable  effect: "},
      {"copa", 2, cause, "What is the most plausible  cause: "},
      {"copa", 2, effect, "What is the most plausible  effect:"},
      {"copa", 3, cause, "Select the most agreeable  cause: "},
      {"copa", 3, effect, "Select the most agreeable  effect:"},
      {"cb", 0, cb,
       "It rained. Are we justified in saying that \"The road is wet\"? Yes, no, or maybe?"},
      {"cb", 1, cb,
       "It rained. Do we have reason to say this \"The road is wet\"? Yes, no, or maybe?"},
      {"cb", 2, cb,
       "It rained. Are we justified in believing that \"The road is wet\"? Yes, no, or "
       "maybe?"},
      {"cb", 3, cb,
       "It rained. If we were justified, would we think that it is the case that we are "
       "justified in saying that \"The road is wet\"? Yes, no, or maybe?"},
      {"wsc", 0, wsc,
       "Passage: Tom thanked Ray because he helped. Question: In the passage above, does "
       "the pronoun \"he\" refer to Ray? Answer:"},
      {"wsc", 1, wsc,
       "Passage: Tom thanked Ray because he helped. Question: in the paragraph above, "
       "does the pronoun \"he\" refer to Ray? Answer:"},
      {"wsc", 2, wsc,
       "Passage: Tom thanked Ray because he helped. Question: does the pronoun \"he\" "
       "refer to the person of Ray? Answer:"},
  };
  std::map<std::string, std::vector<std::string>> sets;
  for (std::string t : {"hellaswag", "copa", "cb", "wsc"}) {
    sets[t] = load_prompt_set(data("prompts/" + t + ".json"));
  }
  int templates = 0, failures = 0;
  std::string first_failure;
  for (const auto& [task, prompts] : sets) {
    const auto spec = TaskSpec::load(data("tasks/" + task + ".json"));
    for (const auto& p : prompts) {
      ++templates;
      const auto t = Template::parse(p);
      if (t.serialize() != p || !validate_for_task(t, spec)) {
        ++failures;
        if (first_failure.empty()) first_failure = "round trip: " + p;
      }
    }
  }
  for (const auto& c : cases) {
    const auto out = render(Template::parse(sets.at(c.task).at(c.index)), c.bind);
    if (out != c.expect) {
      ++failures;
      if (first_failure.empty()) first_failure = "render: [" + out + "]";
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = failures == 0 && templates == 14 && secs < 1.0;
  return {ok, fmt("%d templates, %zu renders, %d failures, %.3fs", templates, cases.size(),
                  failures, secs) +
                  (first_failure.empty() ? "" : " first: " + first_failure)};
}

// 2 ------------------------------------------------------------------------

Verdict scorer_equivalence() {
  std::mt19937 gen(20240601);
  MockBackend mock;
  static const char* words[] = {"sun", "rain", "dog", "walks", "far", "near", "blue", "42"};
  int mismatches = 0;
  const int cases = 50;
  for (int round = 0; round < cases; ++round) {
    const int n = 1 + static_cast<int>(gen() % 8);
    const int c = 2 + static_cast<int>(gen() % 3);
    std::vector<std::string> choices;
    for (int k = 0; k < c; ++k) choices.push_back(words[gen() % 8] + std::to_string(k));
    TaskSpec task = testing_support::text_task(choices);
    DataSplit split;
    std::vector<oracle::Example> ref;
    for (int i = 0; i < n; ++i) {
      std::string text;
      for (int w = 0; w < 1 + static_cast<int>(gen() % 6); ++w) {
        text += std::string(w ? " " : "") + words[gen() % 8];
      }
      Example ex{"e" + std::to_string(i), {{"text", text}},
                 static_cast<int>(gen() % static_cast<unsigned>(c)), {}};
      split.dev.push_back(ex);
      ref.push_back({ex.values, choices, ex.gold});
    }
    const std::string tmpl = "Q" + std::to_string(round) + ": {{text}} ->";
    const auto t = Template::parse(tmpl);
    const EvalContext ctx{task, split, mock};
    const auto expect = oracle::brute_force(tmpl, ref);
    const auto acc = score_accuracy(t, ctx);
    const auto avg = score_avg_logits(t, ctx);
    if (acc.metric != expect.accuracy || acc.correct != expect.correct ||
        avg.metric != expect.avg_gold) {
      ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%d randomized cases, %d mismatches", cases, mismatches)};
}

// 3 ------------------------------------------------------------------------

Verdict filter_property() {
  std::mt19937 gen(77);
  TaskSpec task = testing_support::text_task();
  task.input_fields["extra"] = "";
  static const char* frags[] = {"{{text}}", "{{ text }}", "{{extra}}", "{{ghost}}", "pick",
                                "the", "answer", " ", "\t", "  ", "?", "Yes"};
  int violations = 0;
  const int cases = 1000;
  for (int round = 0; round < cases; ++round) {
    std::vector<Candidate> cands;
    std::vector<std::string> pool_texts;
    const int n = 1 + static_cast<int>(gen() % 12);
    for (int i = 0; i < n; ++i) {
      std::string s;
      // Draw from a small space so duplicates and whitespace variants are common.
      const int len = 1 + static_cast<int>(gen() % 4);
      for (int k = 0; k < len; ++k) {
        s += frags[gen() % 12];
        s += gen() % 2 ? " " : "  ";
      }
      pool_texts.push_back(s);
      cands.push_back({Template::parse(s), "", "seed", json::object()});
    }
    std::set<std::string> existing;
    if (gen() % 2) existing.insert(Template::parse(pool_texts[0]).normalized());

    const auto out = filter_candidates(cands, existing, task);
    std::set<std::string> norms;
    for (const auto& c : out) {
      const auto norm = c.tmpl.normalized();
      if (!norms.insert(norm).second) ++violations;
      if (!validate_for_task(c.tmpl, task)) ++violations;
      if (existing.contains(norm)) ++violations;
    }
    const auto again = filter_candidates(out, existing, task);
    if (again.size() != out.size()) {
      ++violations;
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (again[i].tmpl.raw() != out[i].tmpl.raw()) ++violations;
      }
    }
    // Nothing valid and new is lost.
    std::set<std::string> expected;
    for (const auto& c : cands) {
      if (validate_for_task(c.tmpl, task) && !existing.contains(c.tmpl.normalized())) {
        expected.insert(c.tmpl.normalized());
      }
    }
    if (expected != norms) ++violations;
  }
  return {violations == 0, fmt("%d generated cases, %d violations", cases, violations)};
}

// 4 ------------------------------------------------------------------------

std::vector<Example> landscape_pool() {
  return load_dataset(fixture("landscape.jsonl"),
                      TaskSpec::load(fixture("landscape_task.json")));
}

std::string random_prompt(std::mt19937& gen) {
  const auto table = MockBackend::synonym_table();
  std::string s = "{{text}}";
  const int len = 3 + static_cast<int>(gen() % 6);
  for (int i = 0; i < len; ++i) {
    const auto& row = table[gen() % table.size()];
    s += " ";
    s += row[gen() % row.size()];
  }
  return s + "?";
}

Verdict archive_elitism() {
  std::mt19937 gen(4242);
  const auto task = TaskSpec::load(fixture("landscape_task.json"));
  const auto pool = landscape_pool();
  const Operator ops[] = {Operator::sentence_continuation, Operator::back_translation,
                          Operator::cloze};
  int violations = 0;
  const int configs = 100;
  for (int round = 0; round < configs; ++round) {
    OracleBackend oracle(Template::parse(random_prompt(gen)));
    const auto split = sample_balanced_dev(pool, 4 + static_cast<int>(gen() % 13),
                                           static_cast<std::int64_t>(gen() % 1000), 2);
    std::vector<Template> seeds;
    std::set<std::string> norms;
    while (seeds.size() < 2 + gen() % 3) {
      auto t = Template::parse(random_prompt(gen));
      if (norms.insert(t.normalized()).second) seeds.push_back(t);
    }
    SearchConfig cfg;
    cfg.iterations = static_cast<int>(gen() % 4);
    cfg.top_k = 1 + static_cast<int>(gen() % 3);
    cfg.pool_size = cfg.top_k + static_cast<int>(gen() % 6);
    cfg.seed = static_cast<std::int64_t>(gen());
    cfg.mutation.op = ops[gen() % 3];
    cfg.mutation.seed = static_cast<std::int64_t>(gen() % 100000);
    cfg.mutation.bt_languages = {"fr", "de", "ja"};
    const SearchContext ctx{task, split, oracle, {}};
    const auto result = run_gps(cfg, seeds, ctx);
    const auto kind = cfg.resolved_scorer();
    PromptScore best;
    best.failed = true;
    for (const auto& s : seeds) {
      const auto sc = score_prompt(s, {task, split, oracle}, kind);
      if (compare_quality(sc, best) > 0) best = sc;
    }
    if (result.empty() || compare_quality(result[0].score, best) < 0) ++violations;
  }
  return {violations == 0, fmt("%d random configurations, %d violations", configs, violations)};
}

// 5 ------------------------------------------------------------------------

Verdict landscape_improvement() {
  auto cfg = RunConfig::load(fixture("landscape_oracle.json"));
  cfg.search.parallelism = 1;
  const auto pool = load_dataset(cfg.dataset, cfg.task);
  const auto splits = make_splits(pool, cfg.splits.dev_size, cfg.splits.n_splits,
                                  cfg.splits.base_seed, cfg.task.num_classes);
  const auto backend = make_backend(cfg.backend);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto t0 = Clock::now();
    const SearchContext ctx{cfg.task, splits[i], *backend, {}};
    const auto result = run_gps(cfg.search, cfg.seed_templates(), ctx);
    const double secs = seconds_since(t0);
    double seed_best = 0.0;
    for (const auto& s : cfg.seed_templates()) {
      seed_best = std::max(seed_best,
                           score_accuracy(s, {cfg.task, splits[i], *backend}).metric);
    }
    const double top1 = result.empty() ? 0.0 : result[0].score.metric;
    ok = ok && top1 >= seed_best + 0.10 && secs < 60.0;
    detail += fmt("%ssplit %zu: seed best %.4f -> top-1 %.4f (%.2fs)", i ? "; " : "", i,
                  seed_best, top1, secs);
  }
  return {ok, detail};
}

// 6 ------------------------------------------------------------------------

std::vector<json> events_without_ts(const std::filesystem::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    j.erase("ts");
    out.push_back(std::move(j));
  }
  return out;
}

json final_top(const std::vector<RunRecord>& records) {
  json out = json::array();
  for (const auto& r : records) out.push_back(r.to_json()["final_top_k"]);
  return out;
}

Verdict determinism_and_resume() {
  const auto cfg = RunConfig::load(fixture("mock_small.json"));
  auto run = [&](const std::string& name) {
    const auto dir = scratch_dir(name);
    SplitRunOptions o;
    o.events_path = dir / "events.jsonl";
    auto r = run_splits(cfg, o);
    return std::make_pair(events_without_ts(dir / "events.jsonl"), r.records);
  };
  const auto [events_a, records_a] = run("det_a");
  const auto [events_b, records_b] = run("det_b");
  const bool same_log = events_a == events_b && !events_a.empty();
  const json expect = final_top(records_a);

  const int advances_per_split = cfg.search.iterations + 2;
  const int total = advances_per_split * cfg.splits.n_splits;
  int mismatches = 0;
  for (int k = 1; k < total; ++k) {
    const auto dir = scratch_dir("resume");
    SplitRunOptions first;
    first.checkpoint_dir = dir;
    first.halt_after = k;
    const auto halted = run_splits(cfg, first);
    if (!halted.halted || !halted.halted_checkpoint) {
      ++mismatches;
      continue;
    }
    SplitRunOptions second;
    second.checkpoint_dir = dir;
    second.resume = load_checkpoint(*halted.halted_checkpoint);
    const auto resumed = run_splits(cfg, second);
    auto all = halted.records;
    all.insert(all.end(), resumed.records.begin(), resumed.records.end());
    if (final_top(all) != expect) ++mismatches;
  }
  return {same_log && mismatches == 0,
          fmt("event logs %s (%zu events); %d/%d interruption points resumed identically",
              same_log ? "identical" : "DIFFER", events_a.size(), total - 1 - mismatches,
              total - 1)};
}

// 7 ------------------------------------------------------------------------

Verdict parallelism_invariance() {
  const auto cfg = RunConfig::load(data("configs/cb.json"));
  const auto pool = load_dataset(cfg.dataset, cfg.task);
  const auto split = sample_balanced_dev(pool, 32, 0, cfg.task.num_classes);
  MockBackend mock;
  std::vector<Template> templates;
  for (const auto& seed : cfg.seed_templates()) {
    templates.push_back(seed);
    for (auto& c : mutate_back_translation(seed, mock, MutationConfig{}).children) {
      templates.push_back(c.tmpl);
    }
  }
  const EvalContext ctx{cfg.task, split, mock};
  bool identical = true;
  for (auto kind : {ScorerKind::accuracy, ScorerKind::avg_logits}) {
    const auto one = evaluate_pool(templates, ctx, kind, 1);
    const auto eight = evaluate_pool(templates, ctx, kind, 8);
    std::string a, b;
    for (const auto& s : one) a += s.to_json().dump() + "\n";
    for (const auto& s : eight) b += s.to_json().dump() + "\n";
    identical = identical && a == b && one.size() == templates.size();
  }
  return {identical, fmt("%zu prompts x 32 examples, both scorers, parallelism 1 vs 8",
                         templates.size())};
}

// 8 ------------------------------------------------------------------------

Verdict wire_conformance() {
  const auto t0 = Clock::now();
  StubServer server;
  server.start();
  BackendConfig bc;
  bc.kind = BackendKind::http;
  bc.endpoint = server.endpoint();
  bc.timeout = std::chrono::milliseconds(1500);
  bc.max_retries = 2;
  HttpBackend http(bc);
  MockBackend mock;
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };

  const ScoreRequest sr{"Is it so?", {"no", "yes"}, std::nullopt};
  expect(http.score_choices(sr).logprobs == mock.score_choices(sr).logprobs, "score");
  GenRequest gr;
  gr.prompt = "Sentence 1: Select the plausible answer, Sentence 2:";
  gr.seed = 3;
  expect(http.generate(gr).text == mock.generate(gr).text, "generate");
  const FillRequest fr{"Pick <X> answer", 2};
  expect(wire::encode(http.fill_blanks(fr)) == wire::encode(mock.fill_blanks(fr)), "fill");
  const TranslateRequest tr{"Select the answer", "en", "el"};
  expect(http.translate(tr).text == mock.translate(tr).text, "translate");

  auto kind_of = [](auto&& fn) -> std::optional<BackendError::Kind> {
    try {
      fn();
    } catch (const BackendError& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  server.fail_next(2, 503);
  const long before = server.request_count("/v1/score");
  expect(!kind_of([&] { http.score_choices(sr); }).has_value(), "retry recovers");
  expect(server.request_count("/v1/score") == before + 3, "retry count");
  server.fail_next(1, 404);
  expect(kind_of([&] { http.score_choices(sr); }) == BackendError::Kind::HttpStatus,
         "non-2xx");
  server.set_malformed(true);
  expect(kind_of([&] { http.generate(gr); }) == BackendError::Kind::MalformedResponse,
         "malformed");
  server.set_malformed(false);
  server.set_delay_ms(600);
  bc.timeout = std::chrono::milliseconds(150);
  bc.max_retries = 1;
  expect(kind_of([&] { HttpBackend(bc).score_choices(sr); }) == BackendError::Kind::Timeout,
         "timeout");
  server.set_delay_ms(0);

  // Server side request validation.
  httplib::Client raw(server.endpoint());
  for (const char* path : {"/v1/score", "/v1/generate", "/v1/fill", "/v1/translate"}) {
    auto r = raw.Post(path, R"({"bogus": true})", "application/json");
    expect(r && r->status == 400, path);
  }
  server.stop();
  const double secs = seconds_since(t0);
  expect(secs < 10.0, "under 10 s");
  std::string detail = fmt("4 endpoints, retry/timeout/non-2xx/malformed paths, %.2fs", secs);
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

// 9 ------------------------------------------------------------------------

Verdict cost_accounting() {
  const CostModel base;
  const auto c = estimate_cost(base);
  bool ok = c.generation == 6.0 * 30 * 2 && c.generation == 360.0 &&
            c.iteration_scoring == 6.0 * 30 * 32 * 2 &&
            c.rerank == 5.0 * (6 + 1) * 32 * 2 &&
            c.total == c.generation + c.iteration_scoring + c.rerank;
  auto doubled = [&](auto set) {
    CostModel m = base;
    set(m);
    return estimate_cost(m);
  };
  const auto p = doubled([](CostModel& m) { m.pool_size *= 2; });
  ok = ok && p.generation == 2 * c.generation &&
       p.iteration_scoring == 2 * c.iteration_scoring && p.rerank == c.rerank;
  const auto d = doubled([](CostModel& m) { m.dev_size *= 2; });
  ok = ok && d.generation == c.generation &&
       d.iteration_scoring == 2 * c.iteration_scoring && d.rerank == 2 * c.rerank;
  const auto ch = doubled([](CostModel& m) { m.choices_per_example *= 2; });
  ok = ok && ch.iteration_scoring == 2 * c.iteration_scoring && ch.rerank == 2 * c.rerank;
  const auto g = doubled([](CostModel& m) { m.gen_cost_per_prompt *= 2; });
  ok = ok && g.generation == 2 * c.generation && g.iteration_scoring == c.iteration_scoring;
  const auto t = doubled([](CostModel& m) { m.iterations *= 2; });
  ok = ok && t.generation == 2 * c.generation &&
       t.iteration_scoring == 2 * c.iteration_scoring;
  const auto k = doubled([](CostModel& m) { m.top_k *= 2; });
  ok = ok && k.rerank == 2 * c.rerank && k.generation == c.generation;
  return {ok, fmt("generation %.0f, iteration scoring %.0f, rerank %.0f, total %.0f; "
                  "doubling checks on 6 factors",
                  c.generation, c.iteration_scoring, c.rerank, c.total)};
}

// 10 -----------------------------------------------------------------------

Verdict ablation_harness() {
  const auto dir = scratch_dir("ablate");
  std::string detail;
  bool ok = true;
  for (const auto& [axis, values] :
       std::vector<std::pair<std::string, std::string>>{
           {"val_size", "8,16,32,64,128"}, {"iterations", "0,1,2,3,4,5,6,7,8,9"}}) {
    const std::string cfg = fixture("landscape_oracle.json").string();
    const std::string out = dir.string();
    const char* argv[] = {"gps",         "ablate", "-c",    cfg.c_str(), "--axis",
                          axis.c_str(), "--values", values.c_str(), "--out", out.c_str()};
    std::ostringstream o, e;
    const int code = run_cli(10, argv, o, e);
    if (code != 0) {
      ok = false;
      detail += axis + ": exit " + std::to_string(code) + " " + e.str();
      continue;
    }
    std::ifstream curves(dir / ("ablate_" + axis + "_curves.csv"));
    std::string line;
    std::getline(curves, line);
    std::map<std::pair<int, int>, double> last;
    std::set<int> seen_values;
    int drops = 0, points = 0;
    while (std::getline(curves, line)) {
      int value = 0, split = 0, t = 0;
      double best = 0.0;
      if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &value, &split, &t, &best) != 4) {
        ++drops;
        continue;
      }
      ++points;
      seen_values.insert(value);
      auto key = std::make_pair(value, split);
      if (last.contains(key) && best < last[key]) ++drops;
      last[key] = best;
    }
    const std::size_t expected_values = axis == "val_size" ? 5 : 10;
    ok = ok && drops == 0 && seen_values.size() == expected_values;
    // Mean top-1 per value, for the record.
    std::istringstream summary(o.str());
    std::getline(summary, line);
    std::string means;
    while (std::getline(summary, line)) {
      int value = 0, runs = 0;
      double mean = 0.0, sd = 0.0, held = 0.0;
      const int got = std::sscanf(line.c_str(), "%d,%lf,%lf,%d,%lf", &value, &mean, &sd,
                                  &runs, &held);
      if (got == 5) {
        means += fmt(" %d:%.3f/%.3f", value, mean, held);
      } else if (got >= 2) {
        means += fmt(" %d:%.3f", value, mean);
      }
    }
    detail += fmt("%s%s: %zu runs, %d curve points, %d drops; top-1 dev/held-out by value", 
                  detail.empty() ? "" : " | ", axis.c_str(), last.size(), points, drops) +
              means;
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"template golden suite", golden_templates},
      {"scorer oracle equivalence", scorer_equivalence},
      {"filter correctness", filter_property},
      {"archive elitism", archive_elitism},
      {"synthetic-landscape improvement", landscape_improvement},
      {"determinism and resume", determinism_and_resume},
      {"parallelism invariance", parallelism_invariance},
      {"wire protocol conformance", wire_conformance},
      {"cost accounting", cost_accounting},
      {"ablation harness", ablation_harness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("[%s] %zu. %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
