#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gps/cli.hpp"
#include "helpers.hpp"

using namespace gps;
using nlohmann::json;
using testing_support::fixture;
using testing_support::scratch_dir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gps");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> read_events(const std::filesystem::path& p) {
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

std::filesystem::path write_config(const std::string& name, const json& patch) {
  std::ifstream in(fixture("mock_small.json"));
  json cfg = json::parse(in);
  cfg.merge_patch(patch);
  cfg["task_file"] = fixture("landscape_task.json").string();
  cfg["dataset"] = fixture("landscape.jsonl").string();
  const auto p = scratch_dir("cfg_" + name) / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config loading") {
  const auto cfg = RunConfig::load(fixture("landscape_oracle.json"));
  CHECK(cfg.task.name == "landscape");
  CHECK(cfg.prompts.size() == 5);
  CHECK(cfg.backend.kind == BackendKind::oracle);
  CHECK(cfg.search.mutation.op == Operator::sentence_continuation);
  CHECK(cfg.splits.n_splits == 3);
  for (std::string t : {"copa", "cb", "wsc", "hellaswag"}) {
    const auto c = RunConfig::load(testing_support::data("configs/" + t + ".json"));
    CHECK(c.task.name == t);
    CHECK_FALSE(c.seed_templates().empty());
  }
  CHECK_THROWS_AS(RunConfig::from_json(json{{"task_file", "x"}}, "."), ConfigError);
}

TEST_CASE("search writes records, events and checkpoints") {
  const auto dir = scratch_dir("cli_search");
  const auto r = cli({"search", "-c", fixture("mock_small.json").string(), "--out",
                      dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("top-1 metric") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "run_split0.json"));
  CHECK(std::filesystem::exists(dir / "run_split1.json"));
  CHECK(std::filesystem::exists(dir / "checkpoint_split1.json"));
  CHECK(std::filesystem::exists(dir / "report.csv"));
  const auto events = read_events(dir / "events.jsonl");
  REQUIRE_FALSE(events.empty());
  CHECK(events.front()["event"] == "run_start");
  CHECK(events.back()["event"] == "final");
  CHECK(events.back()["split"] == 1);

  const auto rep = cli({"report", (dir / "run_split0.json").string(),
                        (dir / "run_split1.json").string(), "--csv", "-"});
  CHECK(rep.code == kExitOk);
  CHECK(rep.out.find("landscape") != std::string::npos);
}

TEST_CASE("halt and resume reproduce the uninterrupted run") {
  const auto full = scratch_dir("cli_full");
  REQUIRE(cli({"search", "-c", fixture("mock_small.json").string(), "--out",
               full.string()})
              .code == 0);
  // Split 0 takes 5 advances (4 scorings + rerank); halt inside split 1.
  const auto part = scratch_dir("cli_part");
  const auto h = cli({"search", "-c", fixture("mock_small.json").string(), "--out",
                      part.string(), "--halt-after", "7"});
  CHECK(h.code == 0);
  CHECK(h.err.find("halted") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(part / "run_split1.json"));
  const auto res = cli({"search", "-c", fixture("mock_small.json").string(), "--out",
                        part.string(), "--resume",
                        (part / "checkpoint_split1.json").string()});
  CHECK(res.code == 0);
  CHECK(read_events(part / "events.jsonl") == read_events(full / "events.jsonl"));
  auto final_top = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return json::parse(in)["final_top_k"];
  };
  CHECK(final_top(part / "run_split1.json") == final_top(full / "run_split1.json"));
}

TEST_CASE("cost command") {
  const auto r = cli({"cost", "-c", fixture("landscape_oracle.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("6*30*2 = 360") != std::string::npos);
  const auto nr = cli({"cost", "-c", fixture("landscape_oracle.json").string(),
                       "--no-rerank"});
  CHECK(nr.out.find("(excluded)") != std::string::npos);
}

TEST_CASE("ablate") {
  const auto cfg = write_config("ablate", {{"splits", {{"n_splits", 2}}}});
  const auto dir = scratch_dir("cli_ablate");
  const auto r = cli({"ablate", "-c", cfg.string(), "--axis", "iterations", "--values",
                      "0,2", "--out", dir.string(), "--parallel-values"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("value,mean,std,runs,heldout_mean,heldout_std\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "ablate_iterations_curves.csv"));

  const std::vector<int> values = {0, 1};
  const auto c = RunConfig::load(cfg);
  const auto serial = run_ablation(c, AblationAxis::iterations, values, false);
  const auto parallel = run_ablation(c, AblationAxis::iterations, values, true);
  CHECK(ablation_csv(serial) == ablation_csv(parallel));
  CHECK(ablation_curves_csv(serial) == ablation_curves_csv(parallel));
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"search", "-c", "/nonexistent.json"}).code == kExitConfig);
  const auto cfg = write_config("range", {});
  CHECK(cli({"ablate", "-c", cfg.string(), "--axis", "val_size", "--values", "4"}).code ==
        kExitConfig);
  CHECK(cli({"ablate", "-c", cfg.string(), "--axis", "iterations", "--values", "10"})
            .code == kExitConfig);
  CHECK(cli({"ablate", "-c", cfg.string(), "--axis", "depth", "--values", "1"}).code ==
        kExitConfig);
  const auto dead = write_config(
      "dead", {{"backend",
                {{"kind", "http"}, {"endpoint", "http://127.0.0.1:9"},
                 {"timeout_ms", 200}, {"max_retries", 0}}}});
  CHECK(cli({"search", "-c", dead.string(), "--out", scratch_dir("dead").string()}).code ==
        kExitBackend);
  CHECK(cli({"report", "/nonexistent.json"}).code == kExitConfig);
}

}
