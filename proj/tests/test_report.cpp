#include <doctest.h>

#include "gps/report.hpp"

using namespace gps;

namespace {

RunRecord record(std::string task, std::vector<double> top, long fp) {
  RunRecord r;
  r.run_id = task + "-run";
  r.task = std::move(task);
  for (std::size_t i = 0; i < top.size(); ++i) {
    r.final_top_k.push_back({"id" + std::to_string(i), "text", top[i]});
  }
  r.generations = {{0, 0.5, 0.4, 0.5}, {1, 0.4, 0.3, 0.5}};
  r.forward_passes = fp;
  return r;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("population mean and std") {
  const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto ms = mean_std(v);
  CHECK(ms.mean == 5.0);
  CHECK(ms.std == 2.0);
  CHECK(mean_std(std::vector<double>{3.0}).std == 0.0);
  CHECK_THROWS(mean_std(std::vector<double>{}));
}

TEST_CASE("summaries group by task") {
  const std::vector<RunRecord> runs = {record("b", {0.8, 0.6}, 100),
                                       record("a", {0.5}, 10),
                                       record("b", {0.6, 0.6}, 300)};
  const auto rows = summarize_runs(runs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].task == "a");
  CHECK(rows[1].runs == 2);
  CHECK(rows[1].top1.mean == doctest::Approx(0.7));
  CHECK(rows[1].top1.std == doctest::Approx(0.1));
  CHECK(rows[1].top_k_mean.mean == doctest::Approx(0.65));
  CHECK(rows[1].mean_forward_passes == 200.0);
  const auto csv = render_csv(rows);
  CHECK(csv.rfind("task,runs,top1_mean", 0) == 0);
  CHECK(csv.find("b,2,0.700000,0.100000,0.650000") != std::string::npos);
  CHECK(render_table(rows).find("0.7000(0.1000)") != std::string::npos);
}

TEST_CASE("run record json round trip") {
  const auto r = record("cb", {0.75, 0.5}, 42);
  const auto back = RunRecord::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(back.top1() == 0.75);
  CHECK(back.top_k_mean() == 0.625);
}

TEST_CASE("cost terms by hand") {
  CostModel m;  // T=6, pool 30, K 5, dev 32, 2 choices, 2 passes per prompt
  const auto c = estimate_cost(m);
  CHECK(c.generation == 360.0);
  CHECK(c.iteration_scoring == 6.0 * 30 * 32 * 2);
  CHECK(c.rerank == 5.0 * 7 * 32 * 2);
  CHECK(c.total == 360.0 + 11520.0 + 2240.0);
  m.rerank_included = false;
  CHECK(estimate_cost(m).rerank == 0.0);
  const auto text = render_cost(m, estimate_cost(m));
  CHECK(text.find("= 360") != std::string::npos);
  CHECK(text.find("4320") != std::string::npos);
  m.dev_size = 0;
  CHECK_THROWS(estimate_cost(m));
}

}
