#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "flowloc/anchor_filter.hpp"
#include "flowloc/error.hpp"
#include "flowloc/experiment.hpp"

using namespace flowloc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("flowloc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

int cli(const std::string& args) {
  std::string cmd = std::string(FLOWLOC_CLI) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ExperimentConfig small_pipeline(const fs::path& out) {
  ExperimentConfig c;
  c.sim.n_devices = 16;
  c.sim.duration_s = 300;
  c.pipeline_runs = 4;
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = config_from_json(json::parse(R"({
    "seed": 9, "out": "x", "jobs": 2,
    "model": {"paths": [{"travel_time": 50, "probability": 1}], "p_det": 0.5, "event_path": 1},
    "simulation": {"n_devices": 12, "duration": 200},
    "sweep": {"p_trans": [0.2, 0.4], "p_det": [0.6], "mixed": [[0.5, 0.5]]},
    "validation": {"alpha": 0.01, "kl_excluded_regions": [23]},
    "pipeline": {"runs": 7, "k_max": 3}
  })"));
  CHECK(c.seed == 9);
  CHECK(c.out_dir == "x");
  CHECK(c.jobs == 2);
  REQUIRE(c.model.paths.size() == 1);
  CHECK(c.model.p_det == 0.5);
  CHECK(c.model.p_trans == 0.7);
  CHECK(c.sim.n_devices == 12);
  CHECK(c.sim.duration_s == 200);
  REQUIRE(c.sweep.size() == 4);
  CHECK(c.sweep[0].p_det == 1.0);
  CHECK(c.sweep[2].p_trans == 1.0);
  CHECK(c.sweep[3].p_det == 0.5);
  CHECK(c.validation.alpha == 0.01);
  CHECK(c.validation.kl_excluded_regions == std::vector<int>{23});
  CHECK(c.pipeline_runs == 7);
  CHECK(c.k_max == 3);
  CHECK_FALSE(c.model_from_graph);
  CHECK(config_from_json(json::parse(R"({"graph": "g.json"})")).model_from_graph);

  CHECK_THROWS_AS(config_from_json(json::parse("[1]")), FormatError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seed": "abc"})")), FormatError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"model": {"event_path": 0}})")), FormatError);
}

TEST_CASE("model-dist writes the fixture table") {
  auto dir = scratch("model");
  ExperimentConfig c;
  c.out_dir = dir.string();
  auto files = cmd_model_dist(c);
  REQUIRE(files.size() == 2);
  auto text = slurp(files[0]);
  for (const char* row : {"\n1,0,1,60,", "\n0,1,0,67,", "\n2,0,1,120,", "\n1,1,1,127,", "\n0,2,0,134,"})
    CHECK(text.find(row) != std::string::npos);
  CHECK(text.find("# residual_tail=") != std::string::npos);
  auto hist = slurp(files[1]);
  CHECK(hist.rfind("t_mean_s,p_b0,p_b1\n60,", 0) == 0);
  cmd_model_dist(c);
  CHECK(slurp(files[0]) == text);
}

TEST_CASE("validate needs a sweep") {
  auto dir = scratch("validate");
  ExperimentConfig c;
  c.out_dir = dir.string();
  CHECK_THROWS_AS(cmd_validate(c), UsageError);
}

TEST_CASE("small validation run") {
  auto dir = scratch("validate_small");
  ExperimentConfig c;
  c.out_dir = dir.string();
  c.sim.n_devices = 16;
  c.sim.duration_s = 400;
  c.sweep = {{1.0, 0.8}};
  c.validation_regions = {1, 2, 3};
  c.jobs = 2;
  auto results = run_validation(experiment_graph(c), c);
  REQUIRE(results.size() == 1);
  CHECK(results[0].report.regions.size() == 3);
  auto files = cmd_validate(c);
  auto summary = slurp(dir / "validation_summary.csv");
  CHECK(summary.rfind("point,p_det,p_trans,regions,mw_tested", 0) == 0);
  c.jobs = 1;
  cmd_validate(c);
  CHECK(slurp(dir / "validation_summary.csv") == summary);
  CHECK(fs::exists(dir / "regions_0.csv"));
}

TEST_CASE("pipeline is deterministic and labels fixed events") {
  auto d1 = scratch("pipe1"), d2 = scratch("pipe2");
  auto c = small_pipeline(d1);
  cmd_pipeline(c);
  c.out_dir = d2.string();
  c.jobs = 3;
  cmd_pipeline(c);
  auto a = slurp(d1 / "dataset.jsonl");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(d2 / "dataset.jsonl"));

  auto d3 = scratch("pipe3");
  c.out_dir = d3.string();
  c.event_region = 6;
  c.pipeline_fixed_event = true;
  cmd_pipeline(c);
  std::istringstream lines(slurp(d3 / "dataset.jsonl"));
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) CHECK(json::parse(line).at("label") == 6);
  auto summary = json::parse(slurp(d3 / "pipeline_summary.json"));
  CHECK(summary.at("samples") == n);
  CHECK(summary.at("runs") == 4);
}

TEST_CASE("features command") {
  auto dir = scratch("features");
  ExperimentConfig c;
  c.out_dir = dir.string();
  c.sim.n_devices = 16;
  c.sim.duration_s = 300;
  c.event_region = 3;
  auto files = cmd_features(c, std::nullopt);
  auto text = slurp(dir / "features.csv");
  CHECK(text.rfind("anchor_id,weight_1,mean_1,variance_1", 0) == 0);
  std::istringstream in(text);
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("filter command") {
  auto dir = scratch("filter");
  spit(dir / "pred.csv", "anchor_id,bit\n1,1\n2,0\n");
  std::string logits = "region_id,score\n";
  for (int r = 1; r <= 24; ++r) logits += std::to_string(r) + "," + std::to_string(r == 23 ? 5.0 : 0.1 * r) + "\n";
  spit(dir / "logits.csv", logits);
  ExperimentConfig c;
  c.out_dir = dir.string();
  auto files = cmd_filter(c, (dir / "pred.csv").string(), (dir / "logits.csv").string());
  REQUIRE(files.size() == 1);
  std::ifstream in(files[0]);
  auto pred = read_logits_csv(in);
  std::ifstream lin(dir / "logits.csv");
  auto raw = read_logits_csv(lin);
  NodeId best = pred.argmax();
  CHECK(best != 23);
  for (NodeId r : {3, 6, 9, 11}) CHECK(pred.logits.at(r) == raw.logits.at(r));
  CHECK(pred.logits.at(23) < -1e5);
  CHECK(pred.logits.at(4) < -1e5);
}

TEST_CASE("CLI exit codes and precedence") {
  auto dir = scratch("cli");
  auto out = (dir / "o").string();
  CHECK(cli("model-dist --out " + out) == 0);
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 1);
  CHECK(cli("nosuch") == 1);
  CHECK(cli("model-dist --p-det 2 --out " + out) == 1);
  CHECK(cli("validate --out " + out) == 1);
  CHECK(cli("filter --predictions /nonexistent --logits /nonexistent") == 1);
  spit(dir / "bad.csv", "anchor_id,bit\n1,7\n");
  spit(dir / "logits.csv", "1,0.5\n");
  CHECK(cli("filter --out " + out + " --predictions " + (dir / "bad.csv").string() + " --logits " +
            (dir / "logits.csv").string()) == 2);
  spit(dir / "broken.json", "{not json");
  CHECK(cli("model-dist --config " + (dir / "broken.json").string()) == 1);

  // Flags override the file, the file overrides defaults.
  spit(dir / "cfg.json", R"({"out": ")" + (dir / "from_file").string() + R"(", "model": {"p_det": 0.5}})");
  CHECK(cli("model-dist --config " + (dir / "cfg.json").string()) == 0);
  CHECK(slurp(dir / "from_file" / "distribution.csv").find("# p_det=0.5\n") != std::string::npos);
  CHECK(cli("model-dist --p-det 0.9 --out " + out + " --config " + (dir / "cfg.json").string()) == 0);
  CHECK(slurp(dir / "o" / "distribution.csv").find("# p_det=0.9\n") != std::string::npos);
}
