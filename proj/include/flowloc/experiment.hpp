#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowloc/analytic_model.hpp"
#include "flowloc/error.hpp"
#include "flowloc/graph.hpp"
#include "flowloc/simulator.hpp"
#include "flowloc/stats.hpp"

namespace flowloc {

struct SweepPoint {
  double p_det = 1.0;
  double p_trans = 1.0;
};

// Two paths of 60 s and 67 s taken with 0.49 / 0.51, P_det = P_trans = 0.7, event on the first.
ModelParams two_path_fixture();

struct ExperimentConfig {
  std::optional<std::string> graph_path;  // builtin 24-region graph when empty
  ModelParams model = two_path_fixture();
  bool model_from_graph = false;          // derive paths from the graph and event region
  SimConfig sim;
  NodeId event_region = 1;
  double event_offset_cm = -1.0;          // < 0 places the event mid-node
  std::vector<SweepPoint> sweep;
  ValidationConfig validation;
  double validation_noise_sigma_s = 0.0;   // the simulator reproduces lattice times exactly
  std::vector<NodeId> validation_regions;  // every path's exclusive region when empty
  std::size_t pipeline_runs = 100;
  bool pipeline_fixed_event = false;
  std::size_t k_max = 4;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const;
};

// Reads the JSON config onto `base`; absent keys keep their values.
// Throws FormatError on schema problems.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

BloodstreamGraph experiment_graph(const ExperimentConfig& config);

// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct ValidationPointResult {
  SweepPoint point;
  ValidationReport report;
};

// Model sampler against simulator for every sweep point and validation region.
std::vector<ValidationPointResult> run_validation(const BloodstreamGraph& graph,
                                                  const ExperimentConfig& config);

// Each command writes its files under config.out_dir and returns their paths.
std::vector<std::filesystem::path> cmd_model_dist(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_validate(const ExperimentConfig& config);
// Uses `trace_path` when given, otherwise simulates config.event_region first.
std::vector<std::filesystem::path> cmd_features(const ExperimentConfig& config,
                                                const std::optional<std::string>& trace_path);
std::vector<std::filesystem::path> cmd_pipeline(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_filter(const ExperimentConfig& config,
                                              const std::string& predictions_path,
                                              const std::string& logits_path);

}  // namespace flowloc
