#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "flowloc/error.hpp"
#include "flowloc/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::optional<std::string> graph;
  std::optional<int> event_region;
  std::optional<double> p_det;
  std::optional<double> p_trans;
  std::optional<std::size_t> devices;
  std::optional<double> duration;
  std::optional<double> alpha;
  std::optional<double> smoothing;
  std::optional<double> noise_sigma;
  std::vector<double> sweep_p_trans;
  std::vector<double> sweep_p_det;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> k_max;
  std::optional<std::string> trace;
  std::string predictions;
  std::string logits;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void add_graph(CLI::App* cmd, Flags& f) {
  cmd->add_option("--graph", f.graph, "graph JSON (builtin 24-region graph if omitted)")
      ->check(CLI::ExistingFile);
}

flowloc::ExperimentConfig build_config(const Flags& f) {
  flowloc::ExperimentConfig c;
  if (!f.config.empty()) c = flowloc::load_config_file(f.config, c);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.graph) {
    c.graph_path = *f.graph;
    c.model_from_graph = true;
  }
  if (f.event_region) c.event_region = *f.event_region;
  if (f.p_det) {
    c.model.p_det = *f.p_det;
    c.sim.injected_p_det = *f.p_det;
  }
  if (f.p_trans) {
    c.model.p_trans = *f.p_trans;
    c.sim.p_trans = *f.p_trans;
  }
  if (f.devices) c.sim.n_devices = *f.devices;
  if (f.duration) c.sim.duration_s = *f.duration;
  if (f.alpha) c.validation.alpha = *f.alpha;
  if (f.smoothing) c.validation.smoothing = *f.smoothing;
  if (f.noise_sigma) c.validation_noise_sigma_s = *f.noise_sigma;
  if (!f.sweep_p_trans.empty() || !f.sweep_p_det.empty()) {
    c.sweep.clear();
    for (double v : f.sweep_p_trans) c.sweep.push_back({1.0, v});
    for (double v : f.sweep_p_det) c.sweep.push_back({v, 1.0});
  }
  if (f.runs) c.pipeline_runs = *f.runs;
  if (f.k_max) c.k_max = *f.k_max;
  if (f.event_region) c.pipeline_fixed_event = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-guided in-body localization workbench"};
  app.require_subcommand(1);
  Flags f;

  auto* model = app.add_subcommand("model-dist", "enumerate the analytic raw-data distribution");
  add_common(model, f);
  add_graph(model, f);
  model->add_option("--event-region", f.event_region, "event node when paths come from the graph");
  model->add_option("--p-det", f.p_det, "detection probability");
  model->add_option("--p-trans", f.p_trans, "transmission probability");

  auto* sim = app.add_subcommand("simulate", "run the nanodevice circulation simulator");
  add_common(sim, f);
  add_graph(sim, f);
  sim->add_option("--event-region", f.event_region, "event node");
  sim->add_option("--p-det", f.p_det, "injected detection probability");
  sim->add_option("--p-trans", f.p_trans, "injected transmission probability");
  sim->add_option("--devices", f.devices, "number of nanodevices");
  sim->add_option("--duration", f.duration, "simulated time in seconds");

  auto* val = app.add_subcommand("validate", "compare the model sampler with the simulator");
  add_common(val, f);
  add_graph(val, f);
  val->add_option("--alpha", f.alpha, "Mann-Whitney significance level");
  val->add_option("--smoothing", f.smoothing, "KL clamp (default 1/(N+2))");
  val->add_option("--noise-sigma", f.noise_sigma, "model time jitter in seconds");
  val->add_option("--sweep-p-trans", f.sweep_p_trans, "P_trans values with P_det = 1");
  val->add_option("--sweep-p-det", f.sweep_p_det, "P_det values with P_trans = 1");
  val->add_option("--devices", f.devices, "number of nanodevices");
  val->add_option("--duration", f.duration, "simulated time in seconds");

  auto* feat = app.add_subcommand("features", "GMM anchor features of a trace");
  add_common(feat, f);
  add_graph(feat, f);
  feat->add_option("--trace", f.trace, "trace CSV (simulated from the config if omitted)")
      ->check(CLI::ExistingFile);
  feat->add_option("--event-region", f.event_region, "event node when simulating");
  feat->add_option("--k-max", f.k_max, "largest mixture size");

  auto* pipe = app.add_subcommand("pipeline", "simulate runs and export the JSON-lines dataset");
  add_common(pipe, f);
  add_graph(pipe, f);
  pipe->add_option("--runs", f.runs, "number of simulations");
  pipe->add_option("--event-region", f.event_region, "fix the event in this region");
  pipe->add_option("--k-max", f.k_max, "largest mixture size");

  auto* filt = app.add_subcommand("filter", "restrict region logits with extra-anchor predictions");
  add_common(filt, f);
  add_graph(filt, f);
  filt->add_option("--predictions", f.predictions, "CSV anchor_id,bit")->required()->check(CLI::ExistingFile);
  filt->add_option("--logits", f.logits, "CSV region_id,score")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  flowloc::ExperimentConfig config;
  try {
    config = build_config(f);
  } catch (const flowloc::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }

  try {
    std::vector<std::filesystem::path> files;
    if (*model)
      files = flowloc::cmd_model_dist(config);
    else if (*sim)
      files = flowloc::cmd_simulate(config);
    else if (*val)
      files = flowloc::cmd_validate(config);
    else if (*feat)
      files = flowloc::cmd_features(config, f.trace);
    else if (*pipe)
      files = flowloc::cmd_pipeline(config);
    else
      files = flowloc::cmd_filter(config, f.predictions, f.logits);
    for (const auto& p : files) fmt::print("{}\n", p.string());
  } catch (const flowloc::UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
