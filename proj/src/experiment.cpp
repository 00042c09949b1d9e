#include "flowloc/experiment.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "flowloc/anchor_filter.hpp"
#include "flowloc/error.hpp"
#include "flowloc/features.hpp"
#include "flowloc/rng.hpp"
#include "flowloc/sampler.hpp"

namespace flowloc {

namespace fs = std::filesystem;
using nlohmann::json;

ModelParams two_path_fixture() {
  ModelParams p;
  p.paths = {{60.0, 0.49}, {67.0, 0.51}};
  p.p_det = 0.7;
  p.p_trans = 0.7;
  p.event_path = 0;
  return p;
}

void ExperimentConfig::validate() const {
  if (!model_from_graph) model.validate();
  sim.validate();
  for (const auto& s : sweep)
    if (!(s.p_det > 0.0 && s.p_det <= 1.0) || !(s.p_trans > 0.0 && s.p_trans <= 1.0))
      throw UsageError(fmt::format("sweep point ({}, {}) outside (0, 1]", s.p_det, s.p_trans));
  if (!(validation.alpha > 0.0 && validation.alpha < 1.0))
    throw UsageError("alpha must lie in (0, 1)");
  if (validation.smoothing && !(*validation.smoothing > 0.0 && *validation.smoothing < 0.5))
    throw UsageError("smoothing must lie in (0, 0.5)");
  if (!(validation_noise_sigma_s >= 0.0)) throw UsageError("noise sigma must be non-negative");
  if (k_max < 1) throw UsageError("k_max must be at least 1");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  if (graph_path && !fs::exists(*graph_path))
    throw UsageError(fmt::format("graph file {} does not exist", *graph_path));
}

ExperimentConfig config_from_json(const json& doc, ExperimentConfig c) {
  if (!doc.is_object()) throw FormatError("config must be a JSON object");
  try {
    if (doc.contains("graph")) c.graph_path = doc.at("graph").get<std::string>();
    c.seed = doc.value("seed", c.seed);
    c.out_dir = doc.value("out", c.out_dir);
    c.jobs = doc.value("jobs", c.jobs);
    c.event_region = doc.value("event_region", c.event_region);
    c.event_offset_cm = doc.value("event_offset", c.event_offset_cm);

    bool explicit_paths = false;
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      if (m.contains("paths")) {
        explicit_paths = true;
        c.model.paths.clear();
        for (const auto& p : m.at("paths"))
          c.model.paths.push_back({p.at("travel_time").get<double>(), p.at("probability").get<double>()});
      }
      c.model.p_det = m.value("p_det", c.model.p_det);
      c.model.p_trans = m.value("p_trans", c.model.p_trans);
      if (m.contains("event_path")) {
        int ep = m.at("event_path").get<int>();
        if (ep < 1) throw FormatError("model.event_path is 1-based");
        c.model.event_path = static_cast<std::size_t>(ep - 1);
      }
      c.model.noise_sigma_s = m.value("noise_sigma", c.model.noise_sigma_s);
      c.model.horizon_s = m.value("horizon", c.model.horizon_s);
      c.model.truncation_eps = m.value("truncation_eps", c.model.truncation_eps);
      c.model_from_graph = m.value("from_graph", c.model_from_graph);
    }
    if (c.graph_path && !explicit_paths && !(doc.contains("model") && doc.at("model").contains("from_graph")))
      c.model_from_graph = true;

    if (doc.contains("simulation")) c.sim = sim_config_from_json(doc.at("simulation"), c.sim);

    if (doc.contains("sweep")) {
      const auto& s = doc.at("sweep");
      c.sweep.clear();
      for (double v : s.value("p_trans", std::vector<double>{})) c.sweep.push_back({1.0, v});
      for (double v : s.value("p_det", std::vector<double>{})) c.sweep.push_back({v, 1.0});
      for (const auto& pair : s.value("mixed", std::vector<std::array<double, 2>>{}))
        c.sweep.push_back({pair[0], pair[1]});
    }
    if (doc.contains("validation")) {
      const auto& v = doc.at("validation");
      c.validation.alpha = v.value("alpha", c.validation.alpha);
      if (v.contains("smoothing")) c.validation.smoothing = v.at("smoothing").get<double>();
      c.validation.kl_excluded_regions =
          v.value("kl_excluded_regions", c.validation.kl_excluded_regions);
      c.validation_regions = v.value("regions", c.validation_regions);
      c.validation_noise_sigma_s = v.value("noise_sigma", c.validation_noise_sigma_s);
    }
    if (doc.contains("pipeline")) {
      const auto& p = doc.at("pipeline");
      c.pipeline_runs = p.value("runs", c.pipeline_runs);
      c.pipeline_fixed_event = p.value("fixed_event", c.pipeline_fixed_event);
      c.k_max = p.value("k_max", c.k_max);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open config {}", path));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("config {} is not valid JSON: {}", path, e.what()));
  }
  return config_from_json(doc, std::move(base));
}

BloodstreamGraph experiment_graph(const ExperimentConfig& config) {
  return config.graph_path ? load_graph_file(*config.graph_path) : builtin_24_region();
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

fs::path prepare_out(const ExperimentConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<NodeId> region_list(const BloodstreamGraph& graph, const ExperimentConfig& config) {
  if (!config.validation_regions.empty()) return config.validation_regions;
  auto paths = cardiovascular_paths(graph);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (auto r = exclusive_region(graph, paths, i)) out.push_back(*r);
  if (out.empty()) throw GraphError("no path has an exclusive region");
  return out;
}

EventSpec event_at(const BloodstreamGraph& graph, NodeId region, double offset_cm) {
  const auto& node = graph.node(region);
  return {region, offset_cm < 0.0 ? 0.5 * node.length_cm : offset_cm};
}

ModelParams model_params(const BloodstreamGraph* graph, const ExperimentConfig& config) {
  if (!config.model_from_graph) return config.model;
  ModelParams p = params_from_graph(*graph, config.event_region);
  p.p_det = config.model.p_det;
  p.p_trans = config.model.p_trans;
  p.noise_sigma_s = config.model.noise_sigma_s;
  p.horizon_s = config.model.horizon_s;
  p.truncation_eps = config.model.truncation_eps;
  return p;
}

int heart_anchor_id(const BloodstreamGraph& graph) {
  const auto* a = graph.heart_anchor();
  if (!a) throw GraphError("graph has no heart anchor");
  return a->id;
}

}  // namespace

std::vector<ValidationPointResult> run_validation(const BloodstreamGraph& graph,
                                                  const ExperimentConfig& config) {
  const auto regions = region_list(graph, config);
  const int heart = heart_anchor_id(graph);
  const std::size_t nr = regions.size(), np = config.sweep.size();

  std::vector<RegionSamples> model(np * nr), sim(np * nr);
  parallel_for(np * nr, config.jobs, [&](std::size_t task) {
    const std::size_t pi = task / nr, ri = task % nr;
    const auto pt = config.sweep[pi];
    const NodeId region = regions[ri];
    const std::string name = graph.node(region).name;

    ModelParams params = params_from_graph(graph, region);
    params.p_det = pt.p_det;
    params.p_trans = pt.p_trans;
    params.noise_sigma_s = config.validation_noise_sigma_s;
    params.horizon_s = config.sim.duration_s;
    auto seed_m = derive_seed(config.seed, {pi, static_cast<std::uint64_t>(region), 0});
    model[task] = {region, name, sample_device_streams(params, config.sim.n_devices, seed_m)};

    SimConfig sc = config.sim;
    sc.transmission_mode = TransmissionMode::injected_probability;
    sc.p_trans = pt.p_trans;
    sc.injected_p_det = pt.p_det;
    sc.seed = derive_seed(config.seed, {pi, static_cast<std::uint64_t>(region), 1});
    auto trace = run(graph, sc, event_at(graph, region, config.event_offset_cm));
    sim[task] = {region, name, trace.raw_data(heart)};
  });

  ValidationConfig vc = config.validation;
  auto paths = cardiovascular_paths(graph);
  for (NodeId v : always_traversed(graph, paths)) vc.kl_excluded_regions.push_back(v);

  std::vector<ValidationPointResult> out;
  for (std::size_t pi = 0; pi < np; ++pi) {
    std::span<const RegionSamples> m(model.data() + pi * nr, nr), s(sim.data() + pi * nr, nr);
    out.push_back({config.sweep[pi], validate(m, s, vc)});
  }
  return out;
}

std::vector<fs::path> cmd_model_dist(const ExperimentConfig& config) {
  std::optional<BloodstreamGraph> graph;
  if (config.model_from_graph) graph = experiment_graph(config);
  ModelParams params = model_params(graph ? &*graph : nullptr, config);
  auto table = enumerate_distribution(params);
  auto dir = prepare_out(config);
  auto dist = dir / "distribution.csv", hist = dir / "histogram.csv";
  auto out = open_out(dist);
  write_distribution_csv(table, params, out);
  auto hout = open_out(hist);
  write_histogram_csv(table, hout);
  return {dist, hist};
}

std::vector<fs::path> cmd_simulate(const ExperimentConfig& config) {
  auto graph = experiment_graph(config);
  SimConfig sc = config.sim;
  sc.seed = config.seed;
  auto trace = run(graph, sc, event_at(graph, config.event_region, config.event_offset_cm));
  auto dir = prepare_out(config);
  auto tpath = dir / "trace.csv", dpath = dir / "diagnostics.csv";
  auto tout = open_out(tpath);
  write_trace_csv(trace, tout);
  auto dout = open_out(dpath);
  write_diagnostics_csv(trace, dout);
  return {tpath, dpath};
}

std::vector<fs::path> cmd_validate(const ExperimentConfig& config) {
  if (config.sweep.empty()) throw UsageError("validate needs a non-empty sweep");
  auto graph = experiment_graph(config);
  auto results = run_validation(graph, config);

  auto dir = prepare_out(config);
  std::vector<fs::path> files;
  auto summary = dir / "validation_summary.csv";
  auto out = open_out(summary);
  out << "point,p_det,p_trans,regions,mw_tested,mw_accepted,acceptance_fraction,"
         "mean_ecdf_distance,max_kl,mean_kl\n";
  json doc = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [pt, rep] = results[i];
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", i, pt.p_det, pt.p_trans,
                       rep.regions.size(), rep.mw_tested, rep.mw_accepted, rep.acceptance_fraction,
                       rep.mean_ecdf_distance, rep.max_kl, rep.mean_kl);
    json entry = report_summary_json(rep);
    entry["point"] = i;
    entry["p_det"] = pt.p_det;
    entry["p_trans"] = pt.p_trans;
    doc.push_back(std::move(entry));
    auto rpath = dir / fmt::format("regions_{}.csv", i);
    auto rout = open_out(rpath);
    write_report_csv(rep, rout);
    files.push_back(rpath);
  }
  auto jpath = dir / "validation_summary.json";
  auto jout = open_out(jpath);
  jout << doc.dump(2) << '\n';
  files.insert(files.begin(), {summary, jpath});
  return files;
}

std::vector<fs::path> cmd_features(const ExperimentConfig& config,
                                   const std::optional<std::string>& trace_path) {
  auto graph = experiment_graph(config);
  SimTrace trace;
  std::size_t devices = config.sim.n_devices;
  if (trace_path) {
    std::ifstream in(*trace_path);
    if (!in) throw UsageError(fmt::format("cannot open trace {}", *trace_path));
    trace = read_trace_csv(in);
    if (!trace.devices.empty()) devices = trace.devices.size();
  } else {
    SimConfig sc = config.sim;
    sc.seed = config.seed;
    trace = run(graph, sc, event_at(graph, config.event_region, config.event_offset_cm));
  }
  GmmOptions opt;
  opt.k_max = config.k_max;

  auto dir = prepare_out(config);
  auto path = dir / "features.csv";
  auto out = open_out(path);
  out << "anchor_id";
  for (std::size_t c = 1; c <= config.k_max; ++c) out << fmt::format(",weight_{0},mean_{0},variance_{0}", c);
  out << ",avg_positive_bits,reception_rate\n";
  for (const auto& a : graph.anchors()) {
    auto fv = extract_features(trace, a.id, devices, opt,
                               derive_seed(config.seed, {static_cast<std::uint64_t>(a.id)}));
    out << a.id;
    for (double v : fv.values) out << fmt::format(",{}", v);
    out << '\n';
  }
  return {path};
}

std::vector<fs::path> cmd_pipeline(const ExperimentConfig& config) {
  if (config.pipeline_runs < 1) throw UsageError("pipeline needs at least one run");
  auto graph = experiment_graph(config);
  const auto regions = region_list(graph, config);
  const std::size_t n = config.pipeline_runs;

  std::vector<NodeId> labels(n);
  std::vector<SimTrace> traces(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    NodeId region = config.event_region;
    if (!config.pipeline_fixed_event) {
      Rng pick(derive_seed(config.seed, {i, 0}));
      region = regions[std::uniform_int_distribution<std::size_t>(0, regions.size() - 1)(pick)];
    }
    labels[i] = region;
    SimConfig sc = config.sim;
    sc.seed = derive_seed(config.seed, {i, 1});
    traces[i] = run(graph, sc, event_at(graph, region, config.event_offset_cm));
  });

  std::vector<DatasetRun> runs;
  for (std::size_t i = 0; i < n; ++i)
    runs.push_back({&graph, &traces[i], labels[i], config.sim.n_devices, derive_seed(config.seed, {i, 2})});
  DatasetOptions opt;
  opt.gmm.k_max = config.k_max;

  auto dir = prepare_out(config);
  auto path = dir / "dataset.jsonl";
  auto out = open_out(path);
  std::size_t kept = export_dataset(runs, opt, out);

  json summary{{"runs", n}, {"samples", kept}, {"seed", config.seed}};
  std::map<NodeId, std::size_t> hist;
  for (auto l : labels) ++hist[l];
  json by_label = json::object();
  for (auto [l, c] : hist) by_label[std::to_string(l)] = c;
  summary["events_per_region"] = by_label;
  auto spath = dir / "pipeline_summary.json";
  auto sout = open_out(spath);
  sout << summary.dump(2) << '\n';
  return {path, spath};
}

std::vector<fs::path> cmd_filter(const ExperimentConfig& config, const std::string& predictions_path,
                                 const std::string& logits_path) {
  auto graph = experiment_graph(config);
  std::ifstream pin(predictions_path), lin(logits_path);
  if (!pin) throw UsageError(fmt::format("cannot open predictions {}", predictions_path));
  if (!lin) throw UsageError(fmt::format("cannot open logits {}", logits_path));
  auto predictions = read_predictions_csv(pin);
  auto logits = read_logits_csv(lin);

  CoverCache cache(graph);
  for (const auto& w : cache.warnings()) fmt::print(stderr, "warning: {}\n", w);
  RegionSet all;
  for (const auto& [id, s] : logits.logits) all.insert(id);
  auto allowed = allowed_regions(predictions, cache.covers(), all);
  auto filtered = apply_filter(logits, allowed);

  auto dir = prepare_out(config);
  auto path = dir / "filtered_logits.csv";
  auto out = open_out(path);
  write_logits_csv(filtered, out);
  return {path};
}

}  // namespace flowloc
