#include "flowloc/features.hpp"

#include <cmath>
#include <ostream>

#include "flowloc/error.hpp"
#include "flowloc/rng.hpp"

namespace flowloc {

std::size_t positive_bits(const SimTrace& trace, int anchor_id) {
  std::size_t n = 0;
  for (const auto& r : trace.receptions)
    if (r.anchor_id == anchor_id && r.datum.b == 1) ++n;
  return n;
}

AnchorFeatureVector extract_features(const SimTrace& trace, int anchor_id, std::size_t n_devices,
                                     const GmmOptions& options, std::uint64_t seed) {
  AnchorFeatureVector fv;
  fv.anchor_id = anchor_id;
  fv.values.assign(feature_length(options.k_max), 0.0);

  std::vector<double> positives;
  std::size_t received = 0;
  for (const auto& r : trace.receptions) {
    if (r.anchor_id != anchor_id) continue;
    ++received;
    if (r.datum.b == 1) positives.push_back(r.datum.t_s);
  }
  if (!positives.empty()) {
    auto fit = fit_gmm(positives, options, seed);
    for (std::size_t c = 0; c < fit.params.k(); ++c) {
      fv.values[3 * c] = fit.params.weights[c];
      fv.values[3 * c + 1] = fit.params.means[c];
      fv.values[3 * c + 2] = fit.params.variances[c];
    }
  }
  const std::size_t base = 3 * options.k_max;
  fv.values[base] = n_devices ? static_cast<double>(positives.size()) / n_devices : 0.0;
  fv.values[base + 1] = trace.duration_s > 0 ? received / trace.duration_s : 0.0;
  return fv;
}

namespace {

struct ColumnStats {
  double mean = 0.0;
  double sd = 0.0;
  double standardise(double x) const { return sd > 0.0 ? (x - mean) / sd : 0.0; }
};

ColumnStats column_stats(const std::vector<double>& v) {
  ColumnStats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / v.size());
  // Guard against rounding noise on a constant column.
  if (s.sd <= 1e-12 * (1.0 + std::abs(s.mean))) s.sd = 0.0;
  return s;
}

}  // namespace

std::vector<nlohmann::json> build_dataset(const std::vector<DatasetRun>& runs,
                                          const DatasetOptions& options) {
  std::vector<const DatasetRun*> kept;
  for (const auto& run : runs) {
    if (!run.graph || !run.trace) throw ParameterError("dataset run without graph or trace");
    const auto* heart = run.graph->heart_anchor();
    if (!heart) throw GraphError("dataset graph has no heart anchor");
    if (positive_bits(*run.trace, heart->id) >= options.min_positive_bits) kept.push_back(&run);
  }
  if (kept.empty()) throw Error("no runs left after filtering for positive heart-anchor reports");

  std::vector<double> types, lengths, speeds;
  for (const auto* run : kept)
    for (const auto& n : run->graph->nodes()) {
      types.push_back(static_cast<double>(n.region_type));
      lengths.push_back(n.length_cm);
      speeds.push_back(n.blood_speed_cm_s);
    }
  const auto st = column_stats(types), sl = column_stats(lengths), ss = column_stats(speeds);

  std::vector<nlohmann::json> records;
  for (const auto* run : kept) {
    nlohmann::json rec;
    auto& regions = rec["regions"] = nlohmann::json::array();
    for (const auto& n : run->graph->nodes())
      regions.push_back({{"id", n.id},
                         {"type", st.standardise(static_cast<double>(n.region_type))},
                         {"length", sl.standardise(n.length_cm)},
                         {"speed", ss.standardise(n.blood_speed_cm_s)},
                         {"centroid", n.centroid_cm}});
    auto& edges = rec["edges"] = nlohmann::json::array();
    for (const auto& e : run->graph->edges()) edges.push_back({e.from, e.to});
    auto& anchors = rec["anchors"] = nlohmann::json::array();
    for (const auto& a : run->graph->anchors()) {
      auto fv = extract_features(*run->trace, a.id, run->n_devices, options.gmm,
                                 derive_seed(run->seed, {static_cast<std::uint64_t>(a.id)}));
      anchors.push_back({{"id", a.id}, {"features", fv.values}});
    }
    rec["label"] = run->label;
    records.push_back(std::move(rec));
  }
  return records;
}

std::size_t export_dataset(const std::vector<DatasetRun>& runs, const DatasetOptions& options,
                           std::ostream& out) {
  auto records = build_dataset(runs, options);
  for (const auto& r : records) out << r.dump() << '\n';
  return records.size();
}

}  // namespace flowloc
