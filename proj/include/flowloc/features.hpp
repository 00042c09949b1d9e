#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowloc/gmm.hpp"
#include "flowloc/graph.hpp"
#include "flowloc/simulator.hpp"

namespace flowloc {

// Layout: (weight, mean, variance) per component ascending by mean, zero
// padded to k_max, then avg_positive_bits and reception_rate.
struct AnchorFeatureVector {
  int anchor_id = 0;
  std::vector<double> values;
};

inline std::size_t feature_length(std::size_t k_max) { return 3 * k_max + 2; }

// Features of the positive-bit reports received at `anchor_id`.
// avg_positive_bits = positives / n_devices, reception_rate = receptions / duration.
AnchorFeatureVector extract_features(const SimTrace& trace, int anchor_id, std::size_t n_devices,
                                     const GmmOptions& options, std::uint64_t seed);

std::size_t positive_bits(const SimTrace& trace, int anchor_id);

struct DatasetRun {
  const BloodstreamGraph* graph = nullptr;
  const SimTrace* trace = nullptr;
  NodeId label = 0;
  std::size_t n_devices = 0;
  std::uint64_t seed = 0;
};

struct DatasetOptions {
  GmmOptions gmm;
  std::size_t min_positive_bits = 2;  // at the heart anchor
};

// Writes one JSON document per kept run. Region type, length and speed are
// standardised over all region rows of the kept runs; constant columns become 0.
// Returns the number of records; throws if every run is filtered out.
std::size_t export_dataset(const std::vector<DatasetRun>& runs, const DatasetOptions& options,
                           std::ostream& out);

std::vector<nlohmann::json> build_dataset(const std::vector<DatasetRun>& runs,
                                          const DatasetOptions& options);

}  // namespace flowloc
