#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "flowloc/analytic_model.hpp"
#include "flowloc/rng.hpp"

namespace flowloc {

// Inverse-CDF draws over a DistributionTable. The residual tail is a
// separate outcome so callers decide between re-normalising and stopping.
class TableSampler {
 public:
  explicit TableSampler(const DistributionTable& table);

  // Entry index, or std::nullopt when the draw falls in the residual tail.
  std::optional<std::size_t> draw(Rng& rng) const;
  // Entry index from the table re-normalised without the tail.
  std::size_t draw_in_support(Rng& rng) const;

 private:
  std::size_t locate(double u) const;

  std::vector<double> cumulative_;
  double support_mass_ = 0.0;
  double tail_mass_ = 0.0;
};

// Draws one report of the analytical model without materialising the table:
// loop count N ~ Geometric(P_trans), paths ~ Categorical(P_R), and the bit
// ~ Bernoulli(1 - (1 - P_det)^{n_j}). Times above the horizon are reported
// as overflow.
class GenerativeSampler {
 public:
  explicit GenerativeSampler(const ModelParams& params);

  struct Outcome {
    double lattice_time_s;
    int bit;
    bool overflow;
  };
  Outcome draw(Rng& rng) const;

 private:
  ModelParams params_;
  std::vector<double> cumulative_;
};

// IID samples of the model: (n, b) from the table with the tail removed,
// t = sum n_i T_i + Q, Q ~ N(0, sigma^2) redrawn until t > 0. Tables larger
// than `table_cap` are replaced by the generative route.
std::vector<RawDatum> sample_raw_data(const ModelParams& params, std::size_t count,
                                      std::uint64_t seed, std::size_t table_cap = 1u << 16);

// Same draws through an already enumerated table.
std::vector<RawDatum> sample_raw_data(const ModelParams& params, const DistributionTable& table,
                                      std::size_t count, std::uint64_t seed);

// Reports of `devices` nanodevices, each emitting consecutive reports until
// their cumulative time would exceed the horizon. Uses the table when it has
// at most `table_cap` entries and the generative route otherwise.
std::vector<RawDatum> sample_device_streams(const ModelParams& params, std::size_t devices,
                                            std::uint64_t seed,
                                            std::size_t table_cap = 1u << 18);

struct MsePoint {
  std::size_t count = 0;
  double mse = 0.0;
};

// Mean over table entries of (empirical frequency - probability)^2 with
// `count` single-report devices, averaged over `replicates` seeds.
std::vector<MsePoint> mse_vs_count(const ModelParams& params,
                                   const std::vector<std::size_t>& device_counts,
                                   std::uint64_t seed, std::size_t replicates = 1);

}  // namespace flowloc
