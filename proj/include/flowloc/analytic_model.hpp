#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "flowloc/graph.hpp"

namespace flowloc {

struct PathSpec {
  double travel_time_s = 0.0;
  double probability = 0.0;
};

struct ModelParams {
  std::vector<PathSpec> paths;
  double p_det = 1.0;
  double p_trans = 1.0;
  std::size_t event_path = 0;  // index into `paths`
  double noise_sigma_s = 1.0;
  double horizon_s = 1100.0;
  double truncation_eps = 0.0;

  // Throws ParameterError on any violated invariant.
  void validate() const;
  double max_travel_time() const;
};

// Paths of `graph` with the event placed on `event_node`, which must lie on
// exactly one cardiovascular path.
ModelParams params_from_graph(const BloodstreamGraph& graph, NodeId event_node);

struct RawDatum {
  double t_s = 0.0;
  int b = 0;

  bool operator==(const RawDatum&) const = default;
};

// Reported times are kept at microsecond resolution so that the analytic
// lattice and simulated loop times compare equal.
double quantize_time(double t_s);

using IterationVector = std::vector<int>;

double log_multinomial_coefficient(std::span<const int> n);
double multinomial_coefficient(std::span<const int> n);

// Probability that a report carries loop counts `n` at all, i.e. the
// multinomial path term times the transmission term.
double prob_transmitted(std::span<const int> n, const ModelParams& params);
// Probability of outcome (n, b=1).
double prob_detected(std::span<const int> n, const ModelParams& params);
// Probability of outcome (n, b=0).
double prob_not_detected(std::span<const int> n, const ModelParams& params);

// Outcome table with flat storage; entry k has loop counts
// counts[k*paths .. (k+1)*paths).
class DistributionTable {
 public:
  DistributionTable() = default;
  explicit DistributionTable(std::size_t path_count) : paths_(path_count) {}

  std::size_t size() const { return bits_.size(); }
  std::size_t path_count() const { return paths_; }
  std::span<const std::uint16_t> counts(std::size_t k) const {
    return {counts_.data() + k * paths_, paths_};
  }
  int bit(std::size_t k) const { return bits_[k]; }
  double probability(std::size_t k) const { return probability_[k]; }
  double t_mean(std::size_t k) const { return t_mean_[k]; }
  double residual_tail() const { return residual_tail_; }
  double total_mass() const;

  // Entry with the given loop counts and bit, or size() if absent.
  std::size_t find(std::span<const int> n, int b) const;

  void push(std::span<const int> n, int b, double t_mean, double probability);
  void set_residual_tail(double tail) { residual_tail_ = tail; }
  // Orders entries by (t_mean, loop counts, bit).
  void sort();

 private:
  std::size_t paths_ = 0;
  std::vector<std::uint16_t> counts_;
  std::vector<std::uint8_t> bits_;
  std::vector<double> probability_;
  std::vector<double> t_mean_;
  double residual_tail_ = 1.0;
};

constexpr std::size_t kDefaultEntryCap = 10'000'000;

// Enumerates every loop-count vector whose deterministic time fits the
// horizon; entries below the truncation threshold are dropped.
// Throws HorizonTooLarge if more than `max_entries` entries are produced.
DistributionTable enumerate_distribution(const ModelParams& params,
                                         std::size_t max_entries = kDefaultEntryCap);

// CSV with '#' metadata header: n_1..n_r, b, t_mean_s, probability.
void write_distribution_csv(const DistributionTable& table, const ModelParams& params,
                            std::ostream& out);
// Probability mass per distinct deterministic time: t_mean_s, p_b0, p_b1.
void write_histogram_csv(const DistributionTable& table, std::ostream& out);

}  // namespace flowloc
