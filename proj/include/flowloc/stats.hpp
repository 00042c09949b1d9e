#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowloc/analytic_model.hpp"

namespace flowloc {

struct MannWhitneyResult {
  double u = 0.0;        // statistic of the first sample
  double u_other = 0.0;  // |a| * |b| - u
  double p_value = 1.0;  // two-sided
  bool accept = true;    // p >= alpha
  bool exact = false;
};

// Exact permutation null (mid-ranks) when |a| + |b| <= 20, otherwise the
// normal approximation with tie-corrected variance and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 double alpha = 0.05);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ecdf_max_distance(std::span<const double> a, std::span<const double> b);

// Bernoulli KL(p || q) after clamping both into [smoothing, 1 - smoothing].
double kl_bernoulli(double p_model, double p_sim, double smoothing);

struct RegionSamples {
  int region_id = 0;
  std::string name;
  std::vector<RawDatum> data;
};

struct ValidationConfig {
  double alpha = 0.05;
  std::optional<double> smoothing;        // default 1 / (N + 2)
  std::vector<int> kl_excluded_regions;   // e.g. always-traversed regions
};

struct RegionValidation {
  int region_id = 0;
  std::string name;
  std::size_t model_positive = 0, model_negative = 0;
  std::size_t sim_positive = 0, sim_negative = 0;
  std::optional<MannWhitneyResult> mann_whitney;  // b = 1 times, when both sides have some
  std::optional<double> ecdf_distance;            // b = 0 times, when both sides have some
  double ratio_model = 0.0, ratio_sim = 0.0;      // fraction of b = 1 reports
  std::optional<double> kl;                       // absent for excluded regions
};

struct ValidationReport {
  std::vector<RegionValidation> regions;
  std::size_t mw_tested = 0;
  std::size_t mw_accepted = 0;
  double acceptance_fraction = 0.0;
  double mean_ecdf_distance = 0.0;
  double max_kl = 0.0;
  double mean_kl = 0.0;
};

// Per-region comparison of model and simulator raw data. Throws
// ParameterError if the two region lists differ.
ValidationReport validate(std::span<const RegionSamples> model_data,
                          std::span<const RegionSamples> sim_data, const ValidationConfig& config);

void write_report_csv(const ValidationReport& report, std::ostream& out);
nlohmann::json report_summary_json(const ValidationReport& report);

}  // namespace flowloc
