#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flowloc {

// Univariate Gaussian mixture, components ordered by ascending mean.
struct GmmParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t k() const { return weights.size(); }
  double log_likelihood(std::span<const double> samples) const;
};

struct GmmOptions {
  std::size_t k_max = 4;
  double variance_floor = 1e-4;
  int max_iterations = 500;
  double tolerance = 1e-6;  // absolute log-likelihood gain
  int restarts = 5;
};

struct GmmFit {
  GmmParams params;
  double log_likelihood = 0.0;
  double bic = 0.0;
  int iterations = 0;
  std::vector<double> ll_trace;  // log-likelihood after each EM step of the kept run
};

// EM for a fixed component count with k-means++ seeding; the best of
// `options.restarts` runs is kept. Throws std::logic_error if the
// log-likelihood ever decreases.
GmmFit fit_gmm_fixed_k(std::span<const double> samples, std::size_t k, const GmmOptions& options,
                       std::uint64_t seed);

// Fits k = 1 .. min(k_max, distinct values) and keeps the lowest BIC.
GmmFit fit_gmm(std::span<const double> samples, const GmmOptions& options, std::uint64_t seed);

}  // namespace flowloc
