#include "flowloc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "flowloc/error.hpp"
#include "flowloc/rng.hpp"

namespace flowloc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_sum_exp(std::span<const double> v) {
  double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

GmmParams seed_kmeanspp(std::span<const double> x, std::size_t k, double floor, Rng& rng) {
  std::vector<double> centers;
  centers.push_back(x[std::uniform_int_distribution<std::size_t>(0, x.size() - 1)(rng)]);
  std::vector<double> d2(x.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) break;
    double u = uniform01(rng) * total;
    std::size_t pick = 0;
    for (double acc = 0.0; pick < x.size(); ++pick) {
      acc += d2[pick];
      if (acc > u) break;
    }
    centers.push_back(x[std::min(pick, x.size() - 1)]);
  }

  // Hard assignment to the nearest center gives the starting moments.
  const std::size_t kk = centers.size();
  std::vector<double> n(kk, 0.0), s(kk, 0.0), ss(kk, 0.0);
  for (double v : x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kk; ++c)
      if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
    n[best] += 1;
    s[best] += v;
    ss[best] += v * v;
  }
  double mean_all = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var_all = 0.0;
  for (double v : x) var_all += (v - mean_all) * (v - mean_all);
  var_all = std::max(floor, var_all / x.size());

  GmmParams p;
  for (std::size_t c = 0; c < kk; ++c) {
    if (n[c] > 0) {
      double m = s[c] / n[c];
      p.weights.push_back(n[c] / x.size());
      p.means.push_back(m);
      p.variances.push_back(std::max(floor, ss[c] / n[c] - m * m));
    } else {
      p.weights.push_back(1.0 / x.size());
      p.means.push_back(centers[c]);
      p.variances.push_back(var_all);
    }
  }
  double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  for (auto& w : p.weights) w /= wsum;
  return p;
}

struct EmRun {
  GmmParams params;
  std::vector<double> trace;
};

EmRun run_em(std::span<const double> x, GmmParams p, const GmmOptions& opt) {
  const std::size_t n = x.size(), k = p.k();
  std::vector<double> resp(n * k), logs(k);
  EmRun out;

  auto e_step = [&](const GmmParams& q) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c)
        logs[c] = q.weights[c] > 0.0 ? std::log(q.weights[c]) + log_normal(x[i], q.means[c], q.variances[c])
                                     : kNegInf;
      double lse = log_sum_exp(logs);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(logs[c] - lse);
    }
    return ll;
  };

  double ll = e_step(p);
  out.trace.push_back(ll);
  for (int it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0, s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + c];
        s += resp[i * k + c] * x[i];
      }
      p.weights[c] = nk / n;
      if (nk <= 0.0) continue;  // empty component keeps its shape at zero weight
      double m = s / nk, ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += resp[i * k + c] * (x[i] - m) * (x[i] - m);
      p.means[c] = m;
      // The floored variance is the constrained maximiser, so EM stays monotone.
      p.variances[c] = std::max(opt.variance_floor, ss / nk);
    }
    double next = e_step(p);
    if (next < ll - 1e-8 * (1.0 + std::abs(ll)))
      throw std::logic_error(fmt::format("EM log-likelihood decreased from {} to {}", ll, next));
    out.trace.push_back(next);
    double gain = next - ll;
    ll = next;
    if (gain < opt.tolerance) break;
  }
  out.params = std::move(p);
  return out;
}

void sort_components(GmmParams& p) {
  std::vector<std::size_t> order(p.k());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p.means[a] < p.means[b]; });
  GmmParams s;
  for (auto i : order) {
    s.weights.push_back(p.weights[i]);
    s.means.push_back(p.means[i]);
    s.variances.push_back(p.variances[i]);
  }
  p = std::move(s);
}

}  // namespace

double GmmParams::log_likelihood(std::span<const double> samples) const {
  std::vector<double> logs(k());
  double ll = 0.0;
  for (double v : samples) {
    for (std::size_t c = 0; c < k(); ++c)
      logs[c] = weights[c] > 0.0 ? std::log(weights[c]) + log_normal(v, means[c], variances[c])
                                 : kNegInf;
    ll += log_sum_exp(logs);
  }
  return ll;
}

GmmFit fit_gmm_fixed_k(std::span<const double> samples, std::size_t k, const GmmOptions& options,
                       std::uint64_t seed) {
  if (samples.empty()) throw ParameterError("cannot fit a mixture to an empty sample set");
  if (k < 1 || k > samples.size()) throw ParameterError("component count out of range");
  Rng rng(derive_seed(seed, {k}));
  const int restarts = k == 1 ? 1 : std::max(1, options.restarts);

  GmmFit best;
  best.log_likelihood = kNegInf;
  for (int r = 0; r < restarts; ++r) {
    auto run = run_em(samples, seed_kmeanspp(samples, k, options.variance_floor, rng), options);
    double ll = run.trace.back();
    if (ll > best.log_likelihood || best.params.k() == 0) {
      best.params = std::move(run.params);
      best.log_likelihood = ll;
      best.iterations = static_cast<int>(run.trace.size()) - 1;
      best.ll_trace = std::move(run.trace);
    }
  }
  sort_components(best.params);
  const double n = static_cast<double>(samples.size());
  const double free_params = 3.0 * static_cast<double>(best.params.k()) - 1.0;
  best.bic = -2.0 * best.log_likelihood + free_params * std::log(n);
  return best;
}

GmmFit fit_gmm(std::span<const double> samples, const GmmOptions& options, std::uint64_t seed) {
  if (samples.empty()) throw ParameterError("cannot fit a mixture to an empty sample set");
  std::set<double> distinct(samples.begin(), samples.end());
  const std::size_t k_top = std::max<std::size_t>(1, std::min(options.k_max, distinct.size()));
  GmmFit best;
  for (std::size_t k = 1; k <= k_top; ++k) {
    auto fit = fit_gmm_fixed_k(samples, k, options, seed);
    if (k == 1 || fit.bic < best.bic) best = std::move(fit);
  }
  return best;
}

}  // namespace flowloc
