#include "flowloc/analytic_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "flowloc/error.hpp"

namespace flowloc {

namespace {

constexpr double kProbabilityTolerance = 1e-9;
constexpr double kTimeSlack = 1e-9;

// k * log(p) with the convention 0 * log(0) = 0.
double xlogy(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

int total_loops(std::span<const int> n) { return std::accumulate(n.begin(), n.end(), 0); }

void check_vector(std::span<const int> n, const ModelParams& params) {
  if (n.size() != params.paths.size())
    throw ParameterError(fmt::format("iteration vector has {} entries, model has {} paths",
                                     n.size(), params.paths.size()));
  for (int v : n)
    if (v < 0) throw ParameterError("iteration vector entries must be non-negative");
  if (total_loops(n) < 1) throw ParameterError("iteration vector must count at least one loop");
}

double log_prob_transmitted(std::span<const int> n, const ModelParams& params) {
  double log_p = log_multinomial_coefficient(n);
  for (std::size_t i = 0; i < n.size(); ++i) log_p += xlogy(n[i], params.paths[i].probability);
  const int loops = total_loops(n);
  log_p += xlogy(loops - 1, 1.0 - params.p_trans) + std::log(params.p_trans);
  return log_p;
}

}  // namespace

void ModelParams::validate() const {
  if (paths.empty()) throw ParameterError("model needs at least one path");
  double sum = 0.0;
  for (const auto& p : paths) {
    if (!(p.travel_time_s > 0.0)) throw ParameterError("path travel times must be positive");
    if (!(p.probability >= 0.0 && p.probability <= 1.0))
      throw ParameterError("path probabilities must lie in [0, 1]");
    sum += p.probability;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance)
    throw ParameterError(fmt::format("path probabilities sum to {}, not 1", sum));
  if (!(p_det > 0.0 && p_det <= 1.0)) throw ParameterError("P_det must lie in (0, 1]");
  if (!(p_trans > 0.0 && p_trans <= 1.0)) throw ParameterError("P_trans must lie in (0, 1]");
  if (!(noise_sigma_s >= 0.0)) throw ParameterError("noise sigma must be non-negative");
  if (!(horizon_s > max_travel_time()))
    throw ParameterError("horizon must exceed the longest path travel time");
  if (!(truncation_eps >= 0.0 && truncation_eps <= 1e-3))
    throw ParameterError("truncation threshold must lie in [0, 1e-3]");
  if (event_path >= paths.size()) throw ParameterError("event path index out of range");
}

double ModelParams::max_travel_time() const {
  double m = 0.0;
  for (const auto& p : paths) m = std::max(m, p.travel_time_s);
  return m;
}

ModelParams params_from_graph(const BloodstreamGraph& graph, NodeId event_node) {
  if (!graph.contains(event_node))
    throw GraphError(fmt::format("event node {} not in graph", event_node));
  auto paths = cardiovascular_paths(graph);
  ModelParams params;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    params.paths.push_back({paths[i].travel_time_s, paths[i].probability});
    const auto& seq = paths[i].region_sequence;
    if (std::find(seq.begin(), seq.end(), event_node) != seq.end()) {
      params.event_path = i;
      ++hits;
    }
  }
  if (hits != 1)
    throw GraphError(fmt::format("event node {} lies on {} paths; the model needs exactly one",
                                 event_node, hits));
  params.horizon_s = std::max(params.horizon_s, 2.0 * params.max_travel_time());
  return params;
}

double quantize_time(double t_s) { return std::round(t_s * 1e6) / 1e6; }

double log_multinomial_coefficient(std::span<const int> n) {
  double total = 0.0, log_c = 0.0;
  for (int v : n) {
    total += v;
    log_c -= std::lgamma(static_cast<double>(v) + 1.0);
  }
  return log_c + std::lgamma(total + 1.0);
}

double multinomial_coefficient(std::span<const int> n) {
  return std::round(std::exp(log_multinomial_coefficient(n)));
}

double prob_transmitted(std::span<const int> n, const ModelParams& params) {
  check_vector(n, params);
  return std::exp(log_prob_transmitted(n, params));
}

double prob_detected(std::span<const int> n, const ModelParams& params) {
  check_vector(n, params);
  const int visits = n[params.event_path];
  if (visits == 0) return 0.0;
  // Sum over the first detecting visit collapses to 1 - (1 - P_det)^{n_j}.
  double detect = -std::expm1(visits * std::log1p(-params.p_det));
  return std::exp(log_prob_transmitted(n, params)) * detect;
}

double prob_not_detected(std::span<const int> n, const ModelParams& params) {
  check_vector(n, params);
  const int visits = n[params.event_path];
  double log_miss = visits == 0 ? 0.0 : visits * std::log1p(-params.p_det);
  return std::exp(log_prob_transmitted(n, params) + log_miss);
}

// ---------------------------------------------------------------------------

double DistributionTable::total_mass() const {
  double s = 0.0;
  for (double p : probability_) s += p;
  return s;
}

std::size_t DistributionTable::find(std::span<const int> n, int b) const {
  if (n.size() != paths_) return size();
  for (std::size_t k = 0; k < size(); ++k) {
    if (bits_[k] != b) continue;
    auto c = counts(k);
    if (std::equal(c.begin(), c.end(), n.begin(), [](std::uint16_t x, int y) { return x == y; }))
      return k;
  }
  return size();
}

void DistributionTable::push(std::span<const int> n, int b, double t_mean, double probability) {
  for (int v : n) counts_.push_back(static_cast<std::uint16_t>(v));
  bits_.push_back(static_cast<std::uint8_t>(b));
  t_mean_.push_back(t_mean);
  probability_.push_back(probability);
}

void DistributionTable::sort() {
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (t_mean_[a] != t_mean_[b]) return t_mean_[a] < t_mean_[b];
    auto ca = counts(a), cb = counts(b);
    if (!std::equal(ca.begin(), ca.end(), cb.begin()))
      return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
    return bits_[a] < bits_[b];
  });
  DistributionTable sorted(paths_);
  sorted.residual_tail_ = residual_tail_;
  std::vector<int> n(paths_);
  for (auto k : order) {
    auto c = counts(k);
    std::copy(c.begin(), c.end(), n.begin());
    sorted.push(n, bits_[k], t_mean_[k], probability_[k]);
  }
  *this = std::move(sorted);
}

DistributionTable enumerate_distribution(const ModelParams& params, std::size_t max_entries) {
  params.validate();
  const std::size_t r = params.paths.size();
  DistributionTable table(r);
  std::vector<int> n(r, 0);
  double mass = 0.0;

  auto emit = [&](double t) {
    double p1 = prob_detected(n, params);
    double p0 = prob_not_detected(n, params);
    for (auto [b, p] : {std::pair{1, p1}, std::pair{0, p0}}) {
      if (!(p > 0.0) || p < params.truncation_eps) continue;
      if (table.size() >= max_entries)
        throw HorizonTooLarge(
            fmt::format("horizon too large: more than {} distribution entries", max_entries));
      table.push(n, b, t, p);
      mass += p;
    }
  };

  // With certain transmission every report is a single loop.
  const int max_loops = params.p_trans >= 1.0 ? 1 : std::numeric_limits<int>::max();
  // Zero-probability lattice points are not stored but still cost a visit.
  const std::size_t visit_budget = max_entries > std::numeric_limits<std::size_t>::max() / 8
                                       ? std::numeric_limits<std::size_t>::max()
                                       : 8 * max_entries;
  std::size_t visits = 0;

  // Depth i fixes n_i; the remaining budget bounds every later count.
  auto recurse = [&](auto&& self, std::size_t i, double t, int loops) -> void {
    if (i == r) {
      if (++visits > visit_budget)
        throw HorizonTooLarge(
            fmt::format("horizon too large: more than {} lattice points visited", visit_budget));
      if (loops > 0) emit(t);
      return;
    }
    const double step = params.paths[i].travel_time_s;
    for (int k = 0;; ++k) {
      double tk = t + k * step;
      if (tk > params.horizon_s + kTimeSlack || loops + k > max_loops) break;
      if (k > std::numeric_limits<std::uint16_t>::max())
        throw HorizonTooLarge("horizon too large: loop count overflow");
      n[i] = k;
      self(self, i + 1, tk, loops + k);
    }
    n[i] = 0;
  };
  recurse(recurse, 0, 0.0, 0);

  table.set_residual_tail(std::max(0.0, 1.0 - mass));
  table.sort();
  return table;
}

void write_distribution_csv(const DistributionTable& table, const ModelParams& params,
                            std::ostream& out) {
  std::string paths;
  for (std::size_t i = 0; i < params.paths.size(); ++i)
    paths += fmt::format("{}{}:{}", i ? "," : "", params.paths[i].travel_time_s,
                         params.paths[i].probability);
  out << "# flowloc distribution table\n";
  out << fmt::format("# paths={}\n", paths);
  out << fmt::format("# p_det={}\n# p_trans={}\n# event_path={}\n", params.p_det, params.p_trans,
                     params.event_path + 1);
  out << fmt::format("# noise_sigma_s={}\n# horizon_s={}\n# truncation_eps={}\n",
                     params.noise_sigma_s, params.horizon_s, params.truncation_eps);
  out << fmt::format("# residual_tail={}\n", table.residual_tail());
  for (std::size_t i = 0; i < table.path_count(); ++i) out << "n_" << i + 1 << ',';
  out << "b,t_mean_s,probability\n";
  for (std::size_t k = 0; k < table.size(); ++k) {
    for (auto c : table.counts(k)) out << c << ',';
    out << fmt::format("{},{},{}\n", table.bit(k), table.t_mean(k), table.probability(k));
  }
}

void write_histogram_csv(const DistributionTable& table, std::ostream& out) {
  std::map<double, std::pair<double, double>> bins;
  for (std::size_t k = 0; k < table.size(); ++k) {
    auto& bin = bins[quantize_time(table.t_mean(k))];
    (table.bit(k) ? bin.second : bin.first) += table.probability(k);
  }
  out << "t_mean_s,p_b0,p_b1\n";
  for (const auto& [t, p] : bins) out << fmt::format("{},{},{}\n", t, p.first, p.second);
}

}  // namespace flowloc
