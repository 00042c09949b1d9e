#include "flowloc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "flowloc/error.hpp"

namespace flowloc {

namespace {

constexpr std::size_t kExactLimit = 20;

struct Ranked {
  std::vector<double> ranks_a;  // mid-ranks of the first sample
  std::vector<double> all;      // mid-ranks of the pooled sample
  double tie_term = 0.0;        // sum over tie groups of t^3 - t
};

Ranked mid_ranks(std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(a.size() + b.size());
  for (double x : a) pooled.emplace_back(x, true);
  for (double x : b) pooled.emplace_back(x, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  Ranked out;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    double t = static_cast<double>(j - i);
    out.tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      out.all.push_back(rank);
      if (pooled[k].second) out.ranks_a.push_back(rank);
    }
    i = j;
  }
  return out;
}

// Exact two-sided p-value of the rank sum over all C(N, n_a) relabelings.
// Doubled mid-ranks are integers, so the null distribution is a subset-sum
// count over integer weights.
double exact_p_value(const Ranked& ranked, std::size_t n_a) {
  std::vector<int> w;
  for (double r : ranked.all) w.push_back(static_cast<int>(std::lround(2.0 * r)));
  const int max_sum = std::accumulate(w.begin(), w.end(), 0);
  // ways[c][s]: number of c-subsets with doubled rank sum s
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (int wi : w) {
    for (std::size_t c = n_a; c >= 1; --c)
      for (int s = max_sum; s >= wi; --s) ways[c][s] += ways[c - 1][s - wi];
  }
  const double n = static_cast<double>(ranked.all.size());
  const double mean2 = static_cast<double>(n_a) * (n + 1.0);  // doubled expectation
  double observed2 = 0.0;
  for (double r : ranked.ranks_a) observed2 += 2.0 * r;
  const double dev = std::abs(observed2 - mean2);
  double total = 0.0, extreme = 0.0;
  for (int s = 0; s <= max_sum; ++s) {
    total += ways[n_a][s];
    if (std::abs(s - mean2) >= dev - 1e-9) extreme += ways[n_a][s];
  }
  return std::min(1.0, extreme / total);
}

std::vector<double> times_with_bit(std::span<const RawDatum> data, int bit) {
  std::vector<double> out;
  for (const auto& d : data)
    if (d.b == bit) out.push_back(d.t_s);
  return out;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 double alpha) {
  if (a.empty() || b.empty()) throw ParameterError("Mann-Whitney test needs non-empty samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  auto ranked = mid_ranks(a, b);
  double rank_sum = std::accumulate(ranked.ranks_a.begin(), ranked.ranks_a.end(), 0.0);

  MannWhitneyResult res;
  res.u = rank_sum - na * (na + 1.0) / 2.0;
  res.u_other = na * nb - res.u;

  if (a.size() + b.size() <= kExactLimit) {
    res.exact = true;
    res.p_value = exact_p_value(ranked, a.size());
  } else {
    const double n = na + nb;
    const double var = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
      res.p_value = 1.0;
    } else {
      double num = std::max(0.0, std::abs(res.u - na * nb / 2.0) - 0.5);
      res.p_value = std::min(1.0, std::erfc(num / std::sqrt(var) / std::sqrt(2.0)));
    }
  }
  res.accept = res.p_value >= alpha;
  return res;
}

double ecdf_max_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ECDF distance needs non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < x.size() || j < y.size()) {
    double v = (j >= y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return best;
}

double kl_bernoulli(double p_model, double p_sim, double smoothing) {
  if (!(smoothing > 0.0 && smoothing < 0.5))
    throw ParameterError("KL smoothing must lie in (0, 0.5)");
  auto clamp = [&](double v) { return std::clamp(v, smoothing, 1.0 - smoothing); };
  const double p = clamp(p_model), q = clamp(p_sim);
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

ValidationReport validate(std::span<const RegionSamples> model_data,
                          std::span<const RegionSamples> sim_data, const ValidationConfig& config) {
  if (model_data.size() != sim_data.size())
    throw ParameterError("region mismatch: model and simulator cover different region counts");
  ValidationReport report;
  double ecdf_sum = 0.0, kl_sum = 0.0;
  std::size_t ecdf_n = 0, kl_n = 0;
  for (std::size_t r = 0; r < model_data.size(); ++r) {
    const auto& m = model_data[r];
    const auto& s = sim_data[r];
    if (m.region_id != s.region_id)
      throw ParameterError(fmt::format("region mismatch: {} vs {}", m.region_id, s.region_id));

    RegionValidation row;
    row.region_id = m.region_id;
    row.name = m.name.empty() ? s.name : m.name;
    auto mp = times_with_bit(m.data, 1), mn = times_with_bit(m.data, 0);
    auto sp = times_with_bit(s.data, 1), sn = times_with_bit(s.data, 0);
    row.model_positive = mp.size();
    row.model_negative = mn.size();
    row.sim_positive = sp.size();
    row.sim_negative = sn.size();

    if (!mp.empty() && !sp.empty()) {
      row.mann_whitney = mann_whitney_u(mp, sp, config.alpha);
      ++report.mw_tested;
      if (row.mann_whitney->accept) ++report.mw_accepted;
    }
    if (!mn.empty() && !sn.empty()) {
      row.ecdf_distance = ecdf_max_distance(mn, sn);
      ecdf_sum += *row.ecdf_distance;
      ++ecdf_n;
    }
    if (!m.data.empty()) row.ratio_model = static_cast<double>(mp.size()) / m.data.size();
    if (!s.data.empty()) row.ratio_sim = static_cast<double>(sp.size()) / s.data.size();

    const bool excluded = std::find(config.kl_excluded_regions.begin(),
                                    config.kl_excluded_regions.end(),
                                    row.region_id) != config.kl_excluded_regions.end();
    if (!excluded && !m.data.empty() && !s.data.empty()) {
      double n = static_cast<double>(std::min(m.data.size(), s.data.size()));
      double smoothing = config.smoothing.value_or(1.0 / (n + 2.0));
      row.kl = kl_bernoulli(row.ratio_model, row.ratio_sim, smoothing);
      kl_sum += *row.kl;
      report.max_kl = std::max(report.max_kl, *row.kl);
      ++kl_n;
    }
    report.regions.push_back(std::move(row));
  }
  report.acceptance_fraction =
      report.mw_tested ? static_cast<double>(report.mw_accepted) / report.mw_tested : 0.0;
  report.mean_ecdf_distance = ecdf_n ? ecdf_sum / ecdf_n : 0.0;
  report.mean_kl = kl_n ? kl_sum / kl_n : 0.0;
  return report;
}

void write_report_csv(const ValidationReport& report, std::ostream& out) {
  out << "region_id,name,model_pos,model_neg,sim_pos,sim_neg,mw_u,mw_p,mw_accept,ecdf_distance,"
         "ratio_model,ratio_sim,kl\n";
  for (const auto& r : report.regions) {
    std::string mw = r.mann_whitney ? fmt::format("{},{},{}", r.mann_whitney->u,
                                                  r.mann_whitney->p_value,
                                                  r.mann_whitney->accept ? 1 : 0)
                                    : ",,";
    std::string ecdf = r.ecdf_distance ? fmt::format("{}", *r.ecdf_distance) : "";
    std::string kl = r.kl ? fmt::format("{}", *r.kl) : "";
    out << fmt::format("{},\"{}\",{},{},{},{},{},{},{},{},{}\n", r.region_id, r.name,
                       r.model_positive, r.model_negative, r.sim_positive, r.sim_negative, mw,
                       ecdf, r.ratio_model, r.ratio_sim, kl);
  }
}

nlohmann::json report_summary_json(const ValidationReport& report) {
  return {{"regions", report.regions.size()},
          {"mw_tested", report.mw_tested},
          {"mw_accepted", report.mw_accepted},
          {"acceptance_fraction", report.acceptance_fraction},
          {"mean_ecdf_distance", report.mean_ecdf_distance},
          {"max_kl", report.max_kl},
          {"mean_kl", report.mean_kl}};
}

}  // namespace flowloc
