#include "flowloc/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "flowloc/error.hpp"

namespace flowloc {

namespace {

constexpr double kTimeSlack = 1e-9;

double jittered(double lattice_s, double sigma, Rng& rng) {
  if (sigma <= 0.0) return quantize_time(lattice_s);
  std::normal_distribution<double> noise(0.0, sigma);
  double t = 0.0;
  do {
    t = lattice_s + noise(rng);
  } while (!(t > 0.0));
  return quantize_time(t);
}

}  // namespace

TableSampler::TableSampler(const DistributionTable& table) {
  cumulative_.reserve(table.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    acc += table.probability(k);
    cumulative_.push_back(acc);
  }
  support_mass_ = acc;
  tail_mass_ = table.residual_tail();
  if (!(support_mass_ > 0.0)) throw ParameterError("distribution table carries no mass");
}

std::size_t TableSampler::locate(double u) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  auto k = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(k, cumulative_.size() - 1);
}

std::optional<std::size_t> TableSampler::draw(Rng& rng) const {
  double u = uniform01(rng) * (support_mass_ + tail_mass_);
  if (u >= support_mass_) return std::nullopt;
  return locate(u);
}

std::size_t TableSampler::draw_in_support(Rng& rng) const {
  return locate(uniform01(rng) * support_mass_);
}

GenerativeSampler::GenerativeSampler(const ModelParams& params) : params_(params) {
  params_.validate();
  double acc = 0.0;
  for (const auto& p : params_.paths) {
    acc += p.probability;
    cumulative_.push_back(acc);
  }
}

GenerativeSampler::Outcome GenerativeSampler::draw(Rng& rng) const {
  double t = 0.0;
  int visits = 0;
  for (;;) {
    double u = uniform01(rng) * cumulative_.back();
    auto i = static_cast<std::size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
    i = std::min(i, cumulative_.size() - 1);
    t += params_.paths[i].travel_time_s;
    if (i == params_.event_path) ++visits;
    if (t > params_.horizon_s + kTimeSlack) return {t, 0, true};
    if (bernoulli(rng, params_.p_trans)) break;
  }
  double detect = visits == 0 ? 0.0 : -std::expm1(visits * std::log1p(-params_.p_det));
  return {t, bernoulli(rng, detect) ? 1 : 0, false};
}

std::vector<RawDatum> sample_raw_data(const ModelParams& params, const DistributionTable& table,
                                      std::size_t count, std::uint64_t seed) {
  TableSampler sampler(table);
  Rng rng(seed);
  std::vector<RawDatum> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto k = sampler.draw_in_support(rng);
    out.push_back({jittered(table.t_mean(k), params.noise_sigma_s, rng), table.bit(k)});
  }
  return out;
}

std::vector<RawDatum> sample_raw_data(const ModelParams& params, std::size_t count,
                                      std::uint64_t seed, std::size_t table_cap) {
  params.validate();
  if (count < 1) throw ParameterError("sample count must be at least 1");
  try {
    return sample_raw_data(params, enumerate_distribution(params, table_cap), count, seed);
  } catch (const HorizonTooLarge&) {
  }
  // Too many outcomes to tabulate: draw the same law directly, conditioned on
  // fitting the horizon.
  GenerativeSampler sampler(params);
  Rng rng(seed);
  std::vector<RawDatum> out;
  out.reserve(count);
  while (out.size() < count) {
    auto o = sampler.draw(rng);
    if (o.overflow) continue;
    out.push_back({jittered(o.lattice_time_s, params.noise_sigma_s, rng), o.bit});
  }
  return out;
}

std::vector<RawDatum> sample_device_streams(const ModelParams& params, std::size_t devices,
                                            std::uint64_t seed, std::size_t table_cap) {
  params.validate();
  std::optional<DistributionTable> table;
  try {
    table = enumerate_distribution(params, table_cap);
  } catch (const HorizonTooLarge&) {
  }
  std::optional<TableSampler> table_sampler;
  std::optional<GenerativeSampler> generative;
  if (table)
    table_sampler.emplace(*table);
  else
    generative.emplace(params);

  std::vector<RawDatum> out;
  for (std::size_t d = 0; d < devices; ++d) {
    Rng rng(derive_seed(seed, {d}));
    double elapsed = 0.0;
    for (;;) {
      double lattice = 0.0;
      int bit = 0;
      if (table_sampler) {
        auto k = table_sampler->draw(rng);
        if (!k) break;
        lattice = table->t_mean(*k);
        bit = table->bit(*k);
      } else {
        auto o = generative->draw(rng);
        if (o.overflow) break;
        lattice = o.lattice_time_s;
        bit = o.bit;
      }
      double t = jittered(lattice, params.noise_sigma_s, rng);
      if (elapsed + t > params.horizon_s + kTimeSlack) break;
      elapsed += t;
      out.push_back({t, bit});
    }
  }
  return out;
}

std::vector<MsePoint> mse_vs_count(const ModelParams& params,
                                   const std::vector<std::size_t>& device_counts,
                                   std::uint64_t seed, std::size_t replicates) {
  if (!std::is_sorted(device_counts.begin(), device_counts.end()))
    throw ParameterError("device counts must be ascending");
  if (replicates < 1) throw ParameterError("need at least one replicate");
  auto table = enumerate_distribution(params);
  TableSampler sampler(table);
  const double support = table.total_mass();

  std::vector<MsePoint> out;
  std::vector<std::size_t> hits(table.size());
  for (std::size_t ci = 0; ci < device_counts.size(); ++ci) {
    const std::size_t count = device_counts[ci];
    if (count < 1) throw ParameterError("device counts must be positive");
    double mse_sum = 0.0;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
      Rng rng(derive_seed(seed, {rep, count}));
      std::fill(hits.begin(), hits.end(), 0);
      for (std::size_t i = 0; i < count; ++i) ++hits[sampler.draw_in_support(rng)];
      double se = 0.0;
      for (std::size_t k = 0; k < table.size(); ++k) {
        double diff = static_cast<double>(hits[k]) / static_cast<double>(count) -
                      table.probability(k) / support;
        se += diff * diff;
      }
      mse_sum += se / static_cast<double>(table.size());
    }
    out.push_back({count, mse_sum / static_cast<double>(replicates)});
  }
  return out;
}

}  // namespace flowloc
