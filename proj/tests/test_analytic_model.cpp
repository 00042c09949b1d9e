#include <doctest.h>

#include <chrono>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "flowloc/analytic_model.hpp"
#include "flowloc/error.hpp"
#include "flowloc/graph.hpp"

using namespace flowloc;

namespace {

ModelParams fixture() {
  ModelParams p;
  p.paths = {{60.0, 0.49}, {67.0, 0.51}};
  p.p_det = 0.7;
  p.p_trans = 0.7;
  p.event_path = 0;
  return p;
}

double mass_at(const DistributionTable& t, double time) {
  double m = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (std::abs(t.t_mean(k) - time) < 1e-6) m += t.probability(k);
  return m;
}

ModelParams random_params(std::mt19937_64& rng, std::size_t r, double pt_lo) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelParams p;
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double w = 0.1 + u(rng);
    p.paths.push_back({std::round(40 + 80 * u(rng)), w});
    total += w;
  }
  for (auto& x : p.paths) x.probability /= total;
  p.p_det = 0.05 + 0.95 * u(rng);
  p.p_trans = pt_lo + (1.0 - pt_lo) * u(rng);
  p.event_path = std::uniform_int_distribution<std::size_t>(0, r - 1)(rng);
  return p;
}

}  // namespace

TEST_CASE("multinomial coefficients") {
  CHECK(multinomial_coefficient(std::vector<int>{1, 1}) == 2.0);
  CHECK(multinomial_coefficient(std::vector<int>{2, 0}) == 1.0);
  CHECK(multinomial_coefficient(std::vector<int>{3, 2, 1}) == 60.0);
  // 60! / (30! 30!) stays finite in the log domain.
  double lc = log_multinomial_coefficient(std::vector<int>{30, 30});
  CHECK(lc == doctest::Approx(std::lgamma(61.0) - 2 * std::lgamma(31.0)));
}

TEST_CASE("outcome probabilities on the two-path fixture") {
  auto p = fixture();
  CHECK(prob_detected(std::vector<int>{1, 0}, p) == doctest::Approx(0.2401).epsilon(1e-12));
  CHECK(prob_detected(std::vector<int>{0, 1}, p) == 0.0);
  CHECK(std::abs(prob_detected(std::vector<int>{2, 0}, p) - 0.04588) < 1e-5);
  CHECK(prob_not_detected(std::vector<int>{0, 1}, p) == doctest::Approx(0.357).epsilon(1e-12));
  CHECK(prob_not_detected(std::vector<int>{1, 0}, p) == doctest::Approx(0.1029).epsilon(1e-12));
  p.p_det = 1.0;
  CHECK(prob_not_detected(std::vector<int>{3, 2}, p) == 0.0);
  CHECK(prob_not_detected(std::vector<int>{1, 0}, p) == 0.0);
}

TEST_CASE("detection completeness over random vectors") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = random_params(rng, 1 + trial % 4, 0.05);
    std::vector<int> n(p.paths.size());
    int total = 0;
    for (auto& v : n) total += v = std::uniform_int_distribution<int>(0, 6)(rng);
    if (total == 0) n[0] = 1;
    double pt = prob_transmitted(n, p);
    double sum = prob_detected(n, p) + prob_not_detected(n, p);
    CHECK(sum == doctest::Approx(pt).epsilon(1e-12));
  }
}

TEST_CASE("parameter validation") {
  auto p = fixture();
  p.paths[0].probability = 0.4;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = fixture();
  p.p_det = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = fixture();
  p.horizon_s = 60.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = fixture();
  p.truncation_eps = 0.01;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = fixture();
  p.noise_sigma_s = -1;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = fixture();
  p.event_path = 2;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("fixture distribution structure") {
  auto t0 = std::chrono::steady_clock::now();
  auto t = enumerate_distribution(fixture());
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  CHECK(t.total_mass() + t.residual_tail() == doctest::Approx(1.0).epsilon(1e-9));
  double m60 = mass_at(t, 60), m67 = mass_at(t, 67);
  for (double c : {120.0, 127.0, 134.0}) {
    CHECK(mass_at(t, c) > 0.0);
    CHECK(mass_at(t, c) < std::min(m60, m67));
  }
  // Two largest single entries are the single-loop outcomes.
  std::vector<std::size_t> idx(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(),
            [&](auto a, auto b) { return t.probability(a) > t.probability(b); });
  std::set<double> top{t.t_mean(idx[0]), t.t_mean(idx[1])};
  CHECK(top == std::set<double>{60.0, 67.0});
  // Feasible support: no b = 1 entry without a loop through the event path.
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t.bit(k) == 1) CHECK(t.counts(k)[0] > 0);
  // Deterministic times are on the lattice and within the horizon.
  for (std::size_t k = 0; k < t.size(); ++k) {
    auto c = t.counts(k);
    CHECK(t.t_mean(k) == doctest::Approx(60.0 * c[0] + 67.0 * c[1]));
    CHECK(t.t_mean(k) <= 1100.0 + 1e-9);
  }
}

TEST_CASE("single-path table has one mode per loop count") {
  ModelParams p;
  p.paths = {{60.0, 1.0}};
  p.p_det = 1.0;
  p.p_trans = 1.0;
  auto t = enumerate_distribution(p);
  REQUIRE(t.size() == 1);
  CHECK(t.t_mean(0) == 60.0);
  CHECK(t.bit(0) == 1);
  CHECK(t.probability(0) == doctest::Approx(1.0));
  CHECK(t.residual_tail() == doctest::Approx(0.0));
}

TEST_CASE("normalisation and residual tail bound") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t r = 2 + trial % 2;
    auto p = random_params(rng, r, 0.6);
    p.horizon_s = 50.0 * p.max_travel_time();
    auto t = enumerate_distribution(p);
    CHECK(t.total_mass() + t.residual_tail() == doctest::Approx(1.0).epsilon(1e-6));
    double bound = std::pow(1.0 - p.p_trans, std::floor(p.horizon_s / p.max_travel_time()) - 1);
    CHECK(t.residual_tail() <= bound + 1e-12);
  }
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_params(rng, 1 + trial % 4, 0.2);
    p.horizon_s = 6.0 * p.max_travel_time();
    auto t = enumerate_distribution(p);
    double sum = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      CHECK(t.probability(k) >= 0.0);
      CHECK(t.probability(k) <= 1.0);
      sum += t.probability(k);
    }
    CHECK(sum + t.residual_tail() == doctest::Approx(1.0).epsilon(1e-9));
    double bound = std::pow(1.0 - p.p_trans, std::floor(p.horizon_s / p.max_travel_time()) - 1);
    CHECK(t.residual_tail() <= bound + 1e-12);
  }
}

TEST_CASE("truncation drops small entries and grows the tail") {
  auto p = fixture();
  auto full = enumerate_distribution(p);
  p.truncation_eps = 1e-4;
  auto cut = enumerate_distribution(p);
  CHECK(cut.size() < full.size());
  for (std::size_t k = 0; k < cut.size(); ++k) CHECK(cut.probability(k) >= 1e-4);
  CHECK(cut.residual_tail() > full.residual_tail());
  CHECK(cut.total_mass() + cut.residual_tail() == doctest::Approx(1.0));
}

TEST_CASE("relabeling paths permutes entries") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_params(rng, 3, 0.3);
    p.horizon_s = 400;
    auto q = p;
    std::reverse(q.paths.begin(), q.paths.end());
    q.event_path = 2 - p.event_path;
    auto a = enumerate_distribution(p), b = enumerate_distribution(q);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      auto c = a.counts(k);
      std::vector<int> rev{c[2], c[1], c[0]};
      auto j = b.find(rev, a.bit(k));
      REQUIRE(j < b.size());
      CHECK(b.probability(j) == doctest::Approx(a.probability(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("entry cap raises horizon too large") {
  auto p = fixture();
  p.p_trans = 0.1;
  p.horizon_s = 5000;
  CHECK_THROWS_WITH_AS(enumerate_distribution(p, 1000), doctest::Contains("horizon too large"),
                       HorizonTooLarge);
  ModelParams big;
  for (int i = 0; i < 24; ++i) big.paths.push_back({30.0 + 3 * i, 1.0 / 24});
  big.p_trans = 1.0;
  auto t = enumerate_distribution(big, 1000);
  CHECK(t.size() == 24);  // P_det = 1: one entry per path
  big.p_trans = 0.5;
  CHECK_THROWS_AS(enumerate_distribution(big, 1000), HorizonTooLarge);
}

TEST_CASE("params from graph") {
  auto g = builtin_24_region();
  auto p = params_from_graph(g, 5);
  CHECK(p.paths.size() == 24);
  auto paths = cardiovascular_paths(g);
  const auto& seq = paths[p.event_path].region_sequence;
  CHECK(std::find(seq.begin(), seq.end(), 5) != seq.end());
  CHECK_THROWS_AS(params_from_graph(g, 100), GraphError);  // aorta is on every path
  CHECK_THROWS_AS(params_from_graph(g, 9999), GraphError);
}

TEST_CASE("distribution CSV") {
  auto p = fixture();
  auto t = enumerate_distribution(p);
  std::ostringstream a, b;
  write_distribution_csv(t, p, a);
  write_distribution_csv(enumerate_distribution(p), p, b);
  CHECK(a.str() == b.str());
  const auto text = a.str();
  CHECK(text.rfind("# ", 0) == 0);
  CHECK(text.find("n_1,n_2,b,t_mean_s,probability\n") != std::string::npos);
  CHECK(text.find("\n1,0,1,60,") != std::string::npos);
  CHECK(text.find("\n0,1,0,67,") != std::string::npos);
  CHECK(text.find("# residual_tail=") != std::string::npos);
  std::ostringstream h;
  write_histogram_csv(t, h);
  CHECK(h.str().rfind("t_mean_s,p_b0,p_b1\n", 0) == 0);
  CHECK(h.str().find("\n120,") != std::string::npos);
  CHECK(h.str().find("\n127,") != std::string::npos);
  CHECK(h.str().find("\n134,") != std::string::npos);
}
