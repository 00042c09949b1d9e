#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "flowloc/error.hpp"
#include "flowloc/graph.hpp"

using namespace flowloc;

namespace {

RegionNode node(NodeId id, double length, double speed = 1.0, bool heart = false) {
  return {id, "n" + std::to_string(id), RegionType::transition, length, speed, {0, 0, 0}, heart};
}

BloodstreamGraph two_branch() {
  // heart 1 s, branch nodes of 59 s and 66 s.
  return BloodstreamGraph({node(0, 1, 1, true), node(1, 59), node(2, 66)},
                          {{0, 1, 0.49}, {0, 2, 0.51}, {1, 0, 1}, {2, 0, 1}},
                          {{0, 0, 1.0, true}});
}

std::string json_text(const std::string& nodes, const std::string& edges) {
  return "{\"nodes\":[" + nodes + "],\"edges\":[" + edges + "]}";
}

const std::string kHeart =
    R"({"id":0,"name":"H","region_type":2,"length_cm":1,"blood_speed_cm_s":1,"is_heart":true})";
std::string plain(int id) {
  return R"({"id":)" + std::to_string(id) +
         R"(,"name":"x","region_type":0,"length_cm":2,"blood_speed_cm_s":1})";
}
std::string edge(int a, int b, double w) {
  std::ostringstream s;
  s << R"({"from":)" << a << R"(,"to":)" << b << R"(,"branch_weight":)" << w << "}";
  return s.str();
}

std::string load_error(const std::string& text) {
  std::istringstream in(text);
  try {
    load_graph(in);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("single-path cycle gives one cardiovascular path") {
  BloodstreamGraph g({node(0, 1, 1, true), node(1, 4, 2)}, {{0, 1, 1.0}, {1, 0, 1.0}});
  auto paths = cardiovascular_paths(g);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].probability == doctest::Approx(1.0));
  CHECK(paths[0].travel_time_s == doctest::Approx(3.0));
  CHECK(paths[0].region_sequence == std::vector<NodeId>{0, 1});
}

TEST_CASE("two-branch fixture paths") {
  auto paths = cardiovascular_paths(two_branch());
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].travel_time_s == doctest::Approx(60.0));
  CHECK(paths[0].probability == doctest::Approx(0.49));
  CHECK(paths[1].travel_time_s == doctest::Approx(67.0));
  CHECK(paths[1].probability == doctest::Approx(0.51));
}

TEST_CASE("load_graph rejects invalid documents") {
  CHECK(load_error(json_text(kHeart + "," + plain(1) + "," + plain(1),
                             edge(0, 1, 1) + "," + edge(1, 0, 1)))
            .find("duplicate node id 1") != std::string::npos);
  CHECK(load_error(json_text(kHeart + "," + plain(1) + "," + plain(2),
                             edge(0, 1, 0.5) + "," + edge(0, 2, 0.4) + "," + edge(1, 0, 1) + "," +
                                 edge(2, 0, 1)))
            .find("branch weights not summing to 1") != std::string::npos);
  CHECK(load_error(json_text(plain(1) + "," + plain(2), edge(1, 2, 1) + "," + edge(2, 1, 1)))
            .find("no heart node") != std::string::npos);
  CHECK(load_error(json_text(kHeart + "," + plain(1) + "," + plain(2),
                             edge(0, 1, 1) + "," + edge(1, 0, 1)))
            .find("disconnected node 2") != std::string::npos);
  CHECK(load_error(R"({"nodes":[{"id":0}],"edges":[]})").find("malformed record") !=
        std::string::npos);
  CHECK(load_error("not json").find("malformed record") != std::string::npos);
  CHECK(load_error(json_text(kHeart + "," + plain(1), edge(0, 1, 1) + "," + edge(1, 1, 1) + "," +
                                                          edge(1, 0, 1)))
            .find("self-loop") != std::string::npos);
}

TEST_CASE("cycle avoiding the heart is rejected") {
  BloodstreamGraph g({node(0, 1, 1, true), node(1, 1), node(2, 1)},
                     {{0, 1, 1}, {1, 2, 1}, {2, 1, 0.5}, {2, 0, 0.5}});
  CHECK_THROWS_AS(cardiovascular_paths(g), GraphError);
}

TEST_CASE("builtin 24-region graph") {
  auto g = builtin_24_region();
  auto paths = cardiovascular_paths(g);
  REQUIRE(paths.size() == 24);

  double total = 0.0;
  std::set<long> times;
  std::set<NodeId> regions;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    total += p.probability;
    CHECK(p.travel_time_s >= 30.0);
    CHECK(p.travel_time_s <= 120.0);
    times.insert(std::lround(p.travel_time_s * 1000));
    CHECK(p.region_sequence.front() == g.heart());
    // The last node must lead back to the heart.
    bool closes = false;
    for (auto s : g.successors(p.region_sequence.back())) closes |= s.to == g.heart();
    CHECK(closes);
    auto r = exclusive_region(g, paths, i);
    REQUIRE(r.has_value());
    regions.insert(*r);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(times.size() == 24);
  std::set<NodeId> expected;
  for (int i = 1; i <= 24; ++i) expected.insert(i);
  CHECK(regions == expected);
  CHECK(g.node(1).name == "Head");
  CHECK(g.node(2).name == "Thorax");
  CHECK(g.node(24).name == "Right heart");

  for (const auto& n : g.nodes()) {
    if (n.is_heart) continue;
    if (n.region_type == RegionType::artery) {
      CHECK((n.blood_speed_cm_s == 10.0 || n.blood_speed_cm_s == 20.0));
    } else if (n.region_type == RegionType::vein) {
      CHECK(n.blood_speed_cm_s >= 2.0);
      CHECK(n.blood_speed_cm_s <= 4.0);
    } else {
      CHECK(n.blood_speed_cm_s == 1.0);
    }
  }
  REQUIRE(g.heart_anchor() != nullptr);
  CHECK(g.anchors().size() == 3);
}

TEST_CASE("graph JSON round trip") {
  auto g = builtin_24_region();
  std::stringstream s;
  save_graph(g, s);
  auto back = load_graph(s);
  CHECK(back == g);
  std::stringstream s2;
  save_graph(back, s2);
  std::stringstream s3;
  save_graph(g, s3);
  CHECK(s2.str() == s3.str());
}

TEST_CASE("splitting a node in two halves keeps travel times") {
  auto g = builtin_24_region();
  auto before = cardiovascular_paths(g);
  NodeId next_id = 10000;
  for (const auto& victim : g.nodes()) {
    if (victim.is_heart) continue;
    std::vector<RegionNode> nodes;
    std::vector<VesselEdge> edges;
    const NodeId twin = next_id++;
    for (auto n : g.nodes()) {
      if (n.id == victim.id) {
        n.length_cm /= 2;
        auto t = n;
        t.id = twin;
        nodes.push_back(n);
        nodes.push_back(t);
      } else {
        nodes.push_back(n);
      }
    }
    for (auto e : g.edges()) {
      if (e.from == victim.id) e.from = twin;
      edges.push_back(e);
    }
    edges.push_back({victim.id, twin, 1.0});
    BloodstreamGraph split(nodes, edges, g.anchors());
    auto after = cardiovascular_paths(split);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(after[i].travel_time_s == doctest::Approx(before[i].travel_time_s).epsilon(1e-12));
      CHECK(std::abs(after[i].travel_time_s - before[i].travel_time_s) < 1e-9);
    }
    if (next_id > 10040) break;  // a sample of nodes is enough
  }
}

TEST_CASE("random heart-cycle graphs match brute-force subset enumeration") {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 11)(rng);
    // Internal order 1..k is topological; ids are shuffled to hide it.
    std::vector<NodeId> ids(k + 1);
    for (int i = 0; i <= k; ++i) ids[i] = i * 7 + 3;
    std::shuffle(ids.begin() + 1, ids.end(), rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> w(k + 1, std::vector<double>(k + 2, 0.0));  // k+1 = heart
    // Heart -> some nodes; node i -> later nodes or the heart.
    w[0][1] = 1.0;
    for (int j = 2; j <= k; ++j)
      if (u(rng) < 0.4) w[0][j] = u(rng) + 0.1;
    for (int i = 1; i <= k; ++i) {
      if (i < k) w[i][i + 1] = u(rng) + 0.1;  // keep a spine for connectivity
      for (int j = i + 2; j <= k; ++j)
        if (u(rng) < 0.3) w[i][j] = u(rng) + 0.1;
      if (i == k || u(rng) < 0.4) w[i][k + 1] = u(rng) + 0.1;
    }
    std::vector<RegionNode> nodes{node(ids[0], 1.0, 1.0, true)};
    std::vector<double> len(k + 1, 1.0);
    for (int i = 1; i <= k; ++i) {
      len[i] = 1 + std::uniform_int_distribution<int>(0, 20)(rng);
      nodes.push_back(node(ids[i], len[i], 1.0));
    }
    std::vector<VesselEdge> edges;
    for (int i = 0; i <= k; ++i) {
      double total = 0.0;
      for (int j = 1; j <= k + 1; ++j) total += w[i][j];
      if (total == 0.0) continue;
      for (int j = 1; j <= k + 1; ++j) {
        if (w[i][j] == 0.0) continue;
        w[i][j] /= total;
        edges.push_back({ids[i], j == k + 1 ? ids[0] : ids[j], w[i][j]});
      }
    }
    // Node 0 has no edge to the heart index k+1 by construction.
    BloodstreamGraph g(nodes, edges);
    auto paths = cardiovascular_paths(g);

    std::map<std::vector<NodeId>, std::pair<double, double>> oracle;
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      std::vector<int> seq{0};
      for (int i = 1; i <= k; ++i)
        if (mask & (1u << (i - 1))) seq.push_back(i);
      seq.push_back(k + 1);
      double p = 1.0, t = len[0];
      bool ok = true;
      for (std::size_t s = 0; s + 1 < seq.size() && ok; ++s) {
        double we = w[seq[s]][seq[s + 1]];
        ok = we > 0.0;
        p *= we;
      }
      if (!ok) continue;
      std::vector<NodeId> named{ids[0]};
      for (std::size_t s = 1; s + 1 < seq.size(); ++s) {
        named.push_back(ids[seq[s]]);
        t += len[seq[s]];
      }
      oracle[named] = {t, p};
    }
    REQUIRE(paths.size() == oracle.size());
    double total = 0.0;
    for (const auto& p : paths) {
      auto it = oracle.find(p.region_sequence);
      REQUIRE(it != oracle.end());
      CHECK(p.travel_time_s == doctest::Approx(it->second.first));
      CHECK(p.probability == doctest::Approx(it->second.second));
      total += p.probability;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("always-traversed nodes") {
  BloodstreamGraph g({node(0, 1, 1, true), node(1, 1), node(2, 1), node(3, 1), node(4, 1)},
                     {{0, 1, 1}, {1, 2, 0.5}, {1, 3, 0.5}, {2, 4, 1}, {3, 4, 1}, {4, 0, 1}});
  auto paths = cardiovascular_paths(g);
  CHECK(always_traversed(g, paths) == std::vector<NodeId>{1, 4});
  CHECK(exclusive_region(g, paths, 0) == 2);
  CHECK(exclusive_region(g, paths, 1) == 3);
}

TEST_CASE("parallel path graph") {
  std::vector<double> t{60, 67, 80}, w{0.2, 0.3, 0.5};
  auto g = parallel_path_graph(t, w);
  auto paths = cardiovascular_paths(g);
  REQUIRE(paths.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(paths[i].travel_time_s == doctest::Approx(t[i]));
    CHECK(paths[i].probability == doctest::Approx(w[i]));
  }
  CHECK(g.heart_anchor()->attached_node == g.heart());
}
