#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flowloc/error.hpp"
#include "flowloc/graph.hpp"

namespace flowloc {

namespace {

constexpr double kArterySpeed = 10.0;
constexpr double kAortaSpeed = 20.0;
constexpr double kTransitionSpeed = 1.0;

// Vascular groups share an artery trunk before the regional artery and a
// vein trunk after the regional vein. Group 0 feeds straight from the aorta.
struct Trunk {
  const char* artery;
  const char* vein;
  double artery_cm;
  double vein_cm;
  double vein_speed;
};

constexpr Trunk kTrunks[] = {
    {nullptr, nullptr, 0, 0, 0},
    {"Right subclavian artery", "Right axillary vein", 20, 20, 2.0},
    {"Left subclavian artery", "Left axillary vein", 20, 20, 2.0},
    {"Right iliac artery", "Right iliac vein", 30, 40, 4.0},
    {"Left iliac artery", "Left iliac vein", 30, 40, 4.0},
};

struct RegionRow {
  int id;
  const char* name;
  int trunk;
  double share;  // fraction of cardiac output
  double path_time_s;
  double artery_cm;
  double vein_cm;
  double vein_speed;
  Vec3 centroid;
};

// Right side of the body is x < 0; y points to the head.
constexpr RegionRow kRegions[] = {
    {1, "Head", 0, 0.120, 40, 30, 30, 3.0, {0, 45, 0}},
    {2, "Thorax", 0, 0.050, 45, 10, 15, 3.0, {0, 12, 0}},
    {3, "Right shoulder", 1, 0.012, 52, 10, 10, 2.5, {-18, 15, 0}},
    {4, "Left shoulder", 2, 0.012, 55, 10, 10, 2.5, {18, 15, 0}},
    {5, "Spleen", 0, 0.040, 57, 20, 20, 3.0, {10, -10, 0}},
    {6, "Right upper arm", 1, 0.015, 62, 20, 20, 2.5, {-25, 0, 0}},
    {7, "Left upper arm", 2, 0.015, 65, 20, 20, 2.5, {25, 0, 0}},
    {8, "Liver", 0, 0.110, 48, 15, 15, 3.0, {-10, -8, 0}},
    {9, "Right elbow", 1, 0.010, 70, 30, 30, 2.5, {-28, -15, 0}},
    {10, "Intestine", 0, 0.120, 67, 25, 25, 3.0, {0, -25, 0}},
    {11, "Right hand", 1, 0.010, 84, 50, 50, 2.5, {-30, -45, 0}},
    {12, "Kidneys", 0, 0.180, 36, 20, 20, 4.0, {0, -18, -4}},
    {13, "Left elbow", 2, 0.010, 73, 30, 30, 2.5, {28, -15, 0}},
    {14, "Left hand", 2, 0.010, 87, 50, 50, 2.5, {30, -45, 0}},
    {15, "Right hip", 3, 0.015, 76, 10, 10, 3.0, {-12, -40, 0}},
    {16, "Left hip", 4, 0.015, 79, 10, 10, 3.0, {12, -40, 0}},
    {17, "Right knee", 3, 0.012, 94, 50, 50, 3.0, {-12, -80, 0}},
    {18, "Left pelvis", 4, 0.020, 60, 5, 5, 3.0, {8, -35, 0}},
    {19, "Left knee", 4, 0.012, 97, 50, 50, 3.0, {12, -80, 0}},
    {20, "Right pelvis", 3, 0.020, 58, 5, 5, 3.0, {-8, -35, 0}},
    {21, "Right foot", 3, 0.008, 110, 90, 90, 3.0, {-12, -120, 0}},
    {22, "Left foot", 4, 0.008, 114, 90, 90, 3.0, {12, -120, 0}},
    {23, "Lungs", 0, 0.090, 31, 10, 10, 4.0, {0, 15, -3}},
    {24, "Right heart", 0, 0.086, 33, 5, 5, 4.0, {-3, 2, -2}},
};

constexpr NodeId kHeart = 0;
constexpr NodeId kAorta = 100;
constexpr double kHeartCm = 2.0;  // at transition speed
constexpr double kAortaCm = 40.0;
constexpr double kArteryDepth = 2.0;  // arteries anterior, veins posterior

Vec3 midway(const Vec3& p, double z) { return {p[0] / 2, p[1] / 2, z}; }

}  // namespace

BloodstreamGraph builtin_24_region() {
  std::vector<RegionNode> nodes;
  std::vector<VesselEdge> edges;

  nodes.push_back({kHeart, "Heart", RegionType::transition, kHeartCm, kTransitionSpeed,
                   {0, 0, 0}, true});
  nodes.push_back({kAorta, "Aorta", RegionType::artery, kAortaCm, kAortaSpeed,
                   {0, 5, kArteryDepth}, false});
  edges.push_back({kHeart, kAorta, 1.0});

  double total_share = 0.0;
  double trunk_share[std::size(kTrunks)] = {};
  Vec3 trunk_centroid[std::size(kTrunks)] = {};
  double trunk_members[std::size(kTrunks)] = {};
  for (const auto& r : kRegions) {
    total_share += r.share;
    trunk_share[r.trunk] += r.share;
    for (int k = 0; k < 3; ++k) trunk_centroid[r.trunk][k] += r.centroid[k];
    trunk_members[r.trunk] += 1;
  }

  auto trunk_artery_id = [](int t) { return 100 + 10 * t; };
  auto trunk_vein_id = [](int t) { return 200 + 10 * t; };
  for (int t = 1; t < static_cast<int>(std::size(kTrunks)); ++t) {
    const auto& tr = kTrunks[t];
    Vec3 c{trunk_centroid[t][0] / trunk_members[t], trunk_centroid[t][1] / trunk_members[t], 0};
    nodes.push_back({trunk_artery_id(t), tr.artery, RegionType::artery, tr.artery_cm,
                     kArterySpeed, midway(c, kArteryDepth), false});
    nodes.push_back({trunk_vein_id(t), tr.vein, RegionType::vein, tr.vein_cm, tr.vein_speed,
                     midway(c, -kArteryDepth), false});
    edges.push_back({kAorta, trunk_artery_id(t), trunk_share[t] / total_share});
    edges.push_back({trunk_vein_id(t), kHeart, 1.0});
  }

  const double fixed_s = kHeartCm / kTransitionSpeed + kAortaCm / kAortaSpeed;
  for (const auto& r : kRegions) {
    const auto& tr = kTrunks[r.trunk];
    NodeId artery = 300 + r.id;
    NodeId vein = 400 + r.id;
    double trunk_s = r.trunk ? tr.artery_cm / kArterySpeed + tr.vein_cm / tr.vein_speed : 0.0;
    double rest_s = fixed_s + trunk_s + r.artery_cm / kArterySpeed + r.vein_cm / r.vein_speed;
    double transition_cm = (r.path_time_s - rest_s) * kTransitionSpeed;
    if (transition_cm < 3.0)
      throw GraphError(fmt::format("builtin region {} leaves no room for its transition", r.id));

    nodes.push_back({artery, fmt::format("{} artery", r.name), RegionType::artery, r.artery_cm,
                     kArterySpeed, midway(r.centroid, kArteryDepth), false});
    nodes.push_back({r.id, r.name, RegionType::transition, transition_cm, kTransitionSpeed,
                     r.centroid, false});
    nodes.push_back({vein, fmt::format("{} vein", r.name), RegionType::vein, r.vein_cm,
                     r.vein_speed, midway(r.centroid, -kArteryDepth), false});

    if (r.trunk) {
      edges.push_back({trunk_artery_id(r.trunk), artery, r.share / trunk_share[r.trunk]});
      edges.push_back({vein, trunk_vein_id(r.trunk), 1.0});
    } else {
      edges.push_back({kAorta, artery, r.share / total_share});
      edges.push_back({vein, kHeart, 1.0});
    }
    edges.push_back({artery, r.id, 1.0});
    edges.push_back({r.id, vein, 1.0});
  }

  std::vector<AnchorSpec> anchors{
      {0, kHeart, 1.0, true},
      {1, trunk_vein_id(1), 1.0, false},
      {2, trunk_vein_id(2), 1.0, false},
  };
  return BloodstreamGraph(std::move(nodes), std::move(edges), std::move(anchors));
}

BloodstreamGraph parallel_path_graph(std::span<const double> times_s,
                                     std::span<const double> weights) {
  if (times_s.empty() || times_s.size() != weights.size())
    throw ParameterError("parallel_path_graph needs one weight per path");
  constexpr double heart_s = 1.0;
  std::vector<RegionNode> nodes;
  std::vector<VesselEdge> edges;
  nodes.push_back({0, "Heart", RegionType::transition, heart_s * kTransitionSpeed,
                   kTransitionSpeed, {0, 0, 0}, true});
  for (std::size_t i = 0; i < times_s.size(); ++i) {
    if (!(times_s[i] > heart_s + 2.0))
      throw ParameterError(fmt::format("path time {} too short", times_s[i]));
    NodeId id = static_cast<NodeId>(i + 1);
    double angle = 6.283185307179586 * static_cast<double>(i) / static_cast<double>(times_s.size());
    nodes.push_back({id, fmt::format("R{}", id), RegionType::transition,
                     (times_s[i] - heart_s) * kTransitionSpeed, kTransitionSpeed,
                     {20 * std::cos(angle), 20 * std::sin(angle), 0}, false});
    edges.push_back({0, id, weights[i]});
    edges.push_back({id, 0, 1.0});
  }
  return BloodstreamGraph(std::move(nodes), std::move(edges), {{0, 0, 1.0, true}});
}

}  // namespace flowloc
