#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace flowloc {

using NodeId = int;

enum class RegionType : int { artery = 0, vein = 1, transition = 2 };

using Vec3 = std::array<double, 3>;

struct RegionNode {
  NodeId id = 0;
  std::string name;
  RegionType region_type = RegionType::transition;
  double length_cm = 1.0;
  double blood_speed_cm_s = 1.0;
  Vec3 centroid_cm{0.0, 0.0, 0.0};
  bool is_heart = false;

  double transit_time_s() const { return length_cm / blood_speed_cm_s; }
};

struct VesselEdge {
  NodeId from = 0;
  NodeId to = 0;
  double branch_weight = 1.0;
};

// On-body receiver. Devices enter its range at the start of `attached_node`
// and stay in range for the first `range_cm` of that node.
struct AnchorSpec {
  int id = 0;
  NodeId attached_node = 0;
  double range_cm = 1.0;
  bool is_heart_anchor = false;
};

// A heart-to-heart cycle. `region_sequence` starts at the heart node and lists
// every node traversed before re-entering the heart.
struct CardioPath {
  std::vector<NodeId> region_sequence;
  double travel_time_s = 0.0;
  double probability = 0.0;
};

struct Successor {
  NodeId to;
  double weight;
};

// Directed vessel graph with a single heart node. Instances are validated on
// construction and immutable afterwards.
class BloodstreamGraph {
 public:
  // Throws FormatError / GraphError when an invariant does not hold.
  BloodstreamGraph(std::vector<RegionNode> nodes, std::vector<VesselEdge> edges,
                   std::vector<AnchorSpec> anchors = {});

  const std::vector<RegionNode>& nodes() const { return nodes_; }
  const std::vector<VesselEdge>& edges() const { return edges_; }
  const std::vector<AnchorSpec>& anchors() const { return anchors_; }

  bool contains(NodeId id) const { return index_.count(id) != 0; }
  const RegionNode& node(NodeId id) const;
  std::size_t index_of(NodeId id) const;
  NodeId heart() const { return nodes_[heart_index_].id; }
  std::span<const Successor> successors(NodeId id) const;

  const AnchorSpec* find_anchor(int anchor_id) const;
  const AnchorSpec* heart_anchor() const;

  bool operator==(const BloodstreamGraph& other) const;

 private:
  std::vector<RegionNode> nodes_;
  std::vector<VesselEdge> edges_;
  std::vector<AnchorSpec> anchors_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<Successor>> out_;
  std::size_t heart_index_ = 0;
};

BloodstreamGraph load_graph(std::istream& source);
BloodstreamGraph load_graph_file(const std::string& path);
BloodstreamGraph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const BloodstreamGraph& graph);
void save_graph(const BloodstreamGraph& graph, std::ostream& out);

// All simple heart-to-heart cycles, in depth-first order of successor lists.
// Throws GraphError when a cycle avoids the heart.
std::vector<CardioPath> cardiovascular_paths(const BloodstreamGraph& graph);

// A node that lies on exactly this path and no other one, preferring
// transition-type nodes. Identifies the body region a path serves.
std::optional<NodeId> exclusive_region(const BloodstreamGraph& graph,
                                       std::span<const CardioPath> paths, std::size_t path_index);

// Nodes (other than the heart) traversed by every cardiovascular path.
std::vector<NodeId> always_traversed(const BloodstreamGraph& graph,
                                     std::span<const CardioPath> paths);

// Synthetic 24-region topology (1 = Head ... 24 = Right heart). Region ids are
// the transition nodes of the 24 heart-to-heart paths.
BloodstreamGraph builtin_24_region();

// Heart plus one transition node per path; each path i takes `times_s[i]`
// seconds and is chosen with probability `weights[i]`. Carries a heart anchor.
BloodstreamGraph parallel_path_graph(std::span<const double> times_s,
                                     std::span<const double> weights);

}  // namespace flowloc
