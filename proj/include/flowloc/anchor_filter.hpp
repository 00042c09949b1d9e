#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowloc/graph.hpp"

namespace flowloc {

using RegionSet = std::set<NodeId>;
using Adjacency = std::map<NodeId, std::vector<NodeId>>;

struct CoverSet {
  int anchor_id = 0;
  RegionSet regions;
};

// Union of the nodes on every simple directed path start -> target.
// Unreachable targets give an empty set and, if `warning` is set, a message.
RegionSet dfs_all_paths(const Adjacency& adjacency, NodeId start, NodeId target,
                        std::string* warning = nullptr);
RegionSet dfs_all_paths(const BloodstreamGraph& graph, NodeId start, NodeId target,
                        std::string* warning = nullptr);

Adjacency adjacency_of(const BloodstreamGraph& graph);

CoverSet cover_set(const BloodstreamGraph& graph, const AnchorSpec& anchor,
                   std::string* warning = nullptr);

// Covers of every non-heart anchor, computed once and then read-only.
class CoverCache {
 public:
  explicit CoverCache(const BloodstreamGraph& graph);
  const std::map<int, CoverSet>& covers() const { return covers_; }
  const CoverSet& at(int anchor_id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::map<int, CoverSet> covers_;
  std::vector<std::string> warnings_;
};

// S1 = anchors predicting 1, S0 = anchors predicting 0.
//   S1 empty       -> all \ U(S0)
//   S0 empty       -> n(S1)
//   both non-empty -> n(S1) \ U(S0)
// An empty result falls back to all regions. The result is always within `all`.
RegionSet allowed_regions(const std::map<int, int>& predictions,
                          const std::map<int, CoverSet>& covers, const RegionSet& all);

struct RegionPrediction {
  std::map<NodeId, double> logits;
  bool filtered = false;

  NodeId argmax() const;
};

double default_minimal_value(const RegionPrediction& pred);

// Regions outside `allowed` get `minimal_value` (default: min score - 1e6).
RegionPrediction apply_filter(const RegionPrediction& pred, const RegionSet& allowed,
                              std::optional<double> minimal_value = std::nullopt);

// region_id,score
RegionPrediction read_logits_csv(std::istream& in);
void write_logits_csv(const RegionPrediction& pred, std::ostream& out);
// anchor_id,bit
std::map<int, int> read_predictions_csv(std::istream& in);

}  // namespace flowloc
