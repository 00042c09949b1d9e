#include "flowloc/anchor_filter.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "flowloc/error.hpp"

namespace flowloc {

namespace {

struct PathSearch {
  const Adjacency& adj;
  NodeId target;
  RegionSet on_stack;
  std::vector<NodeId> stack;
  RegionSet result;
  // A node that already reached the target along some path is on the cover,
  // but other simple paths through it may still add nodes, so no pruning.
  void visit(NodeId v) {
    if (v == target) {
      result.insert(stack.begin(), stack.end());
      result.insert(v);
      return;
    }
    auto it = adj.find(v);
    if (it == adj.end()) return;
    on_stack.insert(v);
    stack.push_back(v);
    for (NodeId w : it->second)
      if (!on_stack.count(w)) visit(w);
    stack.pop_back();
    on_stack.erase(v);
  }
};

RegionSet reachable_from(const Adjacency& adj, NodeId start) {
  RegionSet seen{start};
  std::vector<NodeId> todo{start};
  while (!todo.empty()) {
    NodeId v = todo.back();
    todo.pop_back();
    auto it = adj.find(v);
    if (it == adj.end()) continue;
    for (NodeId w : it->second)
      if (seen.insert(w).second) todo.push_back(w);
  }
  return seen;
}

}  // namespace

RegionSet dfs_all_paths(const Adjacency& adjacency, NodeId start, NodeId target,
                        std::string* warning) {
  // Restrict the search to nodes that can still reach the target; this keeps
  // the enumeration from wandering through dead branches.
  Adjacency reverse;
  for (const auto& [v, outs] : adjacency)
    for (NodeId w : outs) reverse[w].push_back(v);
  RegionSet useful = reachable_from(reverse, target);
  if (!useful.count(start)) {
    if (warning) *warning = fmt::format("node {} is not reachable from node {}", target, start);
    return {};
  }
  Adjacency pruned;
  for (const auto& [v, outs] : adjacency) {
    if (!useful.count(v)) continue;
    auto& dst = pruned[v];
    for (NodeId w : outs)
      if (useful.count(w)) dst.push_back(w);
  }
  PathSearch search{pruned, target, {}, {}, {}};
  search.visit(start);
  return search.result;
}

Adjacency adjacency_of(const BloodstreamGraph& graph) {
  Adjacency adj;
  for (const auto& n : graph.nodes()) adj[n.id];
  for (const auto& e : graph.edges()) adj[e.from].push_back(e.to);
  return adj;
}

RegionSet dfs_all_paths(const BloodstreamGraph& graph, NodeId start, NodeId target,
                        std::string* warning) {
  if (!graph.contains(start) || !graph.contains(target))
    throw ParameterError(fmt::format("unknown node in path query {} -> {}", start, target));
  return dfs_all_paths(adjacency_of(graph), start, target, warning);
}

CoverSet cover_set(const BloodstreamGraph& graph, const AnchorSpec& anchor, std::string* warning) {
  return {anchor.id, dfs_all_paths(graph, graph.heart(), anchor.attached_node, warning)};
}

CoverCache::CoverCache(const BloodstreamGraph& graph) {
  for (const auto& a : graph.anchors()) {
    if (a.is_heart_anchor) continue;
    std::string warning;
    covers_[a.id] = cover_set(graph, a, &warning);
    if (!warning.empty()) warnings_.push_back(fmt::format("anchor {}: {}", a.id, warning));
  }
}

const CoverSet& CoverCache::at(int anchor_id) const {
  auto it = covers_.find(anchor_id);
  if (it == covers_.end()) throw ParameterError(fmt::format("no cover set for anchor {}", anchor_id));
  return it->second;
}

RegionSet allowed_regions(const std::map<int, int>& predictions,
                          const std::map<int, CoverSet>& covers, const RegionSet& all) {
  std::vector<const RegionSet*> s1, s0;
  for (const auto& [anchor, bit] : predictions) {
    auto it = covers.find(anchor);
    if (it == covers.end()) throw ParameterError(fmt::format("missing cover set for anchor {}", anchor));
    (bit ? s1 : s0).push_back(&it->second.regions);
  }

  RegionSet r = all;
  for (const auto* c : s1) {
    RegionSet keep;
    std::set_intersection(r.begin(), r.end(), c->begin(), c->end(),
                          std::inserter(keep, keep.end()));
    r = std::move(keep);
  }
  for (const auto* c : s0)
    for (NodeId v : *c) r.erase(v);
  if (r.empty()) return all;
  return r;
}

NodeId RegionPrediction::argmax() const {
  if (logits.empty()) throw ParameterError("empty prediction");
  auto best = logits.begin();
  for (auto it = logits.begin(); it != logits.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

double default_minimal_value(const RegionPrediction& pred) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& [id, s] : pred.logits)
    if (std::isfinite(s)) lo = std::min(lo, s);
  return std::isfinite(lo) ? lo - 1e6 : -1e6;
}

RegionPrediction apply_filter(const RegionPrediction& pred, const RegionSet& allowed,
                              std::optional<double> minimal_value) {
  const double floor = minimal_value ? *minimal_value : default_minimal_value(pred);
  RegionPrediction out = pred;
  for (auto& [id, s] : out.logits)
    if (!allowed.count(id)) s = floor;
  out.filtered = true;
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(std::istream& in, const std::string& what,
                                                    std::size_t columns) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (header) {
      header = false;
      // Header row is optional; detect it by a non-numeric first cell.
      if (!cells.empty() && !cells[0].empty() &&
          !(std::isdigit(static_cast<unsigned char>(cells[0][0])) || cells[0][0] == '-'))
        continue;
    }
    if (cells.size() != columns)
      throw FormatError(fmt::format("malformed {} row: '{}'", what, line));
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    T v;
    if constexpr (std::is_integral_v<T>)
      v = static_cast<T>(std::stol(s, &pos));
    else
      v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(fmt::format("bad number '{}' in {}", s, what));
  }
}

}  // namespace

RegionPrediction read_logits_csv(std::istream& in) {
  RegionPrediction pred;
  for (const auto& row : read_csv_rows(in, "logits", 2)) {
    auto id = parse_number<NodeId>(row[0], "logits");
    double s = parse_number<double>(row[1], "logits");
    if (!std::isfinite(s)) throw FormatError(fmt::format("non-finite score for region {}", id));
    if (!pred.logits.emplace(id, s).second)
      throw FormatError(fmt::format("duplicate region {} in logits", id));
  }
  return pred;
}

void write_logits_csv(const RegionPrediction& pred, std::ostream& out) {
  out << "region_id,score\n";
  for (const auto& [id, s] : pred.logits) out << fmt::format("{},{}\n", id, s);
}

std::map<int, int> read_predictions_csv(std::istream& in) {
  std::map<int, int> preds;
  for (const auto& row : read_csv_rows(in, "predictions", 2)) {
    int anchor = parse_number<int>(row[0], "predictions");
    int bit = parse_number<int>(row[1], "predictions");
    if (bit != 0 && bit != 1) throw FormatError(fmt::format("prediction bit must be 0 or 1, got {}", bit));
    if (!preds.emplace(anchor, bit).second)
      throw FormatError(fmt::format("duplicate anchor {} in predictions", anchor));
  }
  return preds;
}

}  // namespace flowloc
