#include "flowloc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "flowloc/error.hpp"

namespace flowloc {

namespace {

constexpr double kWeightTolerance = 1e-9;

std::vector<bool> reachable(const std::vector<std::vector<std::size_t>>& adj, std::size_t from) {
  std::vector<bool> seen(adj.size(), false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

BloodstreamGraph::BloodstreamGraph(std::vector<RegionNode> nodes, std::vector<VesselEdge> edges,
                                   std::vector<AnchorSpec> anchors)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), anchors_(std::move(anchors)) {
  if (nodes_.empty()) throw GraphError("graph has no nodes");

  std::size_t hearts = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.id < 0) throw FormatError(fmt::format("malformed record: negative node id {}", n.id));
    if (!index_.emplace(n.id, i).second)
      throw GraphError(fmt::format("duplicate node id {}", n.id));
    if (!(n.length_cm > 0.0) || !std::isfinite(n.length_cm))
      throw GraphError(fmt::format("node {} has non-positive length", n.id));
    if (!(n.blood_speed_cm_s > 0.0) || !std::isfinite(n.blood_speed_cm_s))
      throw GraphError(fmt::format("node {} has non-positive blood speed", n.id));
    auto type = static_cast<int>(n.region_type);
    if (type < 0 || type > 2)
      throw FormatError(fmt::format("malformed record: node {} region_type {}", n.id, type));
    if (n.is_heart) {
      heart_index_ = i;
      ++hearts;
    }
  }
  if (hearts == 0) throw GraphError("no heart node");
  if (hearts > 1) throw GraphError("more than one heart node");

  out_.assign(nodes_.size(), {});
  std::vector<std::vector<std::size_t>> fwd(nodes_.size()), rev(nodes_.size());
  std::set<std::pair<NodeId, NodeId>> seen_edges;
  for (const auto& e : edges_) {
    if (!contains(e.from) || !contains(e.to))
      throw GraphError(fmt::format("edge {}->{} references an unknown node", e.from, e.to));
    if (e.from == e.to) throw GraphError(fmt::format("self-loop at node {}", e.from));
    if (!(e.branch_weight > 0.0 && e.branch_weight <= 1.0))
      throw GraphError(fmt::format("edge {}->{} branch weight {} outside (0, 1]", e.from, e.to,
                                   e.branch_weight));
    if (!seen_edges.emplace(e.from, e.to).second)
      throw GraphError(fmt::format("duplicate edge {}->{}", e.from, e.to));
    auto a = index_.at(e.from), b = index_.at(e.to);
    out_[a].push_back({e.to, e.branch_weight});
    fwd[a].push_back(b);
    rev[b].push_back(a);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (out_[i].empty()) continue;
    double sum = 0.0;
    for (const auto& s : out_[i]) sum += s.weight;
    if (std::abs(sum - 1.0) > kWeightTolerance)
      throw GraphError(fmt::format("branch weights not summing to 1 at node {} (sum {})",
                                   nodes_[i].id, sum));
  }

  auto from_heart = reachable(fwd, heart_index_);
  auto to_heart = reachable(rev, heart_index_);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!from_heart[i] || !to_heart[i])
      throw GraphError(fmt::format("disconnected node {}", nodes_[i].id));
  }

  std::set<int> anchor_ids;
  std::size_t heart_anchors = 0;
  for (const auto& a : anchors_) {
    if (!anchor_ids.insert(a.id).second)
      throw GraphError(fmt::format("duplicate anchor id {}", a.id));
    if (!contains(a.attached_node))
      throw GraphError(fmt::format("anchor {} attached to unknown node {}", a.id, a.attached_node));
    if (!(a.range_cm > 0.0)) throw GraphError(fmt::format("anchor {} has non-positive range", a.id));
    if (a.is_heart_anchor) {
      ++heart_anchors;
      if (a.attached_node != heart())
        throw GraphError(fmt::format("heart anchor {} is not attached to the heart node", a.id));
    }
  }
  if (heart_anchors > 1) throw GraphError("more than one heart anchor");
}

const RegionNode& BloodstreamGraph::node(NodeId id) const { return nodes_[index_of(id)]; }

std::size_t BloodstreamGraph::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw GraphError(fmt::format("unknown node id {}", id));
  return it->second;
}

std::span<const Successor> BloodstreamGraph::successors(NodeId id) const {
  return out_[index_of(id)];
}

const AnchorSpec* BloodstreamGraph::find_anchor(int anchor_id) const {
  for (const auto& a : anchors_)
    if (a.id == anchor_id) return &a;
  return nullptr;
}

const AnchorSpec* BloodstreamGraph::heart_anchor() const {
  for (const auto& a : anchors_)
    if (a.is_heart_anchor) return &a;
  return nullptr;
}

bool BloodstreamGraph::operator==(const BloodstreamGraph& o) const {
  if (nodes_.size() != o.nodes_.size() || edges_.size() != o.edges_.size() ||
      anchors_.size() != o.anchors_.size())
    return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto &a = nodes_[i], &b = o.nodes_[i];
    if (a.id != b.id || a.name != b.name || a.region_type != b.region_type ||
        a.length_cm != b.length_cm || a.blood_speed_cm_s != b.blood_speed_cm_s ||
        a.centroid_cm != b.centroid_cm || a.is_heart != b.is_heart)
      return false;
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto &a = edges_[i], &b = o.edges_[i];
    if (a.from != b.from || a.to != b.to || a.branch_weight != b.branch_weight) return false;
  }
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const auto &a = anchors_[i], &b = o.anchors_[i];
    if (a.id != b.id || a.attached_node != b.attached_node || a.range_cm != b.range_cm ||
        a.is_heart_anchor != b.is_heart_anchor)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON

BloodstreamGraph graph_from_json(const nlohmann::json& doc) {
  std::vector<RegionNode> nodes;
  std::vector<VesselEdge> edges;
  std::vector<AnchorSpec> anchors;
  try {
    if (!doc.is_object()) throw FormatError("malformed record: graph document is not an object");
    const auto& jnodes = doc.at("nodes");
    if (!jnodes.is_array()) throw FormatError("malformed record: \"nodes\" is not an array");
    std::size_t k = 0;
    for (const auto& jn : jnodes) {
      RegionNode n;
      n.id = jn.at("id").get<int>();
      n.name = jn.value("name", fmt::format("node{}", n.id));
      auto type = jn.at("region_type").get<int>();
      if (type < 0 || type > 2)
        throw FormatError(fmt::format("malformed record: node {} region_type {}", n.id, type));
      n.region_type = static_cast<RegionType>(type);
      n.length_cm = jn.at("length_cm").get<double>();
      n.blood_speed_cm_s = jn.at("blood_speed_cm_s").get<double>();
      n.is_heart = jn.value("is_heart", false);
      if (jn.contains("centroid_cm")) {
        const auto& c = jn.at("centroid_cm");
        if (!c.is_array() || c.size() != 3)
          throw FormatError(fmt::format("malformed record: node {} centroid_cm", n.id));
        n.centroid_cm = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
      } else if (!n.is_heart) {
        // Synthetic placement on a ring around the heart.
        double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(std::max<std::size_t>(jnodes.size(), 1));
        n.centroid_cm = {30.0 * std::cos(angle), 30.0 * std::sin(angle), 0.0};
      }
      nodes.push_back(std::move(n));
      ++k;
    }
    for (const auto& je : doc.at("edges")) {
      edges.push_back({je.at("from").get<int>(), je.at("to").get<int>(),
                       je.at("branch_weight").get<double>()});
    }
    if (doc.contains("anchors")) {
      for (const auto& ja : doc.at("anchors")) {
        anchors.push_back({ja.at("id").get<int>(), ja.at("attached_node").get<int>(),
                           ja.value("range", ja.value("range_cm", 1.0)),
                           ja.value("is_heart_anchor", false)});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  }
  return BloodstreamGraph(std::move(nodes), std::move(edges), std::move(anchors));
}

BloodstreamGraph load_graph(std::istream& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(source);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  }
  return graph_from_json(doc);
}

BloodstreamGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("cannot open graph file {}", path));
  return load_graph(in);
}

nlohmann::json graph_to_json(const BloodstreamGraph& graph) {
  nlohmann::json doc;
  auto& jnodes = doc["nodes"] = nlohmann::json::array();
  for (const auto& n : graph.nodes()) {
    jnodes.push_back({{"id", n.id},
                      {"name", n.name},
                      {"region_type", static_cast<int>(n.region_type)},
                      {"length_cm", n.length_cm},
                      {"blood_speed_cm_s", n.blood_speed_cm_s},
                      {"centroid_cm", {n.centroid_cm[0], n.centroid_cm[1], n.centroid_cm[2]}},
                      {"is_heart", n.is_heart}});
  }
  auto& jedges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges())
    jedges.push_back({{"from", e.from}, {"to", e.to}, {"branch_weight", e.branch_weight}});
  auto& janchors = doc["anchors"] = nlohmann::json::array();
  for (const auto& a : graph.anchors()) {
    janchors.push_back({{"id", a.id},
                        {"attached_node", a.attached_node},
                        {"range", a.range_cm},
                        {"is_heart_anchor", a.is_heart_anchor}});
  }
  return doc;
}

void save_graph(const BloodstreamGraph& graph, std::ostream& out) {
  out << graph_to_json(graph).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Paths

std::vector<CardioPath> cardiovascular_paths(const BloodstreamGraph& graph) {
  const auto& nodes = graph.nodes();
  const NodeId heart = graph.heart();

  // Every cycle must pass the heart: the graph minus the heart is a DAG.
  enum class Mark { fresh, active, done };
  std::vector<Mark> mark(nodes.size(), Mark::fresh);
  std::function<void(NodeId)> visit = [&](NodeId v) {
    auto i = graph.index_of(v);
    mark[i] = Mark::active;
    for (const auto& s : graph.successors(v)) {
      if (s.to == heart) continue;
      auto j = graph.index_of(s.to);
      if (mark[j] == Mark::active)
        throw GraphError(fmt::format("cycle not passing through heart detected at node {}", s.to));
      if (mark[j] == Mark::fresh) visit(s.to);
    }
    mark[i] = Mark::done;
  };
  for (const auto& n : nodes)
    if (n.id != heart && mark[graph.index_of(n.id)] == Mark::fresh) visit(n.id);

  std::vector<CardioPath> paths;
  std::vector<NodeId> stack{heart};
  std::function<void(NodeId, double, double)> walk = [&](NodeId v, double time, double prob) {
    for (const auto& s : graph.successors(v)) {
      if (s.to == heart) {
        paths.push_back({stack, time, prob * s.weight});
        continue;
      }
      stack.push_back(s.to);
      walk(s.to, time + graph.node(s.to).transit_time_s(), prob * s.weight);
      stack.pop_back();
    }
  };
  walk(heart, graph.node(heart).transit_time_s(), 1.0);
  return paths;
}

std::optional<NodeId> exclusive_region(const BloodstreamGraph& graph,
                                       std::span<const CardioPath> paths, std::size_t path_index) {
  std::map<NodeId, std::size_t> count;
  for (const auto& p : paths)
    for (auto id : std::set<NodeId>(p.region_sequence.begin(), p.region_sequence.end())) ++count[id];
  std::optional<NodeId> fallback;
  for (auto id : paths[path_index].region_sequence) {
    if (count[id] != 1) continue;
    if (graph.node(id).region_type == RegionType::transition) return id;
    if (!fallback) fallback = id;
  }
  return fallback;
}

std::vector<NodeId> always_traversed(const BloodstreamGraph& graph,
                                     std::span<const CardioPath> paths) {
  std::vector<NodeId> out;
  if (paths.empty()) return out;
  for (const auto& n : graph.nodes()) {
    if (n.is_heart) continue;
    bool everywhere = true;
    for (const auto& p : paths) {
      if (std::find(p.region_sequence.begin(), p.region_sequence.end(), n.id) ==
          p.region_sequence.end()) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) out.push_back(n.id);
  }
  return out;
}

}  // namespace flowloc
