#include "recon/topo_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include "recon/errors.hpp"

namespace recon::topo {

const TopoNode& TopoGraph::node(int id) const {
  require(has_node(id), "TopoGraph: unknown vertex id " + std::to_string(id));
  return nodes_[id];
}

bool TopoGraph::has_node(int id) const {
  return id >= 0 && id < static_cast<int>(nodes_.size());
}

const TopoNode& TopoGraph::associate(const DistanceFn& dist, const sim::Observation& o) const {
  require(!nodes_.empty(), "TopoGraph::associate: graph is empty, expand first");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& v : nodes_) {
    const double d = dist(o, v.o);
    if (d < best_d) {
      best_d = d;
      best = v.id;
    }
  }
  return nodes_[best];
}

int TopoGraph::expand(const DistanceFn& dist, const sim::Observation& o, double dedup_threshold) {
  if (!nodes_.empty()) {
    const TopoNode& nearest = associate(dist, o);
    if (dist(o, nearest.o) < dedup_threshold) {
      nodes_[nearest.id].count += 1;
      return nearest.id;
    }
  }
  TopoNode v;
  v.id = static_cast<int>(nodes_.size());
  v.o = o;
  v.count = 1;
  for (const auto& other : nodes_) {
    edges_[{v.id, other.id}] = std::max(0.0, dist(v.o, other.o));
    edges_[{other.id, v.id}] = std::max(0.0, dist(other.o, v.o));
  }
  nodes_.push_back(std::move(v));
  return nodes_.back().id;
}

std::pair<const TopoNode*, double> TopoGraph::least_explored_neighbor(
    const DistanceFn& dist, const sim::Observation& o, double neighbor_threshold) const {
  const TopoNode& v = associate(dist, o);
  // The vertex itself is always a candidate so a fresh own node can be the
  // frontier.
  const TopoNode* best = &nodes_[v.id];
  for (const auto& other : nodes_) {
    if (other.id == v.id) continue;
    const auto it = edges_.find({v.id, other.id});
    if (it == edges_.end() || it->second >= neighbor_threshold) continue;
    if (other.count < best->count || (other.count == best->count && other.id < best->id))
      best = &nodes_[other.id];
  }
  return {best, dist(o, best->o)};
}

std::optional<std::vector<int>> TopoGraph::shortest_path(int from, int to,
                                                         double max_edge_weight) const {
  require(has_node(from) && has_node(to), "TopoGraph::shortest_path: vertex not in graph");
  if (from == to) return std::vector<int>{from};

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist_to(nodes_.size(), inf);
  std::vector<int> prev(nodes_.size(), -1);
  using QItem = std::pair<double, int>;
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> open;
  dist_to[from] = 0.0;
  open.emplace(0.0, from);

  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > dist_to[u]) continue;
    if (u == to) break;
    // edges_ is ordered by (from, to); scan this vertex's out-edges.
    for (auto it = edges_.lower_bound({u, 0}); it != edges_.end() && it->first.first == u; ++it) {
      if (it->second >= max_edge_weight) continue;
      const int v = it->first.second;
      const double nd = d + it->second;
      if (nd < dist_to[v]) {
        dist_to[v] = nd;
        prev[v] = u;
        open.emplace(nd, v);
      }
    }
  }

  if (!std::isfinite(dist_to[to])) return std::nullopt;
  std::vector<int> path;
  for (int at = to; at != -1; at = prev[at]) path.push_back(at);
  std::reverse(path.begin(), path.end());
  return path;
}

void TopoGraph::increment_count(int id) {
  require(has_node(id), "TopoGraph::increment_count: unknown vertex");
  nodes_[id].count += 1;
}

nlohmann::json TopoGraph::to_json() const {
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : nodes_)
    vertices.push_back({{"id", v.id}, {"count", v.count}, {"o", v.o.rays}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, w] : edges_)
    edges.push_back({{"from", key.first}, {"to", key.second}, {"w", w}});
  return {{"vertices", vertices}, {"edges", edges}};
}

TopoGraph TopoGraph::from_json(const nlohmann::json& j) {
  TopoGraph g;
  for (const auto& vj : j.at("vertices")) {
    TopoNode v;
    v.id = vj.at("id").get<int>();
    v.count = vj.at("count").get<long>();
    v.o.rays = vj.at("o").get<std::vector<double>>();
    if (v.id != static_cast<int>(g.nodes_.size()))
      throw IoError("TopoGraph::from_json: vertex ids must be dense and ordered");
    if (v.count < 1) throw IoError("TopoGraph::from_json: vertex count < 1");
    g.nodes_.push_back(std::move(v));
  }
  for (const auto& ej : j.at("edges")) {
    const int from = ej.at("from").get<int>();
    const int to = ej.at("to").get<int>();
    const double w = ej.at("w").get<double>();
    if (!g.has_node(from) || !g.has_node(to) || from == to)
      throw IoError("TopoGraph::from_json: bad edge endpoints");
    if (!(w >= 0.0) || !std::isfinite(w)) throw IoError("TopoGraph::from_json: bad edge weight");
    g.edges_[{from, to}] = w;
  }
  return g;
}

void save_graph(const TopoGraph& g, const std::string& path, const nlohmann::json& meta) {
  nlohmann::json j = g.to_json();
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw IoError("save_graph: cannot open " + path);
  out << j.dump() << "\n";
}

TopoGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_graph: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_graph: bad JSON in " + path + ": " + e.what());
  }
  return TopoGraph::from_json(j);
}

}  // namespace recon::topo
