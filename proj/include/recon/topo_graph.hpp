#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recon/world.hpp"

#include "json.hpp"

namespace recon::topo {

// Predicted travel time (control steps) from one observation to another.
// Supplied by the caller so the graph stays independent of any one model.
using DistanceFn = std::function<double(const sim::Observation&, const sim::Observation&)>;

struct TopoNode {
  int id = 0;
  sim::Observation o;
  long count = 1;  // visitation count, >= 1 from creation
};

// Observation-keyed memory. Edges are directed and carry the distance
// estimate frozen at insertion time; queries always use the caller's current
// distance function, so edge weights and fresh predictions may differ.
class TopoGraph {
 public:
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<TopoNode>& nodes() const { return nodes_; }
  const std::map<std::pair<int, int>, double>& edges() const { return edges_; }
  const TopoNode& node(int id) const;
  bool has_node(int id) const;

  // Nearest vertex by predicted distance from o; ties go to the lowest id.
  // Throws ContractViolation on an empty graph.
  const TopoNode& associate(const DistanceFn& dist, const sim::Observation& o) const;

  // Dedup-or-insert. Within dedup_threshold of the nearest vertex the visit
  // count is incremented; otherwise a new vertex is linked both ways to every
  // existing vertex. Returns the id touched.
  int expand(const DistanceFn& dist, const sim::Observation& o, double dedup_threshold);

  // Least-visited vertex among {associated vertex} + {vertices within
  // neighbor_threshold by stored edge weight}; ties go to the lowest id.
  // Second return value is the fresh predicted distance from o to it.
  std::pair<const TopoNode*, double> least_explored_neighbor(const DistanceFn& dist,
                                                             const sim::Observation& o,
                                                             double neighbor_threshold) const;

  // Dijkstra over edges with weight < max_edge_weight. nullopt if no path.
  std::optional<std::vector<int>> shortest_path(int from, int to, double max_edge_weight) const;

  void increment_count(int id);

  nlohmann::json to_json() const;
  static TopoGraph from_json(const nlohmann::json& j);

 private:
  std::vector<TopoNode> nodes_;                     // ids are indices
  std::map<std::pair<int, int>, double> edges_;     // (from, to) -> steps
};

void save_graph(const TopoGraph& g, const std::string& path,
                const nlohmann::json& meta = nlohmann::json());
TopoGraph load_graph(const std::string& path);

}  // namespace recon::topo
