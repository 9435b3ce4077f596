#pragma once

// Shortest-path oracle, all-or-nothing flow assignment and exhaustive path
// enumeration for small graphs.

#include <cstddef>
#include <span>
#include <vector>

#include "twostage/netio.h"

namespace twostage {

struct OdPair {
  int origin = 0;
  int destination = 0;

  bool operator==(const OdPair&) const = default;
};

/// Set of OD pairs carrying demand, sorted by (origin, destination), with
/// row and column groupings.
class OdSupport {
 public:
  OdSupport() = default;
  OdSupport(std::vector<OdPair> pairs, int num_zones);
  static OdSupport from_demand(const DemandSpec& demand);

  std::size_t size() const { return pairs_.size(); }
  int num_zones() const { return num_zones_; }
  const std::vector<OdPair>& pairs() const { return pairs_; }
  const OdPair& operator[](std::size_t k) const { return pairs_[k]; }

  /// Distinct origins, ascending. Pairs of origins()[r] are
  /// [row_begin(r), row_begin(r + 1)).
  const std::vector<int>& origins() const { return origins_; }
  std::size_t row_begin(std::size_t r) const { return row_offsets_[r]; }

  /// Distinct destinations, ascending, and the pair indices ending at each.
  const std::vector<int>& destinations() const { return destinations_; }
  std::span<const std::size_t> column(std::size_t c) const;

 private:
  int num_zones_ = 0;
  std::vector<OdPair> pairs_;
  std::vector<int> origins_;
  std::vector<std::size_t> row_offsets_;
  std::vector<int> destinations_;
  std::vector<std::size_t> column_offsets_;
  std::vector<std::size_t> column_pairs_;
};

/// Forward-star adjacency. Out-links of each node are listed by ascending link index.
class Graph {
 public:
  Graph() = default;
  explicit Graph(const Network& net);

  int num_nodes() const { return num_nodes_; }
  std::size_t num_links() const { return tails_.size(); }
  int tail(int link) const { return tails_[link]; }
  int head(int link) const { return heads_[link]; }
  std::span<const int> out_links(int node) const {
    return {out_links_.data() + offsets_[node], out_links_.data() + offsets_[node + 1]};
  }

 private:
  int num_nodes_ = 0;
  std::vector<int> tails_;
  std::vector<int> heads_;
  std::vector<std::size_t> offsets_;
  std::vector<int> out_links_;
};

/// One shortest-path tree. pred_link[v] is -1 for the root and unreachable nodes.
struct ShortestPathTree {
  int origin = 0;
  std::vector<double> dist;
  std::vector<int> pred_link;
  std::vector<int> settle_order;
};

struct ShortestPathResult {
  std::vector<ShortestPathTree> trees;  // aligned with OdSupport::origins()
  std::vector<double> od_costs;         // T per OD pair index
};

/// Dijkstra from every origin of `od`. Ties go to the smaller link index.
/// Throws ModelError if some OD pair is unreachable.
ShortestPathResult shortest_paths(const Graph& graph, std::span<const double> times,
                                  const OdSupport& od, int threads = 1);

/// Link indices of the tree path from the tree origin to `destination`.
std::vector<int> tree_path(const Graph& graph, const ShortestPathTree& tree, int destination);

/// f_e = sum over pairs of trips[k] * [e on the tree path of pair k].
std::vector<double> assign_flows(const Graph& graph, const ShortestPathResult& sp,
                                 const OdSupport& od, std::span<const double> trips,
                                 int threads = 1);

/// All simple paths of one OD pair.
struct PathSet {
  int origin = 0;
  int destination = 0;
  std::size_t num_links = 0;
  std::vector<std::vector<int>> paths;  // link indices in travel order
  std::vector<double> costs;            // under the times given to enumerate_paths
  int max_edges = 0;                    // longest path, in links
};

/// Exhaustive DFS enumeration. Refuses graphs with more than `max_nodes` nodes.
PathSet enumerate_paths(const Network& net, int origin, int destination,
                        std::span<const double> times, int max_nodes = 12);

struct SmoothedCost {
  double value = 0.0;
  std::vector<double> gradient;  // per link
};

/// -g * ln(sum_p exp(-cost_p / g)) and its gradient (softmin-weighted path
/// indicators), with path costs recomputed from `times`.
SmoothedCost smoothed_cost(const PathSet& paths, std::span<const double> times,
                           double smoothing);

}  // namespace twostage
