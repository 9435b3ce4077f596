#include "twostage/paths.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>

#include "parallel.h"
#include "twostage/errors.h"

namespace twostage {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Origins handled per chunk. Fixed so that flow sums do not depend on the
// thread count.
constexpr std::size_t kOriginsPerChunk = 8;

std::string pair_label(int origin, int destination) {
  return "(" + std::to_string(origin + 1) + ", " + std::to_string(destination + 1) + ")";
}

void dijkstra(const Graph& graph, std::span<const double> times, ShortestPathTree& tree) {
  const int n = graph.num_nodes();
  tree.dist.assign(n, kInf);
  tree.pred_link.assign(n, -1);
  tree.settle_order.clear();
  std::vector<char> settled(n, 0);

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  tree.dist[tree.origin] = 0.0;
  heap.emplace(0.0, tree.origin);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u] || d > tree.dist[u]) continue;
    settled[u] = 1;
    tree.settle_order.push_back(u);
    for (int e : graph.out_links(u)) {
      const int v = graph.head(e);
      if (settled[v]) continue;
      const double nd = d + times[e];
      if (nd < tree.dist[v]) {
        tree.dist[v] = nd;
        tree.pred_link[v] = e;
        heap.emplace(nd, v);
      } else if (nd == tree.dist[v] && e < tree.pred_link[v]) {
        tree.pred_link[v] = e;
      }
    }
  }
}

}  // namespace

OdSupport::OdSupport(std::vector<OdPair> pairs, int num_zones)
    : num_zones_(num_zones), pairs_(std::move(pairs)) {
  std::sort(pairs_.begin(), pairs_.end(), [](const OdPair& a, const OdPair& b) {
    return std::pair(a.origin, a.destination) < std::pair(b.origin, b.destination);
  });
  if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end()) {
    throw ValidationError("duplicate OD pair in support");
  }
  for (const auto& p : pairs_) {
    if (p.origin < 0 || p.origin >= num_zones || p.destination < 0 ||
        p.destination >= num_zones) {
      throw ValidationError("OD pair " + pair_label(p.origin, p.destination) +
                            " outside zone range");
    }
  }
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    if (origins_.empty() || origins_.back() != pairs_[k].origin) {
      origins_.push_back(pairs_[k].origin);
      row_offsets_.push_back(k);
    }
  }
  row_offsets_.push_back(pairs_.size());

  std::vector<std::size_t> order(pairs_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairs_[a].destination < pairs_[b].destination;
  });
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const int dest = pairs_[order[idx]].destination;
    if (destinations_.empty() || destinations_.back() != dest) {
      destinations_.push_back(dest);
      column_offsets_.push_back(idx);
    }
  }
  column_offsets_.push_back(order.size());
  column_pairs_ = std::move(order);
}

OdSupport OdSupport::from_demand(const DemandSpec& demand) {
  std::vector<OdPair> pairs;
  pairs.reserve(demand.od_support.size());
  for (const auto& e : demand.od_support) pairs.push_back({e.origin, e.destination});
  return OdSupport(std::move(pairs), demand.num_zones());
}

std::span<const std::size_t> OdSupport::column(std::size_t c) const {
  return {column_pairs_.data() + column_offsets_[c],
          column_pairs_.data() + column_offsets_[c + 1]};
}

Graph::Graph(const Network& net) : num_nodes_(net.num_nodes) {
  const std::size_t m = net.links.size();
  tails_.resize(m);
  heads_.resize(m);
  offsets_.assign(num_nodes_ + 1, 0);
  for (std::size_t e = 0; e < m; ++e) {
    tails_[e] = net.links[e].tail;
    heads_[e] = net.links[e].head;
    ++offsets_[tails_[e] + 1];
  }
  for (int v = 0; v < num_nodes_; ++v) offsets_[v + 1] += offsets_[v];
  out_links_.resize(m);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t e = 0; e < m; ++e) out_links_[fill[tails_[e]]++] = static_cast<int>(e);
}

ShortestPathResult shortest_paths(const Graph& graph, std::span<const double> times,
                                  const OdSupport& od, int threads) {
  if (times.size() != graph.num_links()) {
    throw ValidationError("time vector has " + std::to_string(times.size()) +
                          " entries, graph has " + std::to_string(graph.num_links()) +
                          " links");
  }
  for (double t : times) {
    if (!(t >= 0.0)) throw DomainError("link times must be nonnegative");
  }
  ShortestPathResult result;
  const auto& origins = od.origins();
  result.trees.resize(origins.size());
  result.od_costs.assign(od.size(), 0.0);
  const std::size_t chunks = (origins.size() + kOriginsPerChunk - 1) / kOriginsPerChunk;
  detail::parallel_chunks(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(origins.size(), (c + 1) * kOriginsPerChunk);
    for (std::size_t r = c * kOriginsPerChunk; r < end; ++r) {
      auto& tree = result.trees[r];
      tree.origin = origins[r];
      dijkstra(graph, times, tree);
      for (std::size_t k = od.row_begin(r); k < od.row_begin(r + 1); ++k) {
        const double cost = tree.dist[od[k].destination];
        if (!std::isfinite(cost)) {
          throw ModelError("OD pair " + pair_label(od[k].origin, od[k].destination) +
                           " is unreachable");
        }
        result.od_costs[k] = cost;
      }
    }
  });
  return result;
}

std::vector<int> tree_path(const Graph& graph, const ShortestPathTree& tree, int destination) {
  std::vector<int> links;
  for (int v = destination; v != tree.origin;) {
    const int e = tree.pred_link[v];
    if (e < 0) throw ModelError("node " + std::to_string(destination + 1) + " not in tree");
    links.push_back(e);
    v = graph.tail(e);
  }
  std::reverse(links.begin(), links.end());
  return links;
}

std::vector<double> assign_flows(const Graph& graph, const ShortestPathResult& sp,
                                 const OdSupport& od, std::span<const double> trips,
                                 int threads) {
  const std::size_t m = graph.num_links();
  const auto& origins = od.origins();
  const std::size_t chunks = (origins.size() + kOriginsPerChunk - 1) / kOriginsPerChunk;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(m, 0.0));
  detail::parallel_chunks(chunks, threads, [&](std::size_t c) {
    auto& flows = partial[c];
    std::vector<double> load(graph.num_nodes(), 0.0);
    const std::size_t end = std::min(origins.size(), (c + 1) * kOriginsPerChunk);
    for (std::size_t r = c * kOriginsPerChunk; r < end; ++r) {
      const auto& tree = sp.trees[r];
      std::fill(load.begin(), load.end(), 0.0);
      for (std::size_t k = od.row_begin(r); k < od.row_begin(r + 1); ++k) {
        load[od[k].destination] += trips[k];
      }
      // Leaf-to-root accumulation in reverse settling order.
      for (auto it = tree.settle_order.rbegin(); it != tree.settle_order.rend(); ++it) {
        const int v = *it;
        const int e = tree.pred_link[v];
        if (e < 0 || load[v] == 0.0) continue;
        flows[e] += load[v];
        load[graph.tail(e)] += load[v];
      }
    }
  });
  std::vector<double> flows(m, 0.0);
  for (const auto& p : partial) {
    for (std::size_t e = 0; e < m; ++e) flows[e] += p[e];
  }
  return flows;
}

PathSet enumerate_paths(const Network& net, int origin, int destination,
                        std::span<const double> times, int max_nodes) {
  if (net.num_nodes > max_nodes) {
    throw UnsupportedConfiguration("path enumeration refused: " +
                                   std::to_string(net.num_nodes) + " nodes exceed the limit of " +
                                   std::to_string(max_nodes));
  }
  if (times.size() != net.links.size()) throw ValidationError("time vector size mismatch");
  const Graph graph(net);
  PathSet set;
  set.origin = origin;
  set.destination = destination;
  set.num_links = net.links.size();

  std::vector<char> on_path(net.num_nodes, 0);
  std::vector<int> stack;
  std::function<void(int)> visit = [&](int u) {
    if (u == destination) {
      set.paths.push_back(stack);
      double cost = 0.0;
      for (int e : stack) cost += times[e];
      set.costs.push_back(cost);
      set.max_edges = std::max(set.max_edges, static_cast<int>(stack.size()));
      return;
    }
    on_path[u] = 1;
    for (int e : graph.out_links(u)) {
      const int v = graph.head(e);
      if (on_path[v]) continue;
      stack.push_back(e);
      visit(v);
      stack.pop_back();
    }
    on_path[u] = 0;
  };
  if (origin != destination) visit(origin);
  return set;
}

SmoothedCost smoothed_cost(const PathSet& paths, std::span<const double> times,
                           double smoothing) {
  if (paths.paths.empty()) {
    throw ModelError("no path between " + pair_label(paths.origin, paths.destination));
  }
  if (!(smoothing > 0.0)) throw DomainError("smoothing parameter must be positive");
  std::vector<double> costs(paths.paths.size(), 0.0);
  for (std::size_t p = 0; p < costs.size(); ++p) {
    for (int e : paths.paths[p]) costs[p] += times[e];
  }
  const double shortest = *std::min_element(costs.begin(), costs.end());
  std::vector<double> weights(costs.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < costs.size(); ++p) {
    weights[p] = std::exp(-(costs[p] - shortest) / smoothing);
    sum += weights[p];
  }
  SmoothedCost out;
  out.value = shortest - smoothing * std::log(sum);
  out.gradient.assign(paths.num_links, 0.0);
  for (std::size_t p = 0; p < costs.size(); ++p) {
    const double w = weights[p] / sum;
    for (int e : paths.paths[p]) out.gradient[e] += w;
  }
  return out;
}

}  // namespace twostage
