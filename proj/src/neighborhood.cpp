#include <algorithm>
#include <deque>
#include <limits>

#include "gmn/errors.hpp"
#include "gmn/graph.hpp"

namespace gmn {

std::vector<std::size_t> bfs_distances(const Graph& g, NodeId v) {
    if (v >= g.num_nodes()) throw ValidationError("node id out of range");
    constexpr auto unreached = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(g.num_nodes(), unreached);
    std::deque<NodeId> queue{v};
    dist[v] = 0;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        for (NodeId w : g.neighbors(u)) {
            if (dist[w] == unreached) {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    return dist;
}

std::vector<NodeId> k_hop_neighborhood(const Graph& g, NodeId v, std::size_t k) {
    auto dist = bfs_distances(g, v);
    std::vector<NodeId> out;
    for (std::size_t u = 0; u < dist.size(); ++u) {
        if (dist[u] <= k) out.push_back(static_cast<NodeId>(u));
    }
    return out;
}

InducedSubgraph induce_subgraph(const Graph& g, std::span<const NodeId> nodes) {
    std::vector<NodeId> ids(nodes.begin(), nodes.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<NodeId> local(g.num_nodes(), std::numeric_limits<NodeId>::max());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= g.num_nodes()) throw ValidationError("subgraph node out of range");
        local[ids[i]] = static_cast<NodeId>(i);
    }
    std::vector<Edge> edges;
    std::vector<std::size_t> kept;
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        auto [u, v] = g.edges()[e];
        if (local[u] != std::numeric_limits<NodeId>::max() && local[v] != std::numeric_limits<NodeId>::max()) {
            edges.emplace_back(local[u], local[v]);
            kept.push_back(e);
        }
    }
    Matrix x(ids.size(), g.feature_dim());
    for (std::size_t i = 0; i < ids.size(); ++i) x.row(i) = g.node_features().row(ids[i]);
    Matrix ef;
    if (g.has_edge_features()) {
        ef.resize(kept.size(), g.edge_features().cols());
        for (std::size_t i = 0; i < kept.size(); ++i) ef.row(i) = g.edge_features().row(kept[i]);
    }
    const auto count = ids.size();
    InducedSubgraph out{Graph(count, std::move(edges), x, std::move(ef), g.allows_self_loops()), std::move(ids)};
    // An empty selection still carries the parent's feature width.
    if (count == 0) out.graph = out.graph.with_node_features(Matrix(0, g.feature_dim()));
    return out;
}

Graph disjoint_union(const Graph& a, const Graph& b) {
    const auto shift = static_cast<NodeId>(a.num_nodes());
    std::vector<Edge> edges(a.edges());
    for (auto [u, v] : b.edges()) edges.emplace_back(u + shift, v + shift);
    if (a.feature_dim() != b.feature_dim()) throw ValidationError("feature widths differ");
    Matrix x(a.num_nodes() + b.num_nodes(), a.feature_dim());
    x << a.node_features(), b.node_features();
    return Graph(a.num_nodes() + b.num_nodes(), std::move(edges), std::move(x));
}

} // namespace gmn
