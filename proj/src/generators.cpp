#include <algorithm>
#include <set>

#include "gmn/errors.hpp"
#include "gmn/graph.hpp"
#include "gmn/rng.hpp"

namespace gmn {

Graph path_graph(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 1; i < n; ++i) e.emplace_back(static_cast<NodeId>(i - 1), static_cast<NodeId>(i));
    return Graph(n, std::move(e));
}

Graph cycle_graph(std::size_t n) {
    if (n < 3) throw ValidationError("cycle needs at least 3 nodes");
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
    return Graph(n, std::move(e));
}

Graph complete_graph(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    return Graph(n, std::move(e));
}

Graph star_graph(std::size_t leaves) {
    std::vector<Edge> e;
    for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, static_cast<NodeId>(i));
    return Graph(leaves + 1, std::move(e));
}

Graph complete_bipartite(std::size_t a, std::size_t b) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t j = 0; j < b; ++j) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(a + j));
    return Graph(a + b, std::move(e));
}

Graph triangular_prism() {
    return Graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {0, 3}, {1, 4}, {2, 5}});
}

std::vector<NodeId> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<NodeId> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<NodeId>(i);
    Rng rng(seed);
    rng.shuffle(std::span<NodeId>(p));
    return p;
}

Graph random_bounded_degree_graph(std::size_t n, std::size_t max_degree, std::size_t target_edges,
                                  std::uint64_t seed) {
    Rng rng(seed);
    std::set<Edge> edges;
    std::vector<std::size_t> deg(n, 0);
    // Random spanning tree first (when degrees allow) so the graph is connected.
    for (std::size_t v = 1; v < n; ++v) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto u = static_cast<NodeId>(rng.index(v));
            if (deg[u] < max_degree) {
                edges.insert({u, static_cast<NodeId>(v)});
                ++deg[u];
                ++deg[v];
                break;
            }
        }
    }
    std::size_t attempts = 0;
    while (edges.size() < target_edges && attempts++ < 100 * (target_edges + 1)) {
        auto u = static_cast<NodeId>(rng.index(n));
        auto v = static_cast<NodeId>(rng.index(n));
        if (u == v || deg[u] >= max_degree || deg[v] >= max_degree) continue;
        if (u > v) std::swap(u, v);
        if (edges.insert({u, v}).second) {
            ++deg[u];
            ++deg[v];
        }
    }
    return Graph(n, std::vector<Edge>(edges.begin(), edges.end()));
}

Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed) {
    if ((n * d) % 2 != 0 || d >= n) throw ValidationError("no simple d-regular graph for these n, d");
    Rng rng(seed);
    std::vector<NodeId> stubs;
    stubs.reserve(n * d);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t k = 0; k < d; ++k) stubs.push_back(static_cast<NodeId>(v));
    rng.shuffle(std::span<NodeId>(stubs));
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
        edges.emplace_back(std::min(stubs[i], stubs[i + 1]), std::max(stubs[i], stubs[i + 1]));
    }
    // Repair loops and multi-edges by switching with random edges.
    std::multiset<Edge> present(edges.begin(), edges.end());
    auto bad = [&](const Edge& e) { return e.first == e.second || present.count(e) > 1; };
    for (std::size_t round = 0; round < 1000; ++round) {
        bool clean = true;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (!bad(edges[i])) continue;
            clean = false;
            std::size_t j = rng.index(edges.size());
            if (j == i) continue;
            auto [a, b] = edges[i];
            auto [c, dd] = edges[j];
            Edge e1{std::min(a, c), std::max(a, c)};
            Edge e2{std::min(b, dd), std::max(b, dd)};
            if (e1.first == e1.second || e2.first == e2.second || present.count(e1) || present.count(e2) || e1 == e2) {
                continue;
            }
            present.erase(present.find(edges[i]));
            present.erase(present.find(edges[j]));
            edges[i] = e1;
            edges[j] = e2;
            present.insert(e1);
            present.insert(e2);
        }
        if (clean) return Graph(n, std::move(edges));
    }
    throw NumericalError("random_regular_graph: repair did not converge");
}

} // namespace gmn
