#include <algorithm>
#include <map>

#include "gmn/graph.hpp"

namespace gmn {

namespace {

using Signature = std::pair<std::size_t, std::vector<std::size_t>>;

std::size_t count_classes(const std::vector<std::size_t>& colors) {
    std::vector<std::size_t> c(colors);
    std::sort(c.begin(), c.end());
    return static_cast<std::size_t>(std::unique(c.begin(), c.end()) - c.begin());
}

// One refinement round. New ids are ranks of the sorted distinct signatures.
std::vector<std::size_t> refine_once(const Graph& g, const std::vector<std::size_t>& colors) {
    const std::size_t n = g.num_nodes();
    std::vector<Signature> sigs(n);
    for (std::size_t v = 0; v < n; ++v) {
        auto& [own, nb] = sigs[v];
        own = colors[v];
        for (NodeId u : g.neighbors(static_cast<NodeId>(v))) nb.push_back(colors[u]);
        std::sort(nb.begin(), nb.end());
    }
    std::vector<Signature> distinct(sigs);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::size_t> next(n);
    for (std::size_t v = 0; v < n; ++v) {
        next[v] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), sigs[v]) -
                                           distinct.begin());
    }
    return next;
}

} // namespace

WLColoring wl_refine(const Graph& g, std::size_t max_rounds) {
    WLColoring out;
    out.colors.assign(g.num_nodes(), 0);
    std::size_t classes = g.num_nodes() ? 1 : 0;
    while (out.rounds < max_rounds) {
        auto next = refine_once(g, out.colors);
        const auto next_classes = count_classes(next);
        ++out.rounds;
        out.colors = std::move(next);
        if (next_classes == classes) break;
        classes = next_classes;
    }
    return out;
}

std::vector<std::size_t> color_histogram(const WLColoring& c) {
    std::map<std::size_t, std::size_t> counts;
    for (auto col : c.colors) ++counts[col];
    std::vector<std::size_t> sizes;
    for (auto [_, k] : counts) sizes.push_back(k);
    std::sort(sizes.begin(), sizes.end());
    return sizes;
}

bool wl_indistinguishable(const Graph& a, const Graph& b, std::size_t max_rounds) {
    if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges()) return false;
    const Graph u = disjoint_union(a.with_node_features(Matrix::Ones(a.num_nodes(), 1)),
                                   b.with_node_features(Matrix::Ones(b.num_nodes(), 1)));
    auto coloring = wl_refine(u, max_rounds);
    std::map<std::size_t, long> balance;
    for (std::size_t v = 0; v < u.num_nodes(); ++v) {
        balance[coloring.colors[v]] += v < a.num_nodes() ? 1 : -1;
    }
    return std::all_of(balance.begin(), balance.end(), [](const auto& kv) { return kv.second == 0; });
}

namespace {

struct IsoSearch {
    const Graph& a;
    const Graph& b;
    std::vector<NodeId> map_ab;
    std::vector<bool> used;

    bool extend(std::size_t v) {
        if (v == a.num_nodes()) return true;
        for (std::size_t w = 0; w < b.num_nodes(); ++w) {
            if (used[w] || a.degree(static_cast<NodeId>(v)) != b.degree(static_cast<NodeId>(w))) continue;
            bool ok = true;
            for (NodeId u : a.neighbors(static_cast<NodeId>(v))) {
                if (u < v && !b.has_edge(map_ab[u], static_cast<NodeId>(w))) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            // Non-edges to already mapped nodes must stay non-edges.
            for (std::size_t u = 0; u < v && ok; ++u) {
                if (!a.has_edge(static_cast<NodeId>(u), static_cast<NodeId>(v)) &&
                    b.has_edge(map_ab[u], static_cast<NodeId>(w))) {
                    ok = false;
                }
            }
            if (!ok) continue;
            map_ab[v] = static_cast<NodeId>(w);
            used[w] = true;
            if (extend(v + 1)) return true;
            used[w] = false;
        }
        return false;
    }
};

} // namespace

bool brute_force_isomorphic(const Graph& a, const Graph& b) {
    if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges()) return false;
    IsoSearch s{a, b, std::vector<NodeId>(a.num_nodes()), std::vector<bool>(b.num_nodes(), false)};
    return s.extend(0);
}

} // namespace gmn
