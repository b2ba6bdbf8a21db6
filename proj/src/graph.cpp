#include "gmn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "gmn/errors.hpp"

namespace gmn {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix node_features,
             Matrix edge_features, bool allow_self_loops)
    : num_nodes_(num_nodes), allow_self_loops_(allow_self_loops) {
    if (edge_features.rows() != 0 && static_cast<std::size_t>(edge_features.rows()) != edges.size()) {
        throw ValidationError("edge_features has " + std::to_string(edge_features.rows()) +
                              " rows but there are " + std::to_string(edges.size()) + " edges");
    }
    // Normalize to u <= v while keeping edge-feature rows attached.
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto& [u, v] = edges[i];
        if (u >= num_nodes || v >= num_nodes) {
            throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                  ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (u == v && !allow_self_loops) {
            throw ValidationError("self loop on node " + std::to_string(u));
        }
        if (u > v) std::swap(u, v);
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (edges[order[i]] == edges[order[i - 1]]) {
            throw ValidationError("duplicate edge (" + std::to_string(edges[order[i]].first) + ", " +
                                  std::to_string(edges[order[i]].second) + ")");
        }
    }
    edges_.reserve(edges.size());
    for (auto i : order) edges_.push_back(edges[i]);
    if (edge_features.rows() != 0) {
        edge_features_.resize(edge_features.rows(), edge_features.cols());
        for (std::size_t i = 0; i < order.size(); ++i) edge_features_.row(i) = edge_features.row(order[i]);
    }

    if (node_features.size() == 0) {
        node_features_ = Matrix::Ones(num_nodes, 1);
    } else {
        if (static_cast<std::size_t>(node_features.rows()) != num_nodes) {
            throw ValidationError("node_features has " + std::to_string(node_features.rows()) +
                                  " rows, expected " + std::to_string(num_nodes));
        }
        node_features_ = std::move(node_features);
    }

    std::vector<std::size_t> deg(num_nodes, 0);
    for (auto [u, v] : edges_) {
        ++deg[u];
        if (u != v) ++deg[v];
    }
    offsets_.assign(num_nodes + 1, 0);
    for (std::size_t v = 0; v < num_nodes; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
    adjacency_.resize(offsets_[num_nodes]);
    adjacency_edge_.resize(offsets_[num_nodes]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        auto [u, v] = edges_[e];
        adjacency_[fill[u]] = v;
        adjacency_edge_[fill[u]++] = e;
        if (u != v) {
            adjacency_[fill[v]] = u;
            adjacency_edge_[fill[v]++] = e;
        }
    }
    for (std::size_t v = 0; v < num_nodes; ++v) {
        const auto b = offsets_[v];
        const auto e = offsets_[v + 1];
        std::vector<std::pair<NodeId, std::size_t>> tmp;
        tmp.reserve(e - b);
        for (auto i = b; i < e; ++i) tmp.emplace_back(adjacency_[i], adjacency_edge_[i]);
        std::sort(tmp.begin(), tmp.end());
        for (auto i = b; i < e; ++i) std::tie(adjacency_[i], adjacency_edge_[i]) = tmp[i - b];
    }
}

bool Graph::has_edge(NodeId u, NodeId v) const { return edge_index(u, v).has_value(); }

std::optional<std::size_t> Graph::edge_index(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    auto it = std::lower_bound(nb.begin(), nb.end(), v);
    if (it == nb.end() || *it != v) return std::nullopt;
    return adjacency_edge_[offsets_[u] + static_cast<std::size_t>(it - nb.begin())];
}

void Graph::set_node_labels(std::vector<double> labels) {
    if (labels.size() != num_nodes_) {
        throw ValidationError("got " + std::to_string(labels.size()) + " node labels for " +
                              std::to_string(num_nodes_) + " nodes");
    }
    node_labels_ = std::move(labels);
}

Graph Graph::with_node_features(Matrix features) const {
    if (static_cast<std::size_t>(features.rows()) != num_nodes_) {
        throw ValidationError("feature row count mismatch");
    }
    Graph out = *this;
    out.node_features_ = std::move(features);
    return out;
}

Graph Graph::permuted(std::span<const NodeId> perm) const {
    if (perm.size() != num_nodes_) throw ValidationError("permutation size mismatch");
    std::vector<Edge> edges;
    edges.reserve(edges_.size());
    for (auto [u, v] : edges_) edges.emplace_back(perm[u], perm[v]);
    Matrix x(node_features_.rows(), node_features_.cols());
    for (std::size_t v = 0; v < num_nodes_; ++v) x.row(perm[v]) = node_features_.row(v);
    Graph out(num_nodes_, std::move(edges), std::move(x), edge_features_, allow_self_loops_);
    if (node_labels_) {
        std::vector<double> labels(num_nodes_);
        for (std::size_t v = 0; v < num_nodes_; ++v) labels[perm[v]] = (*node_labels_)[v];
        out.node_labels_ = std::move(labels);
    }
    out.graph_label_ = graph_label_;
    return out;
}

namespace {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ULL;
        }
    }
    template <typename T>
    void value(T v) { bytes(&v, sizeof v); }
};

} // namespace

std::string Graph::content_hash() const {
    Fnv1a f;
    f.value<std::uint64_t>(num_nodes_);
    for (auto [u, v] : edges_) {
        f.value<std::uint32_t>(u);
        f.value<std::uint32_t>(v);
    }
    f.value<std::uint64_t>(node_features_.cols());
    f.bytes(node_features_.data(), sizeof(double) * node_features_.size());
    f.value<std::uint64_t>(edge_features_.cols());
    f.bytes(edge_features_.data(), sizeof(double) * edge_features_.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
    return buf;
}

bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.node_features_ == b.node_features_ &&
           a.edge_features_ == b.edge_features_;
}

// ---- orderings and generators that need no IO ----------------------------

NodeOrdering identity_ordering(const Graph& g) {
    NodeOrdering o;
    o.mode = OrderingMode::identity;
    o.permutation.resize(g.num_nodes());
    for (std::size_t v = 0; v < g.num_nodes(); ++v) o.permutation[v] = static_cast<NodeId>(v);
    return o;
}

NodeOrdering degree_ordering(const Graph& g) {
    NodeOrdering o = identity_ordering(g);
    o.mode = OrderingMode::degree;
    std::stable_sort(o.permutation.begin(), o.permutation.end(),
                     [&](NodeId a, NodeId b) { return g.degree(a) > g.degree(b); });
    return o;
}

OrderingMode parse_ordering_mode(const std::string& s) {
    if (s == "degree") return OrderingMode::degree;
    if (s == "ppr") return OrderingMode::ppr;
    if (s == "identity") return OrderingMode::identity;
    throw ValidationError("unknown ordering '" + s + "' (expected degree, ppr or identity)");
}

std::string to_string(OrderingMode mode) {
    switch (mode) {
    case OrderingMode::degree: return "degree";
    case OrderingMode::ppr: return "ppr";
    case OrderingMode::identity: return "identity";
    }
    return "identity";
}

NodeOrdering make_ordering(const Graph& g, OrderingMode mode) {
    switch (mode) {
    case OrderingMode::degree: return degree_ordering(g);
    case OrderingMode::ppr: return ppr_ordering(g);
    case OrderingMode::identity: return identity_ordering(g);
    }
    return identity_ordering(g);
}

PageRankResult pagerank(const Graph& g, double damping, double tol, std::size_t max_iters) {
    if (!(damping > 0.0 && damping < 1.0)) throw ValidationError("damping must lie in (0, 1)");
    const std::size_t n = g.num_nodes();
    PageRankResult r;
    if (n == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> x(n, inv_n), next(n);
    for (std::size_t it = 1; it <= max_iters; ++it) {
        double sink = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (g.degree(static_cast<NodeId>(v)) == 0) sink += x[v];
        }
        const double base = (1.0 - damping) * inv_n + damping * sink * inv_n;
        for (std::size_t v = 0; v < n; ++v) {
            double acc = 0.0;
            for (NodeId u : g.neighbors(static_cast<NodeId>(v))) {
                acc += x[u] / static_cast<double>(g.degree(u));
            }
            next[v] = base + damping * acc;
        }
        double diff = 0.0;
        for (std::size_t v = 0; v < n; ++v) diff = std::max(diff, std::abs(next[v] - x[v]));
        x.swap(next);
        r.iterations = it;
        r.residual = diff;
        if (diff < tol) {
            double total = 0.0;
            for (double s : x) total += s;
            for (double& s : x) s /= total;
            r.scores = std::move(x);
            return r;
        }
    }
    throw ConvergenceError("pagerank did not converge in " + std::to_string(max_iters) +
                               " iterations (residual " + std::to_string(r.residual) + ")",
                           r.residual);
}

NodeOrdering ppr_ordering(const Graph& g, double damping, double tol, std::size_t max_iters) {
    auto pr = pagerank(g, damping, tol, max_iters);
    NodeOrdering o = identity_ordering(g);
    o.mode = OrderingMode::ppr;
    // Scores of symmetric nodes can differ in the last bits; quantize so
    // those count as ties and fall back to id order.
    std::vector<double> key(pr.scores.size());
    for (std::size_t v = 0; v < key.size(); ++v) key[v] = std::round(pr.scores[v] * 1e12);
    std::stable_sort(o.permutation.begin(), o.permutation.end(),
                     [&](NodeId a, NodeId b) { return key[a] > key[b]; });
    return o;
}

} // namespace gmn
