#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmn/tensor.hpp"

namespace gmn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Immutable undirected graph with sorted neighbor lists and per-node features.
///
/// Edges are stored once each with u < v (u == v only when self loops are
/// allowed). Edge feature row i belongs to edges()[i].
class Graph {
public:
    Graph() = default;

    /// Validates and builds. Throws ValidationError on out-of-range endpoints,
    /// duplicate edges, self loops (unless allowed) or feature shape mismatch.
    /// An empty feature matrix is replaced by an n x 1 matrix of ones.
    Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix node_features = {},
          Matrix edge_features = {}, bool allow_self_loops = false);

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
    }
    std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
    bool has_edge(NodeId u, NodeId v) const;
    /// Index into edges() of {u, v}, or nullopt.
    std::optional<std::size_t> edge_index(NodeId u, NodeId v) const;

    const Matrix& node_features() const { return node_features_; }
    std::size_t feature_dim() const { return static_cast<std::size_t>(node_features_.cols()); }
    const Matrix& edge_features() const { return edge_features_; }
    bool has_edge_features() const { return edge_features_.rows() > 0; }
    bool allows_self_loops() const { return allow_self_loops_; }

    const std::optional<std::vector<double>>& node_labels() const { return node_labels_; }
    const std::optional<double>& graph_label() const { return graph_label_; }
    void set_node_labels(std::vector<double> labels);
    void set_graph_label(double label) { graph_label_ = label; }

    /// Copy with replaced node features (same row count required).
    Graph with_node_features(Matrix features) const;

    /// Relabels node v to perm[v]; features, edge features and labels follow.
    Graph permuted(std::span<const NodeId> perm) const;

    /// FNV-1a over structure and features; used as a cache key.
    std::string content_hash() const;

    friend bool operator==(const Graph& a, const Graph& b);

private:
    std::size_t num_nodes_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> adjacency_;
    std::vector<std::size_t> adjacency_edge_;
    Matrix node_features_;
    Matrix edge_features_;
    bool allow_self_loops_ = false;
    std::optional<std::vector<double>> node_labels_;
    std::optional<double> graph_label_;
};

enum class GraphFormat { json, edgelist };

Graph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const Graph& g);
Graph parse_edgelist(const std::string& text);
/// Throws IoError when the file cannot be read, ValidationError on bad content.
Graph load_graph(const std::filesystem::path& path, GraphFormat format);

/// A dataset file is either a single graph object or {"graphs": [...]}.
std::vector<Graph> load_dataset(const std::filesystem::path& path);

// ---- neighborhoods -------------------------------------------------------

/// BFS distances from v; unreachable nodes get SIZE_MAX.
std::vector<std::size_t> bfs_distances(const Graph& g, NodeId v);

/// {u : dist(u, v) <= k}, sorted ascending.
std::vector<NodeId> k_hop_neighborhood(const Graph& g, NodeId v, std::size_t k);

/// Graph induced on `nodes` (sorted, deduplicated internally). Local node i
/// corresponds to global node `global_ids[i]`.
struct InducedSubgraph {
    Graph graph;
    std::vector<NodeId> global_ids;
};
InducedSubgraph induce_subgraph(const Graph& g, std::span<const NodeId> nodes);

// ---- orderings -----------------------------------------------------------

enum class OrderingMode { degree, ppr, identity };

struct NodeOrdering {
    std::vector<NodeId> permutation;
    OrderingMode mode = OrderingMode::identity;
};

NodeOrdering identity_ordering(const Graph& g);
/// Descending degree, ascending id on ties.
NodeOrdering degree_ordering(const Graph& g);

struct PageRankResult {
    std::vector<double> scores;
    std::size_t iterations = 0;
    double residual = 0.0;
};
/// Global PageRank by power iteration with uniform teleport. Mass on
/// isolated nodes is spread uniformly. Throws ConvergenceError.
PageRankResult pagerank(const Graph& g, double damping = 0.85, double tol = 1e-10,
                        std::size_t max_iters = 1000);
NodeOrdering ppr_ordering(const Graph& g, double damping = 0.85, double tol = 1e-10,
                          std::size_t max_iters = 1000);
NodeOrdering make_ordering(const Graph& g, OrderingMode mode);

OrderingMode parse_ordering_mode(const std::string& s);
std::string to_string(OrderingMode mode);

// ---- 1-WL ----------------------------------------------------------------

struct WLColoring {
    std::vector<std::size_t> colors;
    std::size_t rounds = 0;
};

/// Color refinement from uniform colors. Each round maps
/// (old color, sorted neighbor colors) to the rank of that signature among
/// all distinct signatures, so ids do not depend on node numbering.
WLColoring wl_refine(const Graph& g, std::size_t max_rounds);

/// Sorted class sizes (the relabeling-invariant part of a coloring).
std::vector<std::size_t> color_histogram(const WLColoring& c);

/// 1-WL test on the disjoint union: true when both graphs end with identical
/// color-count histograms over a shared color space.
bool wl_indistinguishable(const Graph& a, const Graph& b, std::size_t max_rounds = 64);

/// Disjoint union; b's nodes are shifted by a.num_nodes().
Graph disjoint_union(const Graph& a, const Graph& b);

/// Exact isomorphism test by backtracking. Intended for small graphs.
bool brute_force_isomorphic(const Graph& a, const Graph& b);

// ---- generators used by tests, bench and fixtures -------------------------

Graph path_graph(std::size_t n);
Graph cycle_graph(std::size_t n);
Graph complete_graph(std::size_t n);
Graph star_graph(std::size_t leaves);
Graph complete_bipartite(std::size_t a, std::size_t b);
Graph triangular_prism();
/// Random simple graph with degree capped at max_degree.
Graph random_bounded_degree_graph(std::size_t n, std::size_t max_degree, std::size_t target_edges,
                                  std::uint64_t seed);
/// Random simple d-regular graph (configuration model plus edge-switch repair).
Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed);
/// Uniform random permutation of [0, n).
std::vector<NodeId> random_permutation(std::size_t n, std::uint64_t seed);

} // namespace gmn
