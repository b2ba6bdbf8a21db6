#include "gmn/encoder.hpp"

#include <map>

#include "gmn/errors.hpp"
#include "gmn/init.hpp"

namespace gmn {

EncoderKind parse_encoder_kind(const std::string& s) {
    if (s == "mpnn") return EncoderKind::mpnn;
    if (s == "rwf") return EncoderKind::rwf;
    throw ValidationError("unknown encoder '" + s + "' (expected mpnn or rwf)");
}

std::string to_string(EncoderKind k) { return k == EncoderKind::mpnn ? "mpnn" : "rwf"; }

std::size_t walk_feature_width(const Graph& g, std::size_t window) {
    const std::size_t edge_dim = g.has_edge_features() ? static_cast<std::size_t>(g.edge_features().cols()) : 0;
    return g.feature_dim() + edge_dim + 2 * (window - 1);
}

WalkFeatures build_walk_features(const Graph& g, const Walk& walk, std::size_t window) {
    if (walk.empty()) throw ValidationError("build_walk_features: empty walk");
    if (window == 0) throw ValidationError("build_walk_features: window must be >= 1");
    const std::size_t dx = g.feature_dim();
    const std::size_t de = g.has_edge_features() ? static_cast<std::size_t>(g.edge_features().cols()) : 0;
    const std::size_t flags = window - 1;
    WalkFeatures f;
    f.window = window;
    f.rows = Matrix::Zero(static_cast<Eigen::Index>(walk.size()), static_cast<Eigen::Index>(dx + de + 2 * flags));
    for (std::size_t t = 0; t < walk.size(); ++t) {
        const NodeId v = walk[t];
        if (v >= g.num_nodes()) throw ValidationError("build_walk_features: node out of range");
        const auto r = static_cast<Eigen::Index>(t);
        f.rows.row(r).head(static_cast<Eigen::Index>(dx)) = g.node_features().row(v);
        if (t > 0) {
            const NodeId prev = walk[t - 1];
            const auto e = g.edge_index(prev, v);
            if (!e && !(prev == v && g.degree(v) == 0)) {
                throw ValidationError("build_walk_features: step " + std::to_string(t) + " (" + std::to_string(prev) +
                                      " -> " + std::to_string(v) + ") is not an edge");
            }
            if (e && de > 0) {
                f.rows.row(r).segment(static_cast<Eigen::Index>(dx), static_cast<Eigen::Index>(de)) =
                    g.edge_features().row(static_cast<Eigen::Index>(*e));
            }
        }
        for (std::size_t off = 1; off <= flags && off <= t; ++off) {
            const NodeId earlier = walk[t - off];
            const auto col = static_cast<Eigen::Index>(dx + de + off - 1);
            f.rows(r, col) = earlier == v ? 1.0 : 0.0;
            f.rows(r, col + static_cast<Eigen::Index>(flags)) = g.has_edge(earlier, v) ? 1.0 : 0.0;
        }
    }
    return f;
}

Matrix walk_im2col(const WalkFeatures& f) {
    const Eigen::Index steps = f.rows.rows();
    const Eigen::Index width = f.rows.cols();
    const auto w = static_cast<Eigen::Index>(f.window);
    Matrix out = Matrix::Zero(steps, w * width);
    for (Eigen::Index t = 0; t < steps; ++t)
        for (Eigen::Index k = 0; k < w && k <= t; ++k) out.row(t).segment(k * width, width) = f.rows.row(t - k);
    return out;
}

// ---- message passing ------------------------------------------------------------

namespace {

std::shared_ptr<SparseMatrix> mean_adjacency(const Graph& g, std::size_t offset, std::vector<Triplet>& trips) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        const auto nb = g.neighbors(static_cast<NodeId>(v));
        if (nb.empty()) continue;
        const double w = 1.0 / static_cast<double>(nb.size());
        for (NodeId u : nb) {
            trips.emplace_back(static_cast<int>(offset + v), static_cast<int>(offset + u), w);
        }
    }
    return nullptr;
}

std::shared_ptr<const SparseMatrix> build_sparse(Eigen::Index rows, Eigen::Index cols, const std::vector<Triplet>& t) {
    auto s = std::make_shared<SparseMatrix>(rows, cols);
    s->setFromTriplets(t.begin(), t.end());
    return s;
}

} // namespace

MessagePassingBatch message_passing_batch(const Graph& g) {
    std::vector<Triplet> trips;
    mean_adjacency(g, 0, trips);
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    return {g.node_features(), build_sparse(n, n, trips), nullptr};
}

MessagePassingBatch token_subgraph_batch(const Graph& g, std::span<const TokenSequence> sequences) {
    std::size_t total_nodes = 0, total_tokens = 0;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq.tokens) total_nodes += tok.visited.size();
        total_tokens += seq.tokens.size();
    }
    MessagePassingBatch batch;
    batch.features.resize(static_cast<Eigen::Index>(total_nodes), static_cast<Eigen::Index>(g.feature_dim()));
    std::vector<Triplet> adj, pool;
    std::size_t offset = 0, token_row = 0;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq.tokens) {
            auto sub = induce_subgraph(g, tok.visited);
            batch.features.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(tok.visited.size())) =
                sub.graph.node_features();
            mean_adjacency(sub.graph, offset, adj);
            const double w = 1.0 / static_cast<double>(tok.visited.size());
            for (std::size_t i = 0; i < tok.visited.size(); ++i) {
                pool.emplace_back(static_cast<int>(token_row), static_cast<int>(offset + i), w);
            }
            offset += tok.visited.size();
            ++token_row;
        }
    }
    const auto n = static_cast<Eigen::Index>(total_nodes);
    batch.mean_adjacency = build_sparse(n, n, adj);
    batch.pool = build_sparse(static_cast<Eigen::Index>(total_tokens), n, pool);
    return batch;
}

ad::Var message_passing(ad::Tape& tape, const MessagePassingBatch& batch,
                        std::span<const MessagePassingLayerVars> layers, ad::Activation act) {
    if (layers.empty()) throw ValidationError("message_passing needs at least one layer");
    ad::Var h = tape.constant(batch.features);
    for (const auto& layer : layers) {
        if (h.cols() != layer.W_self.cols() || h.cols() != layer.W_nbr.cols()) {
            throw ValidationError("message_passing: feature width " + std::to_string(h.cols()) +
                                  " does not match weights (" + std::to_string(layer.W_self.cols()) + ")");
        }
        ad::Var self = ad::linear(h, layer.W_self);
        ad::Var nbr = ad::linear(ad::spmm(batch.mean_adjacency, h), layer.W_nbr);
        h = ad::activate(ad::add_row(ad::add(self, nbr), layer.bias), act);
    }
    if (batch.pool) h = ad::spmm(batch.pool, h);
    return h;
}

// ---- walk encoder -----------------------------------------------------------------

RwfBatch rwf_weighted_batch(const Graph& g, const std::vector<std::vector<Walk>>& token_walks,
                            const std::vector<std::vector<double>>& walk_weights, std::size_t window) {
    const std::size_t width = walk_feature_width(g, window);
    std::size_t total_steps = 0;
    for (const auto& walks : token_walks)
        for (const auto& w : walks) total_steps += w.size();
    RwfBatch batch;
    batch.im2col.resize(static_cast<Eigen::Index>(total_steps), static_cast<Eigen::Index>(window * width));
    std::vector<Triplet> pool;
    std::size_t row = 0;
    for (std::size_t tok = 0; tok < token_walks.size(); ++tok) {
        for (std::size_t i = 0; i < token_walks[tok].size(); ++i) {
            const auto& walk = token_walks[tok][i];
            const Matrix cols = walk_im2col(build_walk_features(g, walk, window));
            batch.im2col.middleRows(static_cast<Eigen::Index>(row), cols.rows()) = cols;
            const double w = walk_weights[tok][i] / static_cast<double>(walk.size());
            for (std::size_t s = 0; s < walk.size(); ++s) {
                pool.emplace_back(static_cast<int>(tok), static_cast<int>(row + s), w);
            }
            row += walk.size();
        }
    }
    batch.pool = build_sparse(static_cast<Eigen::Index>(token_walks.size()), static_cast<Eigen::Index>(total_steps), pool);
    return batch;
}

RwfBatch rwf_token_batch(const Graph& g, std::span<const TokenSequence> sequences, std::size_t window) {
    // Identical walks collapse into one weighted entry.
    std::vector<std::vector<Walk>> walks;
    std::vector<std::vector<double>> weights;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq.tokens) {
            if (tok.walks.empty()) throw ValidationError("rwf: token without walks");
            std::map<Walk, std::size_t> counts;
            for (const auto& w : tok.walks) ++counts[w];
            auto& ws = walks.emplace_back();
            auto& wt = weights.emplace_back();
            for (const auto& [w, c] : counts) {
                ws.push_back(w);
                wt.push_back(static_cast<double>(c) / static_cast<double>(tok.walks.size()));
            }
        }
    }
    return rwf_weighted_batch(g, walks, weights, window);
}

ad::Var rwf_encode(ad::Tape& tape, const RwfBatch& batch, const RwfVars& w, ad::Activation act) {
    if (batch.im2col.cols() != w.conv.cols()) {
        throw ValidationError("rwf: walk feature width " + std::to_string(batch.im2col.cols()) +
                              " does not match conv weights (" + std::to_string(w.conv.cols()) + ")");
    }
    ad::Var x = tape.constant(batch.im2col);
    ad::Var h = ad::activate(ad::add_row(ad::linear(x, w.conv), w.conv_bias), act);
    h = ad::activate(ad::add_row(ad::linear(h, w.mix), w.mix_bias), act);
    return ad::spmm(batch.pool, h);
}

// ---- standalone -----------------------------------------------------------------

TokenVector encode_mpnn(const Graph& sub, std::size_t rounds, const MpnnWeights& weights) {
    if (sub.num_nodes() == 0) throw ValidationError("encode_mpnn: empty subgraph");
    if (rounds == 0 || rounds > weights.layers.size()) {
        throw ValidationError("encode_mpnn: rounds must lie in [1, " + std::to_string(weights.layers.size()) + "]");
    }
    ad::Tape tape;
    std::vector<MessagePassingLayerVars> layers;
    for (std::size_t r = 0; r < rounds; ++r) {
        const auto& l = weights.layers[r];
        layers.push_back({tape.constant(l.W_self), tape.constant(l.W_nbr), tape.constant(l.bias)});
    }
    auto batch = message_passing_batch(sub);
    std::vector<Triplet> pool;
    for (std::size_t v = 0; v < sub.num_nodes(); ++v)
        pool.emplace_back(0, static_cast<int>(v), 1.0 / static_cast<double>(sub.num_nodes()));
    batch.pool = build_sparse(1, static_cast<Eigen::Index>(sub.num_nodes()), pool);
    return message_passing(tape, batch, layers, weights.activation).value().row(0);
}

TokenVector encode_rwf(std::span<const WalkFeatures> walks, const RwfWeights& weights) {
    if (walks.empty()) throw ValidationError("encode_rwf: empty walk list");
    std::size_t steps = 0;
    for (const auto& w : walks) {
        if (w.window != weights.window) throw ValidationError("encode_rwf: window mismatch");
        steps += static_cast<std::size_t>(w.rows.rows());
    }
    RwfBatch batch;
    batch.im2col.resize(static_cast<Eigen::Index>(steps), walks.front().rows.cols() * static_cast<Eigen::Index>(weights.window));
    std::vector<Triplet> pool;
    std::size_t row = 0;
    for (const auto& w : walks) {
        if (w.rows.cols() != walks.front().rows.cols()) throw ValidationError("encode_rwf: feature width mismatch");
        batch.im2col.middleRows(static_cast<Eigen::Index>(row), w.rows.rows()) = walk_im2col(w);
        const double weight = 1.0 / (static_cast<double>(walks.size()) * static_cast<double>(w.rows.rows()));
        for (Eigen::Index s = 0; s < w.rows.rows(); ++s) pool.emplace_back(0, static_cast<int>(row + s), weight);
        row += static_cast<std::size_t>(w.rows.rows());
    }
    batch.pool = build_sparse(1, static_cast<Eigen::Index>(steps), pool);
    ad::Tape tape;
    RwfVars vars{tape.constant(weights.conv), tape.constant(weights.conv_bias), tape.constant(weights.mix),
                 tape.constant(weights.mix_bias)};
    return rwf_encode(tape, batch, vars, weights.activation).value().row(0);
}

MpnnWeights init_mpnn_weights(std::size_t in_dim, std::size_t d_model, std::size_t rounds, std::uint64_t seed) {
    Rng rng(seed);
    MpnnWeights w;
    for (std::size_t r = 0; r < rounds; ++r) {
        const auto in = static_cast<Eigen::Index>(r == 0 ? in_dim : d_model);
        const auto out = static_cast<Eigen::Index>(d_model);
        w.layers.push_back({uniform_init(out, in, in, rng), uniform_init(out, in, in, rng), Matrix::Zero(1, out)});
    }
    return w;
}

RwfWeights init_rwf_weights(std::size_t feature_width, std::size_t d_model, std::size_t window, std::uint64_t seed) {
    Rng rng(seed);
    RwfWeights w;
    w.window = window;
    const auto fan = static_cast<Eigen::Index>(feature_width * window);
    const auto d = static_cast<Eigen::Index>(d_model);
    w.conv = uniform_init(d, fan, fan, rng);
    w.conv_bias = uniform_init(1, d, fan, rng);
    w.mix = uniform_init(d, d, d, rng);
    w.mix_bias = uniform_init(1, d, d, rng);
    return w;
}

} // namespace gmn
