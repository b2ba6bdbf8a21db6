#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gmn/autodiff.hpp"
#include "gmn/graph.hpp"
#include "gmn/tokenizer.hpp"

namespace gmn {

using TokenVector = Eigen::RowVectorXd;

enum class EncoderKind { mpnn, rwf };
EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind k);

// ---- walk features ----------------------------------------------------------

/// One row per walk step: [node features | edge features (when the graph has
/// them) | identity flags for offsets 1..w-1 | adjacency flags for offsets 1..w-1].
struct WalkFeatures {
    Matrix rows;
    std::size_t window = 1;
};

/// Width of a walk-feature row for the given graph and window.
std::size_t walk_feature_width(const Graph& g, std::size_t window);

/// Throws ValidationError if consecutive nodes are neither adjacent nor a
/// repeat at a degree-0 node.
WalkFeatures build_walk_features(const Graph& g, const Walk& walk, std::size_t window);

/// Causal im2col of a walk-feature matrix: row t = [F_t | F_{t-1} | ... | F_{t-w+1}],
/// zero where the offset runs past the walk start.
Matrix walk_im2col(const WalkFeatures& f);

// ---- weights ------------------------------------------------------------------

struct MessagePassingLayerWeights {
    Matrix W_self; // out x in
    Matrix W_nbr;  // out x in
    Matrix bias;   // 1 x out
};

struct MpnnWeights {
    std::vector<MessagePassingLayerWeights> layers;
    ad::Activation activation = ad::Activation::silu;
};

/// Walk encoder: conv (kernel = window) + act, pointwise mix + act, mean pool.
struct RwfWeights {
    std::size_t window = 3;
    Matrix conv;      // d_model x (window * feature width)
    Matrix conv_bias; // 1 x d_model
    Matrix mix;       // d_model x d_model
    Matrix mix_bias;  // 1 x d_model
    ad::Activation activation = ad::Activation::silu;
};

// ---- tape-level building blocks (shared by the model) -----------------------

struct MessagePassingLayerVars {
    ad::Var W_self, W_nbr, bias;
};

/// Constant structure for message passing over one graph or a block-diagonal
/// union of token subgraphs. `pool` (optional) maps node rows to token rows.
struct MessagePassingBatch {
    Matrix features;
    std::shared_ptr<const SparseMatrix> mean_adjacency;
    std::shared_ptr<const SparseMatrix> pool;
};

MessagePassingBatch message_passing_batch(const Graph& g);
/// Block-diagonal union of G[visited] for every token, in sequence order.
MessagePassingBatch token_subgraph_batch(const Graph& g, std::span<const TokenSequence> sequences);

/// h <- act(h W_self^T + (mean_adj h) W_nbr^T + b) per layer, then pool if set.
ad::Var message_passing(ad::Tape& tape, const MessagePassingBatch& batch,
                        std::span<const MessagePassingLayerVars> layers, ad::Activation act);

struct RwfBatch {
    Matrix im2col;                             // one row per walk step
    std::shared_ptr<const SparseMatrix> pool;  // tokens x steps
};

struct RwfVars {
    ad::Var conv, conv_bias, mix, mix_bias;
};

/// All walks of all tokens, pooled with weight 1 / (walks * steps) per row.
RwfBatch rwf_token_batch(const Graph& g, std::span<const TokenSequence> sequences, std::size_t window);

/// Pool rows from explicit per-walk weights: each walk's steps share
/// `walk_weights[i] / steps`. Used for expectation-style signatures.
RwfBatch rwf_weighted_batch(const Graph& g, const std::vector<std::vector<Walk>>& token_walks,
                            const std::vector<std::vector<double>>& walk_weights, std::size_t window);

ad::Var rwf_encode(ad::Tape& tape, const RwfBatch& batch, const RwfVars& w, ad::Activation act);

// ---- standalone encoders -------------------------------------------------------

/// Mean over nodes of the final states after `rounds` message-passing layers.
TokenVector encode_mpnn(const Graph& sub, std::size_t rounds, const MpnnWeights& weights);

/// Mean over walks of the pooled walk encodings.
TokenVector encode_rwf(std::span<const WalkFeatures> walks, const RwfWeights& weights);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
MpnnWeights init_mpnn_weights(std::size_t in_dim, std::size_t d_model, std::size_t rounds, std::uint64_t seed);
RwfWeights init_rwf_weights(std::size_t feature_width, std::size_t d_model, std::size_t window, std::uint64_t seed);

} // namespace gmn
