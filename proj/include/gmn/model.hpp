#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gmn/autodiff.hpp"
#include "gmn/config.hpp"
#include "gmn/encoder.hpp"
#include "gmn/rng.hpp"
#include "gmn/tokenizer.hpp"

namespace gmn {

/// Names of one directional Mamba module's tensors inside a ParamMap.
/// Shapes (D = d_model, E = expansion * D, N = d_state, k = conv width):
///   ln_gamma, ln_beta 1xD; W_in ExD; conv Exk; conv_bias 1xE;
///   W_B, W_C NxE; W_delta ExE; dt_bias 1xE; A_log ExN (A = -exp(A_log));
///   W_gate ExD; W_outproj DxE.
struct MambaBlockWeights {
    std::string prefix;
    std::string name(const char* field) const { return prefix + "." + field; }
};

/// Two directional blocks plus W_out (DxD). With tie_directions the backward
/// block reads the forward block's tensors.
struct BiMambaWeights {
    std::string prefix;
    bool tie_directions = false;
    MambaBlockWeights forward() const { return {prefix + ".fwd"}; }
    MambaBlockWeights backward() const { return {prefix + (tie_directions ? ".fwd" : ".bwd")}; }
    std::string w_out() const { return prefix + ".W_out"; }
};

struct MambaDims {
    std::size_t d_model = 16;
    std::size_t d_state = 16;
    std::size_t conv_width = 4;
    std::size_t expansion = 2;
    std::size_t d_inner() const { return expansion * d_model; }
};

void init_mamba_block(ad::ParamMap& params, const MambaBlockWeights& w, const MambaDims& dims, Rng& rng);
void init_bimamba(ad::ParamMap& params, const BiMambaWeights& w, const MambaDims& dims, Rng& rng);

/// x is B*L x D (B stacked sequences of length L).
ad::Var mamba_block(ad::Tape& tape, ad::Var x, const ad::ParamMap& params, const MambaBlockWeights& w,
                    std::size_t L);
ad::Var bimamba(ad::Tape& tape, ad::Var x, const ad::ParamMap& params, const BiMambaWeights& w, std::size_t L);
/// x <- x + bimamba(x) per layer, then a LayerNorm named `norm_prefix`.
ad::Var bimamba_stack(ad::Tape& tape, ad::Var x, const ad::ParamMap& params,
                      const std::vector<BiMambaWeights>& layers, const std::string& norm_prefix, std::size_t L);

struct GMNModel {
    TrainConfig config;
    std::size_t in_dim = 0;   // node feature width after PE concatenation
    std::size_t out_dim = 0;  // classes, or 1 for regression
    bool tie_directions = false;
    ad::ParamMap params;

    std::vector<BiMambaWeights> token_layers() const;
    std::vector<BiMambaWeights> node_layers() const;
    bool has_mpnn() const { return config.mpnn_augment; }
    MambaDims dims() const { return {config.d_model, config.d_state, config.conv_width, config.expansion}; }
};

/// Input width of the walk-feature encoder for a graph of feature width in_dim.
std::size_t rwf_input_width(std::size_t in_dim, std::size_t edge_dim, std::size_t window);

GMNModel init_model(const TrainConfig& cfg, std::size_t in_dim, std::size_t edge_dim, std::size_t out_dim,
                    bool tie_directions = false);

/// Frozen per-graph inputs: features with PE attached, ordering, tokens and
/// the constant encoder batches built from them.
struct PreparedGraph {
    Graph graph; // node features = X | P
    NodeOrdering ordering;
    std::vector<TokenSequence> sequences; // empty when m = 0
    std::optional<RwfBatch> rwf;
    std::optional<MessagePassingBatch> token_subgraphs;
    std::optional<MessagePassingBatch> whole_graph;
};

/// Computes PE and ordering, tokenizes (unless `tokens` is given) and builds batches.
PreparedGraph prepare_graph(const Graph& g, const TrainConfig& cfg,
                            const std::vector<TokenSequence>* tokens = nullptr);

/// Checks sequence count, lengths, walk counts and the length-0-last rule.
void validate_tokens(const Graph& g, const std::vector<TokenSequence>& sequences, const SamplingParams& p);

/// n x d_model node encodings in node-id order.
ad::Var gmn_forward(ad::Tape& tape, const GMNModel& model, const PreparedGraph& pg);
Matrix gmn_forward(const GMNModel& model, const PreparedGraph& pg);

/// Token encodings for every node: n*L x d_model, node-major.
ad::Var encode_tokens(ad::Tape& tape, const GMNModel& model, const PreparedGraph& pg);

/// Message passing over the whole graph without pooling (n x d_model).
ad::Var mpnn_augment(ad::Tape& tape, const ad::ParamMap& params, const std::string& prefix,
                     const MessagePassingBatch& batch, std::size_t rounds, ad::Activation act);

/// node_class: per-node logits (n x C). Graph tasks: mean over nodes then
/// the linear head (1 x C).
ad::Var readout(ad::Tape& tape, ad::Var encodings, TaskKind task, const ad::ParamMap& params);

// ---- checkpoint ----------------------------------------------------------------

nlohmann::json model_to_json(const GMNModel& model);
GMNModel model_from_json(const nlohmann::json& doc);
void save_checkpoint(const GMNModel& model, const std::filesystem::path& path);
GMNModel load_checkpoint(const std::filesystem::path& path);

} // namespace gmn
