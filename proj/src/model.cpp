#include "gmn/model.hpp"

#include <cmath>
#include <fstream>

#include "gmn/errors.hpp"
#include "gmn/init.hpp"
#include "gmn/posenc.hpp"
#include "gmn/ssm.hpp"

namespace gmn {

using ad::Var;

void init_mamba_block(ad::ParamMap& p, const MambaBlockWeights& w, const MambaDims& dims, Rng& rng) {
    const auto D = static_cast<Eigen::Index>(dims.d_model);
    const auto E = static_cast<Eigen::Index>(dims.d_inner());
    const auto N = static_cast<Eigen::Index>(dims.d_state);
    const auto k = static_cast<Eigen::Index>(dims.conv_width);
    p[w.name("ln_gamma")] = Matrix::Ones(1, D);
    p[w.name("ln_beta")] = Matrix::Zero(1, D);
    p[w.name("W_in")] = uniform_init(E, D, D, rng);
    p[w.name("conv")] = uniform_init(E, k, k, rng);
    p[w.name("conv_bias")] = Matrix::Zero(1, E);
    p[w.name("W_B")] = uniform_init(N, E, E, rng);
    p[w.name("W_C")] = uniform_init(N, E, E, rng);
    p[w.name("W_delta")] = uniform_init(E, E, E, rng);
    const auto ssm_params = ssm::default_params(dims.d_inner(), dims.d_state, rng.next());
    p[w.name("dt_bias")] = ssm_params.log_delta_bias.transpose();
    p[w.name("A_log")] = (-ssm_params.A.array()).log().matrix();
    p[w.name("W_gate")] = uniform_init(E, D, D, rng);
    p[w.name("W_outproj")] = uniform_init(D, E, E, rng);
}

void init_bimamba(ad::ParamMap& p, const BiMambaWeights& w, const MambaDims& dims, Rng& rng) {
    init_mamba_block(p, w.forward(), dims, rng);
    if (!w.tie_directions) init_mamba_block(p, w.backward(), dims, rng);
    const auto D = static_cast<Eigen::Index>(dims.d_model);
    p[w.w_out()] = uniform_init(D, D, D, rng);
}

Var mamba_block(ad::Tape& tape, Var x, const ad::ParamMap& params, const MambaBlockWeights& w, std::size_t L) {
    auto P = [&](const char* field) { return tape.param(w.name(field), params); };
    if (L == 0 || x.rows() % static_cast<Eigen::Index>(L) != 0) {
        throw ValidationError("mamba_block: " + std::to_string(x.rows()) + " rows is not a multiple of L=" +
                              std::to_string(L));
    }
    Var h = ad::layer_norm(x, P("ln_gamma"), P("ln_beta"));
    Var u = ad::linear(h, P("W_in"));
    u = ad::silu(ad::causal_conv(u, P("conv"), P("conv_bias"), L));
    Var Bm = ad::linear(u, P("W_B"));
    Var Cm = ad::linear(u, P("W_C"));
    Var delta = ad::softplus(ad::add_row(ad::linear(u, P("W_delta")), P("dt_bias")));
    Var A = ad::neg_exp(P("A_log"));
    Var y = ad::selective_scan(u, delta, A, Bm, Cm, L);
    Var gate = ad::silu(ad::linear(h, P("W_gate")));
    return ad::linear(ad::mul(y, gate), P("W_outproj"));
}

Var bimamba(ad::Tape& tape, Var x, const ad::ParamMap& params, const BiMambaWeights& w, std::size_t L) {
    Var yf = mamba_block(tape, x, params, w.forward(), L);
    Var yb = ad::reverse_rows(mamba_block(tape, ad::reverse_rows(x, L), params, w.backward(), L), L);
    return ad::linear(ad::add(yf, yb), tape.param(w.w_out(), params));
}

Var bimamba_stack(ad::Tape& tape, Var x, const ad::ParamMap& params, const std::vector<BiMambaWeights>& layers,
                  const std::string& norm_prefix, std::size_t L) {
    for (const auto& layer : layers) x = ad::add(x, bimamba(tape, x, params, layer, L));
    return ad::layer_norm(x, tape.param(norm_prefix + ".gamma", params), tape.param(norm_prefix + ".beta", params));
}

// ---- model -----------------------------------------------------------------------

std::vector<BiMambaWeights> GMNModel::token_layers() const {
    std::vector<BiMambaWeights> out;
    for (std::size_t i = 0; i < config.n_token_layers; ++i) out.push_back({"token." + std::to_string(i), tie_directions});
    return out;
}

std::vector<BiMambaWeights> GMNModel::node_layers() const {
    std::vector<BiMambaWeights> out;
    for (std::size_t i = 0; i < config.n_node_layers; ++i) out.push_back({"node." + std::to_string(i), tie_directions});
    return out;
}

std::size_t rwf_input_width(std::size_t in_dim, std::size_t edge_dim, std::size_t window) {
    return in_dim + edge_dim + 2 * (window - 1);
}

namespace {

void init_message_passing(ad::ParamMap& p, const std::string& prefix, std::size_t in_dim, std::size_t d,
                          std::size_t rounds, Rng& rng) {
    const auto w = init_mpnn_weights(in_dim, d, rounds, rng.next());
    for (std::size_t r = 0; r < rounds; ++r) {
        const std::string base = prefix + ".l" + std::to_string(r);
        p[base + ".W_self"] = w.layers[r].W_self;
        p[base + ".W_nbr"] = w.layers[r].W_nbr;
        p[base + ".bias"] = w.layers[r].bias;
    }
}

void init_norm(ad::ParamMap& p, const std::string& prefix, std::size_t d) {
    p[prefix + ".gamma"] = Matrix::Ones(1, static_cast<Eigen::Index>(d));
    p[prefix + ".beta"] = Matrix::Zero(1, static_cast<Eigen::Index>(d));
}

std::vector<MessagePassingLayerVars> mp_vars(ad::Tape& tape, const ad::ParamMap& params, const std::string& prefix,
                                             std::size_t rounds) {
    std::vector<MessagePassingLayerVars> out;
    for (std::size_t r = 0; r < rounds; ++r) {
        const std::string base = prefix + ".l" + std::to_string(r);
        out.push_back({tape.param(base + ".W_self", params), tape.param(base + ".W_nbr", params),
                       tape.param(base + ".bias", params)});
    }
    return out;
}

} // namespace

GMNModel init_model(const TrainConfig& cfg, std::size_t in_dim, std::size_t edge_dim, std::size_t out_dim,
                    bool tie_directions) {
    cfg.validate();
    if (in_dim == 0 || out_dim == 0) throw ValidationError("init_model: in_dim and out_dim must be >= 1");
    GMNModel model;
    model.config = cfg;
    model.in_dim = in_dim;
    model.out_dim = out_dim;
    model.tie_directions = tie_directions;
    auto& p = model.params;
    Rng rng(derive_seed(cfg.seed, 0x696e6974ULL));
    const auto D = static_cast<Eigen::Index>(cfg.d_model);

    if (cfg.m == 0) {
        p["embed.W"] = uniform_init(D, static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(in_dim), rng);
        p["embed.b"] = Matrix::Zero(1, D);
    } else if (cfg.encoder == EncoderKind::rwf) {
        const auto w = init_rwf_weights(rwf_input_width(in_dim, edge_dim, cfg.rwf_window), cfg.d_model,
                                        cfg.rwf_window, rng.next());
        p["enc.conv"] = w.conv;
        p["enc.conv_bias"] = w.conv_bias;
        p["enc.mix"] = w.mix;
        p["enc.mix_bias"] = w.mix_bias;
    } else {
        init_message_passing(p, "enc", in_dim, cfg.d_model, cfg.encoder_rounds, rng);
    }
    for (const auto& layer : model.token_layers()) init_bimamba(p, layer, model.dims(), rng);
    if (cfg.m > 0) init_norm(p, "token.norm", cfg.d_model);
    for (const auto& layer : model.node_layers()) init_bimamba(p, layer, model.dims(), rng);
    init_norm(p, "node.norm", cfg.d_model);
    if (cfg.mpnn_augment) init_message_passing(p, "psi", in_dim, cfg.d_model, cfg.mpnn_rounds, rng);
    p["head.W"] = uniform_init(static_cast<Eigen::Index>(out_dim), D, D, rng);
    p["head.b"] = Matrix::Zero(1, static_cast<Eigen::Index>(out_dim));
    return model;
}

void validate_tokens(const Graph& g, const std::vector<TokenSequence>& sequences, const SamplingParams& p) {
    if (sequences.size() != g.num_nodes()) {
        throw ValidationError("tokens cover " + std::to_string(sequences.size()) + " nodes, graph has " +
                              std::to_string(g.num_nodes()));
    }
    const std::size_t L = p.s * p.m + 1;
    for (std::size_t v = 0; v < sequences.size(); ++v) {
        const auto& seq = sequences[v];
        if (seq.origin != v) throw ValidationError("token sequence " + std::to_string(v) + " has the wrong origin");
        if (seq.tokens.size() != L) {
            throw ValidationError("node " + std::to_string(v) + " has " + std::to_string(seq.tokens.size()) +
                                  " tokens, expected " + std::to_string(L));
        }
        for (std::size_t i = 0; i < L; ++i) {
            const auto& tok = seq.tokens[i];
            if (tok.origin != v || tok.walks.size() != p.M || tok.length > p.m) {
                throw ValidationError("node " + std::to_string(v) + " token " + std::to_string(i) +
                                      " does not match the sampling parameters");
            }
            if ((tok.length == 0) != (i + 1 == L)) {
                throw ValidationError("node " + std::to_string(v) + ": the length-0 token must occupy the last slot");
            }
        }
    }
}

PreparedGraph prepare_graph(const Graph& g, const TrainConfig& cfg, const std::vector<TokenSequence>* tokens) {
    if (g.num_nodes() == 0) throw ValidationError("cannot run the model on an empty graph");
    PosEncoding pe = no_encoding(g);
    if (cfg.pe == PeMode::rwse) {
        pe = rwse(g, cfg.pe_dim);
    } else if (cfg.pe == PeMode::lappe) {
        // Small graphs have fewer than pe_dim usable eigenvectors; pad with zeros.
        const std::size_t usable = std::min(cfg.pe_dim, g.num_nodes() - 1);
        pe = PosEncoding{Matrix::Zero(g.num_nodes(), cfg.pe_dim), PeMode::lappe};
        if (usable > 0) pe.vectors.leftCols(usable) = lappe(g, usable).vectors;
    }
    PreparedGraph pg{concat_pe(g, pe), make_ordering(g, cfg.ordering), {}, {}, {}, {}};
    if (cfg.m > 0) {
        pg.sequences = tokens ? *tokens : tokenize_graph(g, cfg.sampling());
        validate_tokens(g, pg.sequences, cfg.sampling());
        if (cfg.encoder == EncoderKind::rwf) {
            pg.rwf = rwf_token_batch(pg.graph, pg.sequences, cfg.rwf_window);
        } else {
            pg.token_subgraphs = token_subgraph_batch(pg.graph, pg.sequences);
        }
    }
    if (cfg.mpnn_augment) pg.whole_graph = message_passing_batch(pg.graph);
    return pg;
}

Var encode_tokens(ad::Tape& tape, const GMNModel& model, const PreparedGraph& pg) {
    const auto& cfg = model.config;
    if (cfg.encoder == EncoderKind::rwf) {
        if (!pg.rwf) throw ValidationError("prepared graph lacks walk-feature batches");
        RwfVars vars{tape.param("enc.conv", model.params), tape.param("enc.conv_bias", model.params),
                     tape.param("enc.mix", model.params), tape.param("enc.mix_bias", model.params)};
        return rwf_encode(tape, *pg.rwf, vars, cfg.activation);
    }
    if (!pg.token_subgraphs) throw ValidationError("prepared graph lacks token subgraph batches");
    const auto layers = mp_vars(tape, model.params, "enc", cfg.encoder_rounds);
    return message_passing(tape, *pg.token_subgraphs, layers, cfg.activation);
}

Var mpnn_augment(ad::Tape& tape, const ad::ParamMap& params, const std::string& prefix,
                 const MessagePassingBatch& batch, std::size_t rounds, ad::Activation act) {
    MessagePassingBatch unpooled{batch.features, batch.mean_adjacency, nullptr};
    return message_passing(tape, unpooled, mp_vars(tape, params, prefix, rounds), act);
}

Var gmn_forward(ad::Tape& tape, const GMNModel& model, const PreparedGraph& pg) {
    const auto& cfg = model.config;
    const std::size_t n = pg.graph.num_nodes();
    if (pg.graph.feature_dim() != model.in_dim) {
        throw ValidationError("graph feature width " + std::to_string(pg.graph.feature_dim()) +
                              " does not match the model (" + std::to_string(model.in_dim) + ")");
    }
    Var h;
    if (cfg.m > 0) {
        const std::size_t L = cfg.s * cfg.m + 1;
        if (pg.sequences.size() != n) throw ValidationError("prepared graph has no tokens for m >= 1");
        Var tok = encode_tokens(tape, model, pg);
        tok = bimamba_stack(tape, tok, model.params, model.token_layers(), "token.norm", L);
        h = ad::last_rows(tok, L);
    } else {
        Var x = tape.constant(pg.graph.node_features());
        h = ad::add_row(ad::linear(x, tape.param("embed.W", model.params)), tape.param("embed.b", model.params));
    }
    const auto& perm = pg.ordering.permutation;
    if (perm.size() != n) throw ValidationError("ordering does not match the graph");
    std::vector<std::size_t> forward(perm.begin(), perm.end()), inverse(n);
    for (std::size_t i = 0; i < n; ++i) inverse[perm[i]] = i;
    h = ad::gather_rows(h, forward);
    h = bimamba_stack(tape, h, model.params, model.node_layers(), "node.norm", n);
    h = ad::gather_rows(h, inverse);
    if (cfg.mpnn_augment) {
        if (!pg.whole_graph) throw ValidationError("prepared graph lacks the message-passing batch");
        h = ad::add(h, mpnn_augment(tape, model.params, "psi", *pg.whole_graph, cfg.mpnn_rounds, cfg.activation));
    }
    return h;
}

Matrix gmn_forward(const GMNModel& model, const PreparedGraph& pg) {
    ad::Tape tape;
    return gmn_forward(tape, model, pg).value();
}

Var readout(ad::Tape& tape, Var encodings, TaskKind task, const ad::ParamMap& params) {
    Var W = tape.param("head.W", params);
    Var b = tape.param("head.b", params);
    if (task == TaskKind::node_class) return ad::add_row(ad::linear(encodings, W), b);
    return ad::add_row(ad::linear(ad::mean_rows(encodings), W), b);
}

// ---- checkpoint ------------------------------------------------------------------

nlohmann::json model_to_json(const GMNModel& model) {
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, m] : model.params) {
        std::vector<double> data(m.data(), m.data() + m.size());
        tensors[name] = {{"shape", {m.rows(), m.cols()}}, {"data", data}};
    }
    return {{"format", "gmn_ckpt_v1"},
            {"config", config_to_json(model.config)},
            {"in_dim", model.in_dim},
            {"out_dim", model.out_dim},
            {"tie_directions", model.tie_directions},
            {"tensors", tensors}};
}

GMNModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string()) != "gmn_ckpt_v1") {
            throw ValidationError("checkpoint: missing or unsupported format header");
        }
        GMNModel model;
        model.config = config_from_json(doc.at("config"));
        model.in_dim = doc.at("in_dim").get<std::size_t>();
        model.out_dim = doc.at("out_dim").get<std::size_t>();
        model.tie_directions = doc.at("tie_directions").get<bool>();
        for (const auto& [name, t] : doc.at("tensors").items()) {
            const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
            const auto data = t.at("data").get<std::vector<double>>();
            if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(data.size())) {
                throw ValidationError("checkpoint: tensor '" + name + "' has inconsistent shape");
            }
            Matrix m(shape[0], shape[1]);
            std::copy(data.begin(), data.end(), m.data());
            model.params[name] = std::move(m);
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const GMNModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << model_to_json(model).dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

GMNModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint " + path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

} // namespace gmn
