#include "gmn/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "gmn/errors.hpp"

namespace gmn {

TaskKind parse_task_kind(const std::string& s) {
    if (s == "node_class") return TaskKind::node_class;
    if (s == "graph_class") return TaskKind::graph_class;
    if (s == "graph_reg") return TaskKind::graph_reg;
    throw ValidationError("unknown task '" + s + "'");
}

std::string to_string(TaskKind t) {
    switch (t) {
    case TaskKind::node_class: return "node_class";
    case TaskKind::graph_class: return "graph_class";
    case TaskKind::graph_reg: return "graph_reg";
    }
    return "?";
}

namespace {

template <std::size_t K>
bool in(std::size_t v, const std::array<std::size_t, K>& set) {
    return std::find(set.begin(), set.end(), v) != set.end();
}

} // namespace

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ValidationError("config: " + msg);
    };
    require(M >= 1, "M must be >= 1");
    require(m == 0 || s >= 1, "s must be >= 1 when m >= 1");
    require((m == 0) == (n_token_layers == 0), "n_token_layers must be 0 exactly when m = 0");
    require(n_node_layers >= 1, "n_node_layers must be >= 1");
    require(d_model >= 1 && d_state >= 1 && conv_width >= 1 && expansion >= 1, "dimensions must be >= 1");
    require(pe == PeMode::none || pe_dim >= 1, "pe_dim must be >= 1");
    require(encoder != EncoderKind::mpnn || encoder_rounds >= 1, "encoder_rounds must be >= 1");
    require(rwf_window >= 1, "rwf_window must be >= 1");
    require(!mpnn_augment || mpnn_rounds >= 1, "mpnn_rounds must be >= 1");
    require(lr >= 0.0, "lr must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0, "bad adam settings");
    require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction must lie in [0, 1)");
    if (off_grid) return;
    static constexpr std::array<std::size_t, 6> kM{1, 2, 4, 8, 16, 32};
    static constexpr std::array<std::size_t, 6> kS{0, 1, 2, 4, 8, 16};
    static constexpr std::array<std::size_t, 4> kLayers{3, 4, 5, 6};
    const std::size_t layers = n_token_layers + n_node_layers;
    std::string why;
    if (!in(M, kM)) why = "M=" + std::to_string(M);
    else if (!in(m == 0 ? 0 : s, kS)) why = "s=" + std::to_string(s);
    else if (!in(layers, kLayers)) why = "layers=" + std::to_string(layers);
    else if (epochs > 300) why = "epochs=" + std::to_string(epochs);
    else if (lr != 0.001) why = "lr=" + std::to_string(lr);
    if (!why.empty()) throw ValidationError("config: " + why + " is outside the search grid (set off_grid: true)");
}

TrainConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    TrainConfig c;
    static const std::set<std::string> known{
        "task", "num_classes", "M", "m", "s", "n_token_layers", "n_node_layers", "d_model", "d_state",
        "conv_width", "expansion", "ordering", "pe", "pe_dim", "encoder", "encoder_rounds", "rwf_window",
        "activation", "mpnn_augment", "mpnn_rounds", "lr", "epochs", "batch_size", "seed", "beta1", "beta2",
        "eps", "val_fraction", "off_grid"};
    for (const auto& [key, _] : doc.items()) {
        if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
        };
        if (doc.contains("task")) c.task = parse_task_kind(doc.at("task").get<std::string>());
        if (doc.contains("ordering")) c.ordering = parse_ordering_mode(doc.at("ordering").get<std::string>());
        if (doc.contains("pe")) c.pe = parse_pe_mode(doc.at("pe").get<std::string>());
        if (doc.contains("encoder")) c.encoder = parse_encoder_kind(doc.at("encoder").get<std::string>());
        if (doc.contains("activation")) c.activation = ad::parse_activation(doc.at("activation").get<std::string>());
        get("num_classes", c.num_classes);
        get("M", c.M);
        get("m", c.m);
        get("s", c.s);
        get("n_token_layers", c.n_token_layers);
        get("n_node_layers", c.n_node_layers);
        get("d_model", c.d_model);
        get("d_state", c.d_state);
        get("conv_width", c.conv_width);
        get("expansion", c.expansion);
        get("pe_dim", c.pe_dim);
        get("encoder_rounds", c.encoder_rounds);
        get("rwf_window", c.rwf_window);
        get("mpnn_augment", c.mpnn_augment);
        get("mpnn_rounds", c.mpnn_rounds);
        get("lr", c.lr);
        get("epochs", c.epochs);
        get("batch_size", c.batch_size);
        get("seed", c.seed);
        get("beta1", c.beta1);
        get("beta2", c.beta2);
        get("eps", c.eps);
        get("val_fraction", c.val_fraction);
        get("off_grid", c.off_grid);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"task", to_string(c.task)},
            {"num_classes", c.num_classes},
            {"M", c.M},
            {"m", c.m},
            {"s", c.s},
            {"n_token_layers", c.n_token_layers},
            {"n_node_layers", c.n_node_layers},
            {"d_model", c.d_model},
            {"d_state", c.d_state},
            {"conv_width", c.conv_width},
            {"expansion", c.expansion},
            {"ordering", to_string(c.ordering)},
            {"pe", to_string(c.pe)},
            {"pe_dim", c.pe_dim},
            {"encoder", to_string(c.encoder)},
            {"encoder_rounds", c.encoder_rounds},
            {"rwf_window", c.rwf_window},
            {"activation", ad::to_string(c.activation)},
            {"mpnn_augment", c.mpnn_augment},
            {"mpnn_rounds", c.mpnn_rounds},
            {"lr", c.lr},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"val_fraction", c.val_fraction},
            {"off_grid", c.off_grid}};
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

} // namespace gmn
