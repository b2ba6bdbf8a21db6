#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gmn/autodiff.hpp"
#include "gmn/encoder.hpp"
#include "gmn/graph.hpp"
#include "gmn/posenc.hpp"
#include "gmn/tokenizer.hpp"

namespace gmn {

enum class TaskKind { node_class, graph_class, graph_reg };
TaskKind parse_task_kind(const std::string& s);
std::string to_string(TaskKind t);

/// Every knob of a run. JSON keys match the field names; unknown keys are
/// rejected. Hyperparameters outside the tuned grid need `off_grid: true`.
struct TrainConfig {
    TaskKind task = TaskKind::graph_class;
    std::size_t num_classes = 0; // 0: infer from labels

    std::size_t M = 4;
    std::size_t m = 2;
    std::size_t s = 2;

    std::size_t n_token_layers = 2;
    std::size_t n_node_layers = 1;
    std::size_t d_model = 16;
    std::size_t d_state = 16;
    std::size_t conv_width = 4;
    std::size_t expansion = 2;

    OrderingMode ordering = OrderingMode::degree;
    PeMode pe = PeMode::none;
    std::size_t pe_dim = 4;

    EncoderKind encoder = EncoderKind::rwf;
    std::size_t encoder_rounds = 2; // mpnn
    std::size_t rwf_window = 3;
    ad::Activation activation = ad::Activation::silu;

    bool mpnn_augment = false;
    std::size_t mpnn_rounds = 1;

    double lr = 0.001;
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double val_fraction = 0.2;

    bool off_grid = false;

    /// Structural checks plus the grid check.
    void validate() const;
    SamplingParams sampling() const { return {M, m, s, seed}; }
};

TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::filesystem::path& path);

} // namespace gmn
