#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "gmn/model.hpp"

namespace gmn {

// ---- gradients --------------------------------------------------------------

/// Reverse sweep from a scalar loss; gradients for every parameter leaf.
ad::GradMap backward(ad::Tape& tape, ad::Var loss, double loss_grad = 1.0);

struct GradCheckEntry {
    std::string name;
    Eigen::Index index = 0; // row-major flat index
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    double tolerance = 1e-4;
    std::vector<GradCheckEntry> failures() const;
    bool passed() const { return max_rel_err <= tolerance; }
};

/// |a - f| / max(|a|, |f|, floor). The floor keeps exact-zero gradients from
/// turning round-off into unit relative error.
inline constexpr double kGradCheckFloor = 1e-6;
double grad_rel_err(double analytic, double numeric);

/// Central differences (f(p + h) - f(p - h)) / 2h against `analytic`.
/// `loss` must read `params`, which is perturbed in place and restored. Checks
/// every coordinate unless max_coords > 0 and there are more than that, in
/// which case a seeded sample of max_coords coordinates is checked.
GradCheckReport finite_diff_check(ad::ParamMap& params, const std::function<double()>& loss,
                                  const ad::GradMap& analytic, double h = 1e-5, double tolerance = 1e-4,
                                  std::size_t max_coords = 0, std::uint64_t seed = 0);

// ---- losses and targets ---------------------------------------------------------

/// Labels of one graph for the configured task; train/val masks per node
/// (node tasks) or per graph.
struct Example {
    PreparedGraph input;
    std::vector<int> node_labels;   // node_class
    double graph_target = 0.0;      // graph tasks
    std::vector<double> train_mask; // node_class: per node
    std::vector<double> val_mask;
    bool in_train = true;           // graph tasks
};

struct LossOutput {
    ad::Var loss;
    double metric_sum = 0.0;   // correct predictions, or absolute error sum
    double metric_count = 0.0;
};

/// Loss for one example restricted to a split ("train" or "val").
LossOutput example_loss(ad::Tape& tape, const GMNModel& model, const Example& ex, bool val_split);

/// Train-split loss of one example (no gradients).
double example_loss_value(const GMNModel& model, const Example& ex);

/// Analytic gradients of the train-split loss, verified by central differences.
GradCheckReport grad_check_model(GMNModel& model, const Example& ex, double h = 1e-5, double tolerance = 1e-4,
                                 std::size_t max_coords = 0, std::uint64_t seed = 0);

// ---- optimizer ------------------------------------------------------------------

struct AdamState {
    std::size_t t = 0;
    ad::ParamMap m;
    ad::ParamMap v;
};

void adam_step(ad::ParamMap& params, const ad::GradMap& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps);

// ---- training -------------------------------------------------------------------

struct MetricRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double metric = 0.0; // accuracy, or MAE for regression
};

struct TrainResult {
    GMNModel model;
    std::vector<MetricRow> history;
};

/// Labels, split and frozen tokens for a dataset. `tokens` (optional) holds one
/// token list per graph, e.g. from a cache.
std::vector<Example> prepare_examples(const std::vector<Graph>& dataset, const TrainConfig& cfg,
                                      const std::vector<std::vector<TokenSequence>>* tokens = nullptr);

/// Output width the task needs (classes inferred from labels when the config
/// leaves num_classes at 0).
std::size_t infer_out_dim(const std::vector<Graph>& dataset, const TrainConfig& cfg);

TrainResult train(const std::vector<Graph>& dataset, const TrainConfig& cfg,
                  const std::vector<std::vector<TokenSequence>>* tokens = nullptr);
/// Training on already prepared examples starting from `model`.
TrainResult train(GMNModel model, const std::vector<Example>& examples);

/// Loss and metric of `model` over the examples of one split.
MetricRow evaluate(const GMNModel& model, const std::vector<Example>& examples, bool val_split, std::size_t epoch);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);

} // namespace gmn
