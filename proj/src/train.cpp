#include "gmn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gmn/errors.hpp"
#include "gmn/parallel.hpp"
#include "gmn/rng.hpp"

namespace gmn {

ad::GradMap backward(ad::Tape& tape, ad::Var loss, double loss_grad) {
    if (loss.rows() != 1 || loss.cols() != 1) throw ValidationError("backward needs a scalar loss");
    return tape.backward(loss, loss_grad);
}

std::vector<GradCheckEntry> GradCheckReport::failures() const {
    std::vector<GradCheckEntry> out;
    for (const auto& e : entries)
        if (!(e.rel_err <= tolerance)) out.push_back(e);
    return out;
}

double grad_rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(ad::ParamMap& params, const std::function<double()>& loss,
                                  const ad::GradMap& analytic, double h, double tolerance, std::size_t max_coords,
                                  std::uint64_t seed) {
    GradCheckReport report;
    report.tolerance = tolerance;
    std::vector<std::pair<std::string, Eigen::Index>> coords;
    for (const auto& [name, m] : params)
        for (Eigen::Index i = 0; i < m.size(); ++i) coords.emplace_back(name, i);
    if (max_coords > 0 && coords.size() > max_coords) {
        Rng rng(seed);
        rng.shuffle(std::span(coords));
        coords.resize(max_coords);
        std::sort(coords.begin(), coords.end());
    }
    for (const auto& [name, i] : coords) {
        double& p = params.at(name).data()[i];
        const double saved = p;
        p = saved + h;
        const double up = loss();
        p = saved - h;
        const double down = loss();
        p = saved;
        GradCheckEntry e{name, i, 0.0, (up - down) / (2.0 * h), 0.0};
        if (auto it = analytic.find(name); it != analytic.end()) e.analytic = it->second.data()[i];
        e.rel_err = grad_rel_err(e.analytic, e.numeric);
        if (!std::isfinite(e.rel_err)) e.rel_err = std::numeric_limits<double>::infinity();
        report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
        report.entries.push_back(std::move(e));
    }
    return report;
}

// ---- losses ---------------------------------------------------------------------

namespace {

bool classification(TaskKind t) { return t != TaskKind::graph_reg; }

} // namespace

LossOutput example_loss(ad::Tape& tape, const GMNModel& model, const Example& ex, bool val_split) {
    const TaskKind task = model.config.task;
    ad::Var enc = gmn_forward(tape, model, ex.input);
    ad::Var out = readout(tape, enc, task, model.params);
    LossOutput res;
    if (task == TaskKind::node_class) {
        const auto& mask = val_split ? ex.val_mask : ex.train_mask;
        res.loss = ad::softmax_cross_entropy(out, ex.node_labels, mask);
        const Matrix& logits = out.value();
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            if (mask[static_cast<std::size_t>(i)] == 0.0) continue;
            Eigen::Index arg = 0;
            logits.row(i).maxCoeff(&arg);
            res.metric_sum += arg == ex.node_labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            res.metric_count += 1.0;
        }
    } else if (task == TaskKind::graph_class) {
        res.loss = ad::softmax_cross_entropy(out, {static_cast<int>(ex.graph_target)});
        Eigen::Index arg = 0;
        out.value().row(0).maxCoeff(&arg);
        res.metric_sum = arg == static_cast<Eigen::Index>(ex.graph_target) ? 1.0 : 0.0;
        res.metric_count = 1.0;
    } else {
        res.loss = ad::l1_loss(out, Matrix::Constant(1, 1, ex.graph_target));
        res.metric_sum = std::abs(out.value()(0, 0) - ex.graph_target);
        res.metric_count = 1.0;
    }
    return res;
}

double example_loss_value(const GMNModel& model, const Example& ex) {
    ad::Tape tape;
    return example_loss(tape, model, ex, false).loss.value()(0, 0);
}

GradCheckReport grad_check_model(GMNModel& model, const Example& ex, double h, double tolerance,
                                 std::size_t max_coords, std::uint64_t seed) {
    ad::Tape tape;
    const auto grads = backward(tape, example_loss(tape, model, ex, false).loss);
    return finite_diff_check(model.params, [&] { return example_loss_value(model, ex); }, grads, h, tolerance,
                             max_coords, seed);
}

// ---- optimizer --------------------------------------------------------------------

void adam_step(ad::ParamMap& params, const ad::GradMap& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    ++state.t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() == 0) {
            m = Matrix::Zero(p.rows(), p.cols());
            v = Matrix::Zero(p.rows(), p.cols());
        }
        const auto it = grads.find(name);
        if (it != grads.end()) {
            if (it->second.rows() != p.rows() || it->second.cols() != p.cols()) {
                throw ValidationError("adam_step: gradient shape mismatch for " + name);
            }
            m = beta1 * m + (1.0 - beta1) * it->second;
            v = beta2 * v + (1.0 - beta2) * it->second.cwiseAbs2();
        } else {
            m *= beta1;
            v *= beta2;
        }
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
}

// ---- data ---------------------------------------------------------------------------

std::size_t infer_out_dim(const std::vector<Graph>& dataset, const TrainConfig& cfg) {
    if (cfg.task == TaskKind::graph_reg) return 1;
    double max_label = -1.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& g = dataset[i];
        if (cfg.task == TaskKind::node_class) {
            if (!g.node_labels()) throw ValidationError("graph " + std::to_string(i) + " has no node labels");
            for (double l : *g.node_labels()) max_label = std::max(max_label, l);
        } else {
            if (!g.graph_label()) throw ValidationError("graph " + std::to_string(i) + " has no graph label");
            max_label = std::max(max_label, *g.graph_label());
        }
    }
    const auto inferred = static_cast<std::size_t>(max_label + 1.0);
    if (cfg.num_classes == 0) return std::max<std::size_t>(inferred, 2);
    if (inferred > cfg.num_classes) {
        throw ValidationError("labels reach " + std::to_string(inferred - 1) + " but num_classes is " +
                              std::to_string(cfg.num_classes));
    }
    return cfg.num_classes;
}

namespace {

int class_label(double v, std::size_t where) {
    if (v < 0 || v != std::floor(v)) {
        throw ValidationError("label " + std::to_string(v) + " at " + std::to_string(where) +
                              " is not a non-negative integer");
    }
    return static_cast<int>(v);
}

} // namespace

std::vector<Example> prepare_examples(const std::vector<Graph>& dataset, const TrainConfig& cfg,
                                      const std::vector<std::vector<TokenSequence>>* tokens) {
    cfg.validate();
    if (dataset.empty()) throw ValidationError("dataset is empty");
    if (tokens && tokens->size() != dataset.size()) throw ValidationError("token cache does not match the dataset");
    infer_out_dim(dataset, cfg); // label presence and range
    const std::size_t G = dataset.size();
    std::vector<Example> out(G);
    parallel_for(G, worker_threads(), [&](std::size_t i) {
        out[i].input = prepare_graph(dataset[i], cfg, tokens ? &(*tokens)[i] : nullptr);
    });
    Rng split_rng(derive_seed(cfg.seed, 0x73706c6974ULL));
    if (cfg.task == TaskKind::node_class) {
        for (std::size_t i = 0; i < G; ++i) {
            const auto& labels = *dataset[i].node_labels();
            const std::size_t n = labels.size();
            auto& ex = out[i];
            for (std::size_t v = 0; v < n; ++v) ex.node_labels.push_back(class_label(labels[v], v));
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            split_rng.shuffle(std::span(idx));
            const auto n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(n));
            ex.train_mask.assign(n, 1.0);
            ex.val_mask.assign(n, 0.0);
            for (std::size_t k = 0; k < n_val; ++k) {
                ex.train_mask[idx[k]] = 0.0;
                ex.val_mask[idx[k]] = 1.0;
            }
        }
    } else {
        std::vector<std::size_t> idx(G);
        std::iota(idx.begin(), idx.end(), 0);
        split_rng.shuffle(std::span(idx));
        const auto n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(G));
        for (std::size_t i = 0; i < G; ++i) {
            const double y = *dataset[i].graph_label();
            out[i].graph_target = classification(cfg.task) ? class_label(y, i) : y;
        }
        for (std::size_t k = 0; k < n_val; ++k) out[idx[k]].in_train = false;
    }
    return out;
}

// ---- training ---------------------------------------------------------------------

namespace {

bool in_split(const Example& ex, TaskKind task, bool val) {
    if (task == TaskKind::node_class) {
        const auto& mask = val ? ex.val_mask : ex.train_mask;
        return std::any_of(mask.begin(), mask.end(), [](double w) { return w != 0.0; });
    }
    return ex.in_train != val;
}

} // namespace

MetricRow evaluate(const GMNModel& model, const std::vector<Example>& examples, bool val_split, std::size_t epoch) {
    const TaskKind task = model.config.task;
    std::vector<double> loss(examples.size(), 0.0), msum(examples.size(), 0.0), mcount(examples.size(), 0.0);
    parallel_for(examples.size(), worker_threads(), [&](std::size_t i) {
        if (!in_split(examples[i], task, val_split)) return;
        ad::Tape tape;
        const auto r = example_loss(tape, model, examples[i], val_split);
        loss[i] = r.loss.value()(0, 0) * r.metric_count;
        msum[i] = r.metric_sum;
        mcount[i] = r.metric_count;
    });
    double total_loss = 0.0, total_metric = 0.0, count = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        total_loss += loss[i];
        total_metric += msum[i];
        count += mcount[i];
    }
    MetricRow row{epoch, val_split ? "val" : "train", 0.0, 0.0};
    if (count > 0) {
        row.loss = total_loss / count;
        row.metric = total_metric / count;
    }
    return row;
}

TrainResult train(GMNModel model, const std::vector<Example>& examples) {
    const auto& cfg = model.config;
    TrainResult result;
    std::vector<std::size_t> train_idx;
    bool has_val = false;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (in_split(examples[i], cfg.task, false)) train_idx.push_back(i);
        has_val = has_val || in_split(examples[i], cfg.task, true);
    }
    if (train_idx.empty()) throw ValidationError("training split is empty");
    AdamState adam;
    const std::size_t threads = worker_threads();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0x65706f6368ULL, epoch));
        std::vector<std::size_t> order = train_idx;
        rng.shuffle(std::span(order));
        for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t B = end - start;
            std::vector<ad::GradMap> grads(B);
            std::vector<double> losses(B);
            try {
                parallel_for(B, threads, [&](std::size_t k) {
                    ad::Tape tape;
                    const auto r = example_loss(tape, model, examples[order[start + k]], false);
                    losses[k] = r.loss.value()(0, 0);
                    if (!std::isfinite(losses[k])) throw NumericalError("loss is not finite");
                    grads[k] = backward(tape, r.loss, 1.0 / static_cast<double>(B));
                });
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch) + ")");
            }
            ad::GradMap total = std::move(grads[0]);
            for (std::size_t k = 1; k < B; ++k)
                for (auto& [name, g] : grads[k]) total.at(name) += g;
            adam_step(model.params, total, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        }
        result.history.push_back(evaluate(model, examples, false, epoch));
        if (has_val) result.history.push_back(evaluate(model, examples, true, epoch));
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(const std::vector<Graph>& dataset, const TrainConfig& cfg,
                  const std::vector<std::vector<TokenSequence>>* tokens) {
    const auto examples = prepare_examples(dataset, cfg, tokens);
    const std::size_t edge_dim =
        dataset.front().has_edge_features() ? static_cast<std::size_t>(dataset.front().edge_features().cols()) : 0;
    auto model = init_model(cfg, examples.front().input.graph.feature_dim(), edge_dim, infer_out_dim(dataset, cfg));
    return train(std::move(model), examples);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
    out << "epoch,split,loss,metric\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g\n", r.epoch, r.split.c_str(), r.loss, r.metric);
        out << buf;
    }
}

} // namespace gmn
