#include "gmn/autodiff.hpp"

#include <atomic>
#include <cmath>

#include "gmn/errors.hpp"
#include "gmn/ssm.hpp"

namespace gmn::ad {

namespace {

std::atomic<double> g_silu_derivative_scale{1.0};

void require(bool ok, const char* op, const std::string& what) {
    if (!ok) throw ValidationError(std::string(op) + ": " + what);
}

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

void testing::set_silu_derivative_scale(double s) { g_silu_derivative_scale = s; }

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(const std::string& name, const ParamMap& params) {
    if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
    auto p = params.find(name);
    if (p == params.end()) throw ValidationError("unknown parameter '" + name + "'");
    Node n;
    n.op = "param:" + name;
    n.value = p->second;
    n.needs_grad = true;
    n.param_name = name;
    nodes_.push_back(std::move(n));
    params_.emplace(name, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string op, Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    for (const Var& v : inputs) {
        if (v.tape() != this) throw ValidationError("op '" + n.op + "' mixes tapes");
        n.inputs.push_back(v.id());
        n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

Matrix* Tape::grad_buffer(Var v) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return nullptr;
    if (!n.has_grad) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return &n.grad;
}

GradMap Tape::backward(Var loss, double loss_grad) {
    if (loss.tape() != this) throw ValidationError("backward: loss belongs to another tape");
    Node& root = nodes_[loss.id()];
    if (root.value.size() != 1) throw ValidationError("backward: loss must be a scalar, got " + shape(root.value));
    if (root.needs_grad) {
        root.grad = Matrix::Constant(1, 1, loss_grad);
        root.has_grad = true;
    }
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.backward) continue;
        n.backward(*this, n.grad);
        for (auto in : n.inputs) {
            const Node& src = nodes_[in];
            if (src.has_grad && !src.grad.allFinite()) {
                throw NumericalError("non-finite gradient produced by op '" + n.op + "' (node " +
                                     std::to_string(i) + ")");
            }
        }
        if (n.param_name.empty()) {
            n.grad.resize(0, 0);
            n.has_grad = false;
        }
    }
    GradMap out;
    for (const auto& [name, id] : params_) {
        const Node& n = nodes_[id];
        out[name] = n.has_grad ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
    }
    return out;
}

// ---- ops --------------------------------------------------------------------

Activation parse_activation(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "silu") return Activation::silu;
    if (s == "tanh") return Activation::tanh;
    throw ValidationError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::silu: return "silu";
    case Activation::tanh: return "tanh";
    }
    return "identity";
}

Var linear(Var x, Var W) {
    const Matrix& xv = x.value();
    const Matrix& wv = W.value();
    require(xv.cols() == wv.cols(), "linear", "input " + shape(xv) + " vs weight " + shape(wv));
    Matrix y = xv * wv.transpose();
    return x.tape()->record("linear", std::move(y), {x, W}, [x, W](Tape& t, const Matrix& g) {
        if (t.needs_grad(x)) t.accumulate(x, g * t.value(W));
        if (t.needs_grad(W)) t.accumulate(W, g.transpose() * t.value(x));
    });
}

Var add_row(Var x, Var bias) {
    const Matrix& xv = x.value();
    require(bias.rows() == 1 && bias.cols() == xv.cols(), "add_row", "bias " + shape(bias.value()));
    Matrix y = xv.rowwise() + bias.value().row(0);
    return x.tape()->record("add_row", std::move(y), {x, bias}, [x, bias](Tape& t, const Matrix& g) {
        t.accumulate(x, g);
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
    });
}

Var add(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add",
            shape(a.value()) + " vs " + shape(b.value()));
    return a.tape()->record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var mul(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul",
            shape(a.value()) + " vs " + shape(b.value()));
    return a.tape()->record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
        if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
}

Var scale(Var a, double c) {
    return a.tape()->record("scale", a.value() * c, {a}, [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g * c); });
}

Var silu(Var x) {
    Matrix y = x.value().unaryExpr([](double v) { return v * ssm::sigmoid(v); });
    return x.tape()->record("silu", std::move(y), {x}, [x](Tape& t, const Matrix& g) {
        const double k = g_silu_derivative_scale.load();
        Matrix d = t.value(x).unaryExpr([k](double v) {
            const double s = ssm::sigmoid(v);
            return k * s * (1.0 + v * (1.0 - s));
        });
        t.accumulate(x, g.cwiseProduct(d));
    });
}

Var softplus(Var x) {
    Matrix y = x.value().unaryExpr([](double v) { return ssm::softplus(v); });
    return x.tape()->record("softplus", std::move(y), {x}, [x](Tape& t, const Matrix& g) {
        t.accumulate(x, g.cwiseProduct(t.value(x).unaryExpr([](double v) { return ssm::sigmoid(v); })));
    });
}

Var tanh(Var x) {
    Matrix y = x.value().array().tanh().matrix();
    return x.tape()->record("tanh", y, {x}, [x, y](Tape& t, const Matrix& g) {
        t.accumulate(x, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    });
}

Var activate(Var x, Activation a) {
    switch (a) {
    case Activation::identity: return x;
    case Activation::silu: return silu(x);
    case Activation::tanh: return tanh(x);
    }
    return x;
}

Var neg_exp(Var x) {
    Matrix y = -x.value().array().exp().matrix();
    return x.tape()->record("neg_exp", y, {x}, [x, y](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseProduct(y)); });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Matrix& xv = x.value();
    const auto C = xv.cols();
    require(gamma.rows() == 1 && gamma.cols() == C && beta.rows() == 1 && beta.cols() == C, "layer_norm",
            "affine shape mismatch for width " + std::to_string(C));
    Matrix xhat(xv.rows(), C);
    Vector inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mu = xv.row(r).mean();
        const double var = (xv.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
    }
    Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return x.tape()->record("layer_norm", std::move(y), {x, gamma, beta},
                            [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix& g) {
                                if (t.needs_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                                if (t.needs_grad(beta)) t.accumulate(beta, g.colwise().sum());
                                if (!t.needs_grad(x)) return;
                                Matrix gx_hat = g.array().rowwise() * t.value(gamma).row(0).array();
                                Matrix gx(g.rows(), g.cols());
                                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                                    const double m1 = gx_hat.row(r).mean();
                                    const double m2 = gx_hat.row(r).dot(xhat.row(r)) / static_cast<double>(g.cols());
                                    gx.row(r) = inv_std(r) * (gx_hat.row(r).array() - m1 - xhat.row(r).array() * m2);
                                }
                                t.accumulate(x, gx);
                            });
}

Var causal_conv(Var x, Var kernel, Var bias, std::size_t L) {
    const Matrix& xv = x.value();
    const Matrix& kv = kernel.value();
    const auto C = xv.cols();
    const auto k = kv.cols();
    require(L > 0 && xv.rows() % static_cast<Eigen::Index>(L) == 0, "causal_conv", "rows not a multiple of L");
    require(kv.rows() == C && bias.rows() == 1 && bias.cols() == C, "causal_conv", "kernel/bias shape mismatch");
    const auto Li = static_cast<Eigen::Index>(L);
    const Eigen::Index batches = xv.rows() / Li;
    Matrix y(xv.rows(), C);
    for (Eigen::Index b = 0; b < batches; ++b) {
        for (Eigen::Index t = 0; t < Li; ++t) {
            auto out = y.row(b * Li + t);
            out = bias.value().row(0);
            for (Eigen::Index j = 0; j < k; ++j) {
                const Eigen::Index src = t - (k - 1 - j);
                if (src < 0) continue;
                out += kv.col(j).transpose().cwiseProduct(xv.row(b * Li + src));
            }
        }
    }
    return x.tape()->record("causal_conv", std::move(y), {x, kernel, bias}, [x, kernel, bias, Li](Tape& t, const Matrix& g) {
        const Matrix& xv = t.value(x);
        const Matrix& kv = t.value(kernel);
        const auto k = kv.cols();
        const Eigen::Index batches = xv.rows() / Li;
        Matrix* gx = t.grad_buffer(x);
        Matrix* gk = t.grad_buffer(kernel);
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
        for (Eigen::Index b = 0; b < batches; ++b) {
            for (Eigen::Index tt = 0; tt < Li; ++tt) {
                const auto go = g.row(b * Li + tt);
                for (Eigen::Index j = 0; j < k; ++j) {
                    const Eigen::Index src = tt - (k - 1 - j);
                    if (src < 0) continue;
                    if (gx) gx->row(b * Li + src) += kv.col(j).transpose().cwiseProduct(go);
                    if (gk) gk->col(j) += xv.row(b * Li + src).cwiseProduct(go).transpose();
                }
            }
        }
    });
}

Var selective_scan(Var x, Var delta, Var A, Var Bm, Var C, std::size_t L) {
    const Matrix& xv = x.value();
    const auto D = xv.cols();
    const auto N = A.cols();
    const auto Li = static_cast<Eigen::Index>(L);
    require(L > 0 && xv.rows() % Li == 0, "selective_scan", "rows not a multiple of L");
    require(delta.rows() == xv.rows() && delta.cols() == D && A.rows() == D && Bm.rows() == xv.rows() &&
                Bm.cols() == N && C.rows() == xv.rows() && C.cols() == N,
            "selective_scan", "shape mismatch");
    const Eigen::Index batches = xv.rows() / Li;
    Matrix y(xv.rows(), D);
    auto states = std::make_shared<std::vector<std::vector<double>>>(batches);
    for (Eigen::Index b = 0; b < batches; ++b) {
        ssm::selective_scan_forward(xv.middleRows(b * Li, Li), delta.value().middleRows(b * Li, Li), A.value(),
                                    Bm.value().middleRows(b * Li, Li), C.value().middleRows(b * Li, Li),
                                    y.middleRows(b * Li, Li), (*states)[b]);
    }
    return x.tape()->record(
        "selective_scan", std::move(y), {x, delta, A, Bm, C}, [x, delta, A, Bm, C, Li, states](Tape& t, const Matrix& g) {
            const Matrix& xv = t.value(x);
            const Eigen::Index batches = xv.rows() / Li;
            // Untracked inputs still need scratch space for the fused kernel.
            Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
            Matrix gd = Matrix::Zero(xv.rows(), xv.cols());
            Matrix gA = Matrix::Zero(t.value(A).rows(), t.value(A).cols());
            Matrix gB = Matrix::Zero(xv.rows(), t.value(Bm).cols());
            Matrix gC = Matrix::Zero(xv.rows(), t.value(C).cols());
            for (Eigen::Index b = 0; b < batches; ++b) {
                ssm::selective_scan_backward(
                    xv.middleRows(b * Li, Li), t.value(delta).middleRows(b * Li, Li), t.value(A),
                    t.value(Bm).middleRows(b * Li, Li), t.value(C).middleRows(b * Li, Li), (*states)[b],
                    g.middleRows(b * Li, Li), gx.middleRows(b * Li, Li), gd.middleRows(b * Li, Li), gA,
                    gB.middleRows(b * Li, Li), gC.middleRows(b * Li, Li));
            }
            t.accumulate(x, gx);
            t.accumulate(delta, gd);
            t.accumulate(A, gA);
            t.accumulate(Bm, gB);
            t.accumulate(C, gC);
        });
}

Var reverse_rows(Var x, std::size_t L) {
    const Matrix& xv = x.value();
    const auto Li = static_cast<Eigen::Index>(L);
    require(L > 0 && xv.rows() % Li == 0, "reverse_rows", "rows not a multiple of L");
    auto flip = [Li](const Matrix& m) {
        Matrix out(m.rows(), m.cols());
        for (Eigen::Index b = 0; b < m.rows() / Li; ++b)
            for (Eigen::Index t = 0; t < Li; ++t) out.row(b * Li + t) = m.row(b * Li + (Li - 1 - t));
        return out;
    };
    return x.tape()->record("reverse_rows", flip(xv), {x}, [x, flip](Tape& t, const Matrix& g) { t.accumulate(x, flip(g)); });
}

Var last_rows(Var x, std::size_t L) {
    const Matrix& xv = x.value();
    const auto Li = static_cast<Eigen::Index>(L);
    require(L > 0 && xv.rows() % Li == 0, "last_rows", "rows not a multiple of L");
    const Eigen::Index batches = xv.rows() / Li;
    Matrix y(batches, xv.cols());
    for (Eigen::Index b = 0; b < batches; ++b) y.row(b) = xv.row(b * Li + Li - 1);
    return x.tape()->record("last_rows", std::move(y), {x}, [x, Li](Tape& t, const Matrix& g) {
        Matrix* gx = t.grad_buffer(x);
        for (Eigen::Index b = 0; b < g.rows(); ++b) gx->row(b * Li + Li - 1) += g.row(b);
    });
}

Var gather_rows(Var x, std::vector<std::size_t> index) {
    const Matrix& xv = x.value();
    Matrix y(static_cast<Eigen::Index>(index.size()), xv.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] < static_cast<std::size_t>(xv.rows()), "gather_rows", "index out of range");
        y.row(static_cast<Eigen::Index>(i)) = xv.row(static_cast<Eigen::Index>(index[i]));
    }
    return x.tape()->record("gather_rows", std::move(y), {x}, [x, index = std::move(index)](Tape& t, const Matrix& g) {
        Matrix* gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < index.size(); ++i)
            gx->row(static_cast<Eigen::Index>(index[i])) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var spmm(std::shared_ptr<const SparseMatrix> S, Var x) {
    require(S->cols() == x.rows(), "spmm", "sparse " + std::to_string(S->rows()) + "x" + std::to_string(S->cols()) +
                                               " vs dense " + shape(x.value()));
    Matrix y = (*S) * x.value();
    return x.tape()->record("spmm", std::move(y), {x}, [S, x](Tape& t, const Matrix& g) {
        t.accumulate(x, S->transpose() * g);
    });
}

Var mean_rows(Var x) {
    require(x.rows() > 0, "mean_rows", "empty input");
    Matrix y = x.value().colwise().mean();
    const double inv = 1.0 / static_cast<double>(x.rows());
    return x.tape()->record("mean_rows", std::move(y), {x}, [x, inv](Tape& t, const Matrix& g) {
        t.accumulate(x, Matrix(g.replicate(t.value(x).rows(), 1) * inv));
    });
}

Var sum_all(Var x) {
    Matrix y = Matrix::Constant(1, 1, x.value().sum());
    return x.tape()->record("sum_all", std::move(y), {x}, [x](Tape& t, const Matrix& g) {
        t.accumulate(x, Matrix::Constant(t.value(x).rows(), t.value(x).cols(), g(0, 0)));
    });
}

Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

Var softmax_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> weights) {
    const Matrix& lv = logits.value();
    require(static_cast<Eigen::Index>(labels.size()) == lv.rows(), "softmax_cross_entropy", "label count mismatch");
    if (weights.empty()) weights.assign(labels.size(), 1.0);
    require(weights.size() == labels.size(), "softmax_cross_entropy", "weight count mismatch");
    Matrix p = softmax(lv);
    double total_w = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (weights[i] == 0.0) continue;
        require(labels[i] >= 0 && labels[i] < lv.cols(), "softmax_cross_entropy",
                "label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(lv.cols()) + ")");
        const auto r = static_cast<Eigen::Index>(i);
        const double mx = lv.row(r).maxCoeff();
        const double lse = mx + std::log((lv.row(r).array() - mx).exp().sum());
        loss += weights[i] * (lse - lv(r, labels[i]));
        total_w += weights[i];
    }
    require(total_w > 0.0, "softmax_cross_entropy", "no weighted rows");
    Matrix y = Matrix::Constant(1, 1, loss / total_w);
    return logits.tape()->record("softmax_cross_entropy", std::move(y), {logits},
                                 [logits, labels = std::move(labels), weights = std::move(weights), p, total_w](
                                     Tape& t, const Matrix& g) {
                                     Matrix gl = Matrix::Zero(p.rows(), p.cols());
                                     for (std::size_t i = 0; i < labels.size(); ++i) {
                                         if (weights[i] == 0.0) continue;
                                         const auto r = static_cast<Eigen::Index>(i);
                                         gl.row(r) = p.row(r) * (weights[i] / total_w);
                                         gl(r, labels[i]) -= weights[i] / total_w;
                                     }
                                     t.accumulate(logits, gl * g(0, 0));
                                 });
}

Var l1_loss(Var pred, Matrix target, std::vector<double> weights) {
    const Matrix& pv = pred.value();
    require(pv.rows() == target.rows() && pv.cols() == target.cols(), "l1_loss",
            shape(pv) + " vs target " + shape(target));
    if (weights.empty()) weights.assign(static_cast<std::size_t>(pv.rows()), 1.0);
    double total_w = 0.0, loss = 0.0;
    for (Eigen::Index r = 0; r < pv.rows(); ++r) {
        loss += weights[r] * (pv.row(r) - target.row(r)).cwiseAbs().sum();
        total_w += weights[r] * static_cast<double>(pv.cols());
    }
    require(total_w > 0.0, "l1_loss", "no weighted rows");
    Matrix y = Matrix::Constant(1, 1, loss / total_w);
    return pred.tape()->record("l1_loss", std::move(y), {pred},
                               [pred, target = std::move(target), weights = std::move(weights), total_w](
                                   Tape& t, const Matrix& g) {
                                   const Matrix& pv = t.value(pred);
                                   Matrix gp(pv.rows(), pv.cols());
                                   for (Eigen::Index r = 0; r < pv.rows(); ++r)
                                       for (Eigen::Index c = 0; c < pv.cols(); ++c) {
                                           const double diff = pv(r, c) - target(r, c);
                                           const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                                           gp(r, c) = weights[r] * sign / total_w * g(0, 0);
                                       }
                                   t.accumulate(pred, gp);
                               });
}

} // namespace gmn::ad
