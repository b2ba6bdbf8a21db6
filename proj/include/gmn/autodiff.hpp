#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gmn/tensor.hpp"

namespace gmn::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Named parameter tensors. std::map keeps iteration order stable.
using ParamMap = std::map<std::string, Matrix>;
using GradMap = std::map<std::string, Matrix>;

/// Reverse-mode tape. Ops record their output value plus a closure that maps
/// the output gradient onto input gradients. Constants never receive
/// gradients and ops whose inputs are all constant skip their closure.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Leaf bound to params.at(name). Repeated calls return the same node.
    Var param(const std::string& name, const ParamMap& params);

    Var record(std::string op, Matrix value, std::initializer_list<Var> inputs, Backward backward);

    const Matrix& value(Var v) const { return nodes_[v.id()].value; }
    bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

    /// Adds g into v's gradient when v needs one. For use inside Backward.
    void accumulate(Var v, const Matrix& g);
    /// Mutable gradient buffer (zero-initialized on first use) or nullptr.
    Matrix* grad_buffer(Var v);

    /// Seeds d(loss) = loss_grad and sweeps backward. Returns gradients for
    /// every parameter leaf (zero when unreachable). Throws NumericalError
    /// naming the first op that produced a non-finite gradient.
    GradMap backward(Var loss, double loss_grad = 1.0);

    std::size_t size() const { return nodes_.size(); }
    const std::string& op_name(Var v) const { return nodes_[v.id()].op; }

private:
    struct Node {
        std::string op;
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        bool has_grad = false;
        std::vector<std::size_t> inputs;
        Backward backward;
        std::string param_name;
    };
    std::deque<Node> nodes_;
    std::unordered_map<std::string, std::size_t> params_;
};

// ---- ops --------------------------------------------------------------------

enum class Activation { identity, silu, tanh };
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

/// x W^T for x: R x in, W: out x in.
Var linear(Var x, Var W);
/// x + bias broadcast over rows (bias: 1 x C).
Var add_row(Var x, Var bias);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var silu(Var x);
Var softplus(Var x);
Var tanh(Var x);
Var activate(Var x, Activation a);
/// -exp(x), used to keep the state matrix negative.
Var neg_exp(Var x);
/// Row-wise layer normalization with affine (1 x C) scale and shift.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Depthwise causal convolution over each length-L sequence of the stacked
/// input x (B*L x C). kernel is C x k; tap k-1 multiplies the current step.
Var causal_conv(Var x, Var kernel, Var bias, std::size_t L);
/// Selective scan over B stacked sequences of length L. x, delta: B*L x D;
/// A: D x N; Bm, C: B*L x N.
Var selective_scan(Var x, Var delta, Var A, Var Bm, Var C, std::size_t L);
/// Reverses row order inside each length-L sequence.
Var reverse_rows(Var x, std::size_t L);
/// Last row of each length-L sequence: B x C.
Var last_rows(Var x, std::size_t L);
/// out.row(i) = x.row(index[i]).
Var gather_rows(Var x, std::vector<std::size_t> index);
/// S x for a constant sparse S.
Var spmm(std::shared_ptr<const SparseMatrix> S, Var x);
/// Column means: 1 x C.
Var mean_rows(Var x);
Var sum_all(Var x);
/// Mean softmax cross-entropy over the rows whose weight is nonzero,
/// weighted: sum_i w_i * ce_i / sum_i w_i.
Var softmax_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> weights = {});
/// Weighted mean absolute error against constant targets (R x 1).
Var l1_loss(Var pred, Matrix target, std::vector<double> weights = {});

Matrix softmax(const Matrix& logits);

namespace testing {
/// Scales the SiLU derivative used in backward. 1.0 restores correct
/// behavior; anything else exists to prove the gradient checker catches it.
void set_silu_derivative_scale(double s);
} // namespace testing

} // namespace gmn::ad
