#pragma once

#include <vector>

#include "gmn/tensor.hpp"

namespace gmn::ssm {

using ConstRef = Eigen::Ref<const Matrix>;

/// Diagonal continuous-time parameters: A is d_model x d_state with strictly
/// negative entries, log_delta_bias has d_model entries.
struct SsmParams {
    Matrix A;
    Vector log_delta_bias;

    std::size_t d_model() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t d_state() const { return static_cast<std::size_t>(A.cols()); }
    /// Throws ValidationError unless every entry of A is < 0 and shapes agree.
    void validate() const;
};

/// A[d][n] = -(n + 1), bias such that softplus(bias) is log-uniform in
/// [1e-3, 1e-1] (drawn from `seed`).
SsmParams default_params(std::size_t d_model, std::size_t d_state, std::uint64_t seed);

/// Input-dependent tensors for one sequence of length L.
struct SelectiveInputs {
    Matrix B;     // L x d_state
    Matrix C;     // L x d_state
    Matrix delta; // L x d_model, > 0
};

/// Per-step (A_bar, B_bar), each L x d_model x d_state, flattened as
/// ((t * d_model) + d) * d_state + n.
struct SsmDiscretization {
    std::size_t length = 0;
    std::size_t d_model = 0;
    std::size_t d_state = 0;
    std::vector<double> A_bar;
    std::vector<double> B_bar;

    std::size_t index(std::size_t t, std::size_t d, std::size_t n) const {
        return (t * d_model + d) * d_state + n;
    }
    /// True when every step carries the same (A_bar, B_bar).
    bool time_invariant() const;
};

/// |delta * a| below this uses the power series of (exp(x) - 1) / x.
inline constexpr double kSeriesThreshold = 1e-6;

/// Scalar zero-order hold: A_bar = exp(delta a), and the factor f with
/// B_bar = f * B, f = (exp(delta a) - 1) / a.
struct ZohScalar {
    double a_bar;
    double b_factor;
};
ZohScalar zoh(double delta, double a);

/// Partial derivatives of zoh() with respect to delta and a.
struct ZohGrad {
    double a_bar_d_delta;
    double a_bar_d_a;
    double b_factor_d_delta;
    double b_factor_d_a;
};
ZohGrad zoh_grad(double delta, double a);

/// Elementwise (diagonal A) ZOH for every step: delta is L x d_model, B is
/// L x d_state.
SsmDiscretization discretize(const ConstRef& A, const ConstRef& delta, const ConstRef& B);
SsmDiscretization discretize(const SsmParams& params, const ConstRef& delta, const ConstRef& B);

/// h_t = A_bar_t h_{t-1} + B_bar_t x_t, y_t = <C_t, h_t> per channel, h_0 = 0.
/// x is L x d_model, C is L x d_state.
Matrix scan_recurrent(const SsmDiscretization& disc, const ConstRef& C, const ConstRef& x);

/// Impulse response K[j][d] = sum_n C_n A_bar[d,n]^j B_bar[d,n], j < L.
/// Requires a time-invariant discretization and a single C row.
Matrix materialize_kernel(const SsmDiscretization& disc, const Eigen::RowVectorXd& C);

/// Causal convolution y_t = sum_{tau <= t} K_{t - tau} x_tau with the
/// materialized kernel. Throws ValidationError for time-varying input.
Matrix kernel_conv(const SsmDiscretization& disc, const Eigen::RowVectorXd& C, const ConstRef& x);

/// B = x W_B^T, C = x W_C^T, delta = softplus(x W_delta^T + log_delta_bias).
/// W_B, W_C are d_state x d_model; W_delta is d_model x d_model.
SelectiveInputs selective_projection(const ConstRef& x, const ConstRef& W_B, const ConstRef& W_C,
                                     const ConstRef& W_delta, const SsmParams& params);

double softplus(double x);
double sigmoid(double x);

// ---- fused selective scan used by the autodiff tape -------------------------

/// Forward for one sequence: writes y (L x d_model) and the hidden states
/// (L x d_model x d_state, same flattening as SsmDiscretization).
void selective_scan_forward(const ConstRef& x, const ConstRef& delta, const ConstRef& A, const ConstRef& B,
                            const ConstRef& C, Eigen::Ref<Matrix> y, std::vector<double>& states);

/// Adjoint of selective_scan_forward. Gradients are accumulated (+=).
/// The adjoint state runs right to left: g_h_{t-1} = A_bar_t * g_h_t + C_{t-1} g_y_{t-1}.
void selective_scan_backward(const ConstRef& x, const ConstRef& delta, const ConstRef& A, const ConstRef& B,
                             const ConstRef& C, const std::vector<double>& states, const ConstRef& grad_y,
                             Eigen::Ref<Matrix> grad_x, Eigen::Ref<Matrix> grad_delta, Eigen::Ref<Matrix> grad_A,
                             Eigen::Ref<Matrix> grad_B, Eigen::Ref<Matrix> grad_C);

} // namespace gmn::ssm
