#include "gmn/ssm.hpp"

#include <cmath>

#include "gmn/errors.hpp"
#include "gmn/rng.hpp"

namespace gmn::ssm {

void SsmParams::validate() const {
    if (log_delta_bias.size() != A.rows()) throw ValidationError("log_delta_bias size must equal d_model");
    if (A.size() > 0 && A.maxCoeff() >= 0.0) throw ValidationError("state matrix A must be strictly negative");
}

double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

SsmParams default_params(std::size_t d_model, std::size_t d_state, std::uint64_t seed) {
    SsmParams p;
    p.A.resize(d_model, d_state);
    for (std::size_t d = 0; d < d_model; ++d)
        for (std::size_t n = 0; n < d_state; ++n) p.A(d, n) = -static_cast<double>(n + 1);
    p.log_delta_bias.resize(d_model);
    Rng rng(seed);
    for (std::size_t d = 0; d < d_model; ++d) {
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        p.log_delta_bias(d) = dt + std::log(-std::expm1(-dt)); // softplus^-1(dt)
    }
    return p;
}

ZohScalar zoh(double delta, double a) {
    const double x = delta * a;
    const double a_bar = std::exp(x);
    if (std::abs(x) < kSeriesThreshold) {
        return {a_bar, delta * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)};
    }
    return {a_bar, std::expm1(x) / a};
}

ZohGrad zoh_grad(double delta, double a) {
    const double x = delta * a;
    const double a_bar = std::exp(x);
    ZohGrad g{};
    g.a_bar_d_delta = a * a_bar;
    g.a_bar_d_a = delta * a_bar;
    if (std::abs(x) < kSeriesThreshold) {
        g.b_factor_d_delta = 1.0 + x + x * x / 2.0 + x * x * x / 6.0;
    } else {
        g.b_factor_d_delta = a_bar;
    }
    // d/da of expm1(x)/a cancels badly for small x; use the series there.
    if (std::abs(x) < 1e-3) {
        g.b_factor_d_a = delta * delta * (0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0 + x * x * x * x / 144.0);
    } else {
        g.b_factor_d_a = (delta * a_bar - std::expm1(x) / a) / a;
    }
    return g;
}

bool SsmDiscretization::time_invariant() const {
    const std::size_t step = d_model * d_state;
    for (std::size_t t = 1; t < length; ++t) {
        for (std::size_t i = 0; i < step; ++i) {
            if (A_bar[t * step + i] != A_bar[i] || B_bar[t * step + i] != B_bar[i]) return false;
        }
    }
    return true;
}

SsmDiscretization discretize(const ConstRef& A, const ConstRef& delta, const ConstRef& B) {
    const auto L = static_cast<std::size_t>(delta.rows());
    const auto D = static_cast<std::size_t>(A.rows());
    const auto N = static_cast<std::size_t>(A.cols());
    if (static_cast<std::size_t>(delta.cols()) != D || static_cast<std::size_t>(B.rows()) != L ||
        static_cast<std::size_t>(B.cols()) != N) {
        throw ValidationError("discretize: shape mismatch");
    }
    SsmDiscretization out{L, D, N, std::vector<double>(L * D * N), std::vector<double>(L * D * N)};
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            if (!(delta(t, d) > 0.0)) throw ValidationError("discretize: delta must be positive");
            for (std::size_t n = 0; n < N; ++n) {
                const auto z = zoh(delta(t, d), A(d, n));
                out.A_bar[out.index(t, d, n)] = z.a_bar;
                out.B_bar[out.index(t, d, n)] = z.b_factor * B(t, n);
            }
        }
    }
    return out;
}

SsmDiscretization discretize(const SsmParams& params, const ConstRef& delta, const ConstRef& B) {
    params.validate();
    return discretize(params.A, delta, B);
}

Matrix scan_recurrent(const SsmDiscretization& disc, const ConstRef& C, const ConstRef& x) {
    const std::size_t L = disc.length, D = disc.d_model, N = disc.d_state;
    if (static_cast<std::size_t>(x.rows()) != L || static_cast<std::size_t>(x.cols()) != D ||
        static_cast<std::size_t>(C.rows()) != L || static_cast<std::size_t>(C.cols()) != N) {
        throw ValidationError("scan_recurrent: shape mismatch");
    }
    Matrix y = Matrix::Zero(L, D);
    std::vector<double> h(D * N, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                double& hs = h[d * N + n];
                hs = disc.A_bar[disc.index(t, d, n)] * hs + disc.B_bar[disc.index(t, d, n)] * x(t, d);
                acc += C(t, n) * hs;
            }
            y(t, d) = acc;
        }
    }
    return y;
}

Matrix materialize_kernel(const SsmDiscretization& disc, const Eigen::RowVectorXd& C) {
    if (!disc.time_invariant()) throw ValidationError("kernel form requires a time-invariant system");
    const std::size_t L = disc.length, D = disc.d_model, N = disc.d_state;
    if (static_cast<std::size_t>(C.size()) != N) throw ValidationError("kernel_conv: C must have d_state entries");
    Matrix K = Matrix::Zero(L, D);
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t n = 0; n < N; ++n) {
            const double a = L ? disc.A_bar[disc.index(0, d, n)] : 0.0;
            double power = 1.0;
            for (std::size_t j = 0; j < L; ++j) {
                K(j, d) += C(n) * power * disc.B_bar[disc.index(0, d, n)];
                power *= a;
            }
        }
    }
    return K;
}

Matrix kernel_conv(const SsmDiscretization& disc, const Eigen::RowVectorXd& C, const ConstRef& x) {
    const Matrix K = materialize_kernel(disc, C);
    const std::size_t L = disc.length, D = disc.d_model;
    if (static_cast<std::size_t>(x.rows()) != L || static_cast<std::size_t>(x.cols()) != D) {
        throw ValidationError("kernel_conv: shape mismatch");
    }
    Matrix y = Matrix::Zero(L, D);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t tau = 0; tau <= t; ++tau) y.row(t) += K.row(t - tau).cwiseProduct(x.row(tau));
    return y;
}

SelectiveInputs selective_projection(const ConstRef& x, const ConstRef& W_B, const ConstRef& W_C,
                                     const ConstRef& W_delta, const SsmParams& params) {
    const auto D = x.cols();
    if (W_B.cols() != D || W_C.cols() != D || W_delta.cols() != D || W_delta.rows() != D ||
        W_B.rows() != W_C.rows() || params.log_delta_bias.size() != D) {
        throw ValidationError("selective_projection: shape mismatch");
    }
    SelectiveInputs out;
    out.B = x * W_B.transpose();
    out.C = x * W_C.transpose();
    out.delta = x * W_delta.transpose();
    for (Eigen::Index t = 0; t < out.delta.rows(); ++t)
        for (Eigen::Index d = 0; d < D; ++d) out.delta(t, d) = softplus(out.delta(t, d) + params.log_delta_bias(d));
    return out;
}

void selective_scan_forward(const ConstRef& x, const ConstRef& delta, const ConstRef& A, const ConstRef& B,
                            const ConstRef& C, Eigen::Ref<Matrix> y, std::vector<double>& states) {
    const auto L = static_cast<std::size_t>(x.rows());
    const auto D = static_cast<std::size_t>(x.cols());
    const auto N = static_cast<std::size_t>(A.cols());
    states.assign(L * D * N, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            double acc = 0.0;
            const double dt = delta(t, d);
            const double xt = x(t, d);
            for (std::size_t n = 0; n < N; ++n) {
                const auto z = zoh(dt, A(d, n));
                const double prev = t ? states[((t - 1) * D + d) * N + n] : 0.0;
                const double h = z.a_bar * prev + z.b_factor * B(t, n) * xt;
                states[(t * D + d) * N + n] = h;
                acc += C(t, n) * h;
            }
            y(t, d) = acc;
        }
    }
}

void selective_scan_backward(const ConstRef& x, const ConstRef& delta, const ConstRef& A, const ConstRef& B,
                             const ConstRef& C, const std::vector<double>& states, const ConstRef& grad_y,
                             Eigen::Ref<Matrix> grad_x, Eigen::Ref<Matrix> grad_delta, Eigen::Ref<Matrix> grad_A,
                             Eigen::Ref<Matrix> grad_B, Eigen::Ref<Matrix> grad_C) {
    const auto L = static_cast<std::size_t>(x.rows());
    const auto D = static_cast<std::size_t>(x.cols());
    const auto N = static_cast<std::size_t>(A.cols());
    std::vector<double> gh(D * N, 0.0);
    for (std::size_t t = L; t-- > 0;) {
        for (std::size_t d = 0; d < D; ++d) {
            const double gy = grad_y(t, d);
            const double dt = delta(t, d);
            const double xt = x(t, d);
            double gx = 0.0;
            double gdt = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                double& g = gh[d * N + n];
                g += gy * C(t, n);
                grad_C(t, n) += gy * states[(t * D + d) * N + n];
                const double a = A(d, n);
                const auto z = zoh(dt, a);
                const auto dz = zoh_grad(dt, a);
                const double prev = t ? states[((t - 1) * D + d) * N + n] : 0.0;
                const double g_abar = g * prev;
                const double g_bbar = g * xt;
                gx += g * z.b_factor * B(t, n);
                gdt += g_abar * dz.a_bar_d_delta + g_bbar * dz.b_factor_d_delta * B(t, n);
                grad_A(d, n) += g_abar * dz.a_bar_d_a + g_bbar * dz.b_factor_d_a * B(t, n);
                grad_B(t, n) += g_bbar * z.b_factor;
                g *= z.a_bar;
            }
            grad_x(t, d) += gx;
            grad_delta(t, d) += gdt;
        }
    }
}

} // namespace gmn::ssm
