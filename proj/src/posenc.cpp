#include "gmn/posenc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmn/errors.hpp"

namespace gmn {

PeMode parse_pe_mode(const std::string& s) {
    if (s == "none") return PeMode::none;
    if (s == "rwse") return PeMode::rwse;
    if (s == "lappe") return PeMode::lappe;
    throw ValidationError("unknown pe mode '" + s + "' (expected none, rwse or lappe)");
}

std::string to_string(PeMode mode) {
    switch (mode) {
    case PeMode::none: return "none";
    case PeMode::rwse: return "rwse";
    case PeMode::lappe: return "lappe";
    }
    return "none";
}

PosEncoding no_encoding(const Graph& g) { return {Matrix(g.num_nodes(), 0), PeMode::none}; }

PosEncoding rwse(const Graph& g, std::size_t K) {
    if (K == 0) throw ValidationError("rwse needs K >= 1");
    const std::size_t n = g.num_nodes();
    PosEncoding pe{Matrix::Zero(n, K), PeMode::rwse};
    // Dense scratch rows, but only touched entries are visited or cleared.
    std::vector<double> cur(n, 0.0), next(n, 0.0);
    std::vector<NodeId> frontier, next_frontier;
    std::vector<char> in_next(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        if (g.degree(static_cast<NodeId>(v)) == 0) continue;
        frontier.assign(1, static_cast<NodeId>(v));
        cur[v] = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            next_frontier.clear();
            for (NodeId w : frontier) {
                const double share = cur[w] / static_cast<double>(g.degree(w));
                for (NodeId u : g.neighbors(w)) {
                    if (!in_next[u]) {
                        in_next[u] = 1;
                        next_frontier.push_back(u);
                    }
                    next[u] += share;
                }
            }
            for (NodeId w : frontier) cur[w] = 0.0;
            pe.vectors(v, k) = next[v];
            for (NodeId u : next_frontier) {
                cur[u] = next[u];
                next[u] = 0.0;
                in_next[u] = 0;
            }
            std::swap(frontier, next_frontier);
        }
        for (NodeId w : frontier) cur[w] = 0.0;
    }
    return pe;
}

Matrix laplacian(const Graph& g) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Matrix L = Matrix::Zero(n, n);
    for (auto [u, v] : g.edges()) {
        if (u == v) continue;
        L(u, v) -= 1.0;
        L(v, u) -= 1.0;
        L(u, u) += 1.0;
        L(v, v) += 1.0;
    }
    return L;
}

namespace {

void fix_sign(Eigen::Ref<Vector, 0, Eigen::InnerStride<>> v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > std::abs(v(best)) + 1e-12) best = i;
    }
    if (v(best) < 0) v = -v;
}

} // namespace

EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tol, std::size_t max_sweeps) {
    const Eigen::Index n = symmetric.rows();
    if (symmetric.cols() != n) throw ValidationError("jacobi_eigen needs a square matrix");
    Matrix a = symmetric;
    Matrix q = Matrix::Identity(n, n);
    const double scale = std::max(a.norm(), 1e-300);
    EigenDecomposition out;
    for (; out.sweeps < max_sweeps; ++out.sweeps) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index r = p + 1; r < n; ++r) off += a(p, r) * a(p, r);
        if (std::sqrt(2.0 * off) <= tol * scale) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (std::abs(apr) < 1e-300) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - s * akr;
                    a(k, r) = s * akp + c * akr;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - s * ark;
                    a(r, k) = s * apk + c * ark;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - s * qkr;
                    q(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }
    if (out.sweeps == max_sweeps) {
        throw ConvergenceError("jacobi_eigen did not converge", 0.0);
    }
    for (Eigen::Index i = 0; i < n; ++i) fix_sign(q.col(i));

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    const double tie = 1e-9 * std::max(1.0, scale);
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        const double lx = a(x, x), ly = a(y, y);
        if (std::abs(lx - ly) > tie) return lx < ly;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (q(k, x) != q(k, y)) return q(k, x) < q(k, y);
        }
        return x < y;
    });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = a(order[i], order[i]);
        out.vectors.col(i) = q.col(order[i]);
    }
    return out;
}

PosEncoding lappe(const Graph& g, std::size_t d_pe) {
    const std::size_t n = g.num_nodes();
    if (n > kLapPeMaxNodes) {
        throw CapacityError("lappe: " + std::to_string(n) + " nodes exceeds the dense solver cap of " +
                            std::to_string(kLapPeMaxNodes) + "; use rwse instead");
    }
    if (d_pe >= n) throw ValidationError("lappe needs d_pe < n");
    auto eig = jacobi_eigen(laplacian(g));
    PosEncoding pe{Matrix::Zero(n, d_pe), PeMode::lappe};
    const double zero_tol = 1e-8 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
    std::size_t col = 0;
    for (Eigen::Index i = 0; i < eig.values.size() && col < d_pe; ++i) {
        if (std::abs(eig.values(i)) <= zero_tol) continue;
        pe.vectors.col(col++) = eig.vectors.col(i);
    }
    return pe;
}

Graph concat_pe(const Graph& g, const PosEncoding& pe) {
    if (pe.mode == PeMode::none || pe.dim() == 0) return g;
    if (static_cast<std::size_t>(pe.vectors.rows()) != g.num_nodes()) {
        throw ValidationError("positional encoding has " + std::to_string(pe.vectors.rows()) + " rows for " +
                              std::to_string(g.num_nodes()) + " nodes");
    }
    Matrix x(g.num_nodes(), g.feature_dim() + pe.dim());
    x << g.node_features(), pe.vectors;
    return g.with_node_features(std::move(x));
}

} // namespace gmn
