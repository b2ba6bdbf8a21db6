#include "gmn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "gmn/errors.hpp"
#include "gmn/model.hpp"

namespace gmn {

WalkDistribution enumerate_walks(const Graph& g, NodeId v, std::size_t length) {
    if (v >= g.num_nodes()) throw ValidationError("enumerate_walks: node out of range");
    WalkDistribution out;
    Walk cur{v};
    auto rec = [&](auto&& self, double p) -> void {
        if (cur.size() == length + 1) {
            out.walks.push_back(cur);
            out.probs.push_back(p);
            return;
        }
        const auto nb = g.neighbors(cur.back());
        if (nb.empty()) {
            cur.push_back(cur.back());
            self(self, p);
            cur.pop_back();
            return;
        }
        for (NodeId u : nb) {
            cur.push_back(u);
            self(self, p / static_cast<double>(nb.size()));
            cur.pop_back();
        }
    };
    rec(rec, 1.0);
    return out;
}

Matrix expected_token_signatures(const Graph& g, std::size_t max_length, const RwfWeights& weights) {
    const std::size_t n = g.num_nodes();
    std::vector<std::vector<Walk>> walks;
    std::vector<std::vector<double>> probs;
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t len = 0; len <= max_length; ++len) {
            auto d = enumerate_walks(g, static_cast<NodeId>(v), len);
            walks.push_back(std::move(d.walks));
            probs.push_back(std::move(d.probs));
        }
    }
    const auto batch = rwf_weighted_batch(g, walks, probs, weights.window);
    ad::Tape tape;
    RwfVars vars{tape.constant(weights.conv), tape.constant(weights.conv_bias), tape.constant(weights.mix),
                 tape.constant(weights.mix_bias)};
    const Matrix tokens = rwf_encode(tape, batch, vars, weights.activation).value();
    const auto per = static_cast<Eigen::Index>(max_length + 1);
    const auto d = tokens.cols();
    Matrix out(static_cast<Eigen::Index>(n), per * d);
    for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(n); ++v)
        for (Eigen::Index l = 0; l < per; ++l) out.row(v).segment(l * d, d) = tokens.row(v * per + l);
    return out;
}

Matrix sorted_rows(const Matrix& rows, double quantum) {
    std::vector<std::vector<double>> r(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            double q = std::round(rows(i, j) / quantum) * quantum;
            r[static_cast<std::size_t>(i)].push_back(q == 0.0 ? 0.0 : q);
        }
    }
    std::sort(r.begin(), r.end());
    Matrix out(rows.rows(), rows.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        for (Eigen::Index j = 0; j < rows.cols(); ++j) out(i, j) = r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return out;
}

double multiset_gap(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    if (a.size() == 0) return 0.0;
    return (sorted_rows(a) - sorted_rows(b)).cwiseAbs().maxCoeff();
}

std::vector<Matrix> distance_signature(const Graph& g, NodeId v) {
    const auto dist = bfs_distances(g, v);
    std::size_t max_d = 0;
    for (auto d : dist)
        if (d != SIZE_MAX) max_d = std::max(max_d, d);
    std::vector<std::vector<NodeId>> groups(max_d + 1);
    for (std::size_t u = 0; u < dist.size(); ++u)
        if (dist[u] != SIZE_MAX) groups[dist[u]].push_back(static_cast<NodeId>(u));
    std::vector<Matrix> out;
    for (const auto& grp : groups) {
        Matrix rows(static_cast<Eigen::Index>(grp.size()), static_cast<Eigen::Index>(g.feature_dim()));
        for (std::size_t i = 0; i < grp.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = g.node_features().row(grp[i]);
        out.push_back(sorted_rows(rows, 1e-12));
    }
    return out;
}

bool distance_signatures_equal(const Graph& a, NodeId va, const Graph& b, NodeId vb) {
    const auto sa = distance_signature(a, va);
    const auto sb = distance_signature(b, vb);
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (sa[i].rows() != sb[i].rows() || sa[i].cols() != sb[i].cols() || sa[i] != sb[i]) return false;
    return true;
}

// ---- fixtures --------------------------------------------------------------------------

std::vector<std::string> wl_fixture_names() { return {"k33-vs-prism", "distance-pair", "triangle-vs-p3", "relabel"}; }

WlFixture make_wl_fixture(const std::string& name, std::uint64_t seed) {
    if (name == "k33-vs-prism") return {name, complete_bipartite(3, 3), triangular_prism(), 0, 0, false};
    if (name == "distance-pair") {
        // Anchor 0. Both graphs put {1,2} at distance 1, {3,4} at 2 and {5,6} at 3;
        // the first is the path 5-3-1-0-2-4-6, the second hangs 3 and 4 off node 1.
        const Matrix ids = Matrix::Identity(7, 7);
        Graph a(7, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 6}}, ids);
        Graph b(7, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {3, 5}, {4, 6}}, ids);
        return {name, std::move(a), std::move(b), 0, 0, true};
    }
    if (name == "triangle-vs-p3") return {name, complete_graph(3), path_graph(3), 0, 0, false};
    if (name == "relabel") {
        Graph g = random_bounded_degree_graph(8, 3, 10, derive_seed(seed, 0x72656cULL));
        return {name, g, g.permuted(random_permutation(8, derive_seed(seed, 0x7065726dULL))), 0, 0, false};
    }
    throw ValidationError("unknown fixture '" + name + "'");
}

WlReport run_wl_check(const WlFixture& fx, const WlCheckParams& params) {
    WlReport r;
    r.fixture = fx.name;
    if (fx.a.num_nodes() > 10 || fx.b.num_nodes() > 10) {
        throw ValidationError("fixture '" + fx.name + "' is too large for the brute-force isomorphism check");
    }
    r.isomorphic = brute_force_isomorphic(fx.a, fx.b);
    const bool expect_isomorphic = fx.name == "relabel";
    if (r.isomorphic != expect_isomorphic) {
        throw ValidationError("fixture '" + fx.name + "' self-check failed: graphs are " +
                              (r.isomorphic ? "isomorphic" : "not isomorphic"));
    }
    r.wl_indistinguishable = wl_indistinguishable(fx.a, fx.b);
    if (fx.a.feature_dim() != fx.b.feature_dim()) throw ValidationError("fixture feature widths differ");
    const auto weights = init_rwf_weights(walk_feature_width(fx.a, params.window), params.d_model, params.window,
                                          params.seed);
    const Matrix sa = expected_token_signatures(fx.a, params.max_length, weights);
    const Matrix sb = expected_token_signatures(fx.b, params.max_length, weights);
    if (fx.anchored) {
        r.distance_equal = distance_signatures_equal(fx.a, fx.anchor_a, fx.b, fx.anchor_b);
        r.token_gap = (sa.row(fx.anchor_a) - sb.row(fx.anchor_b)).cwiseAbs().maxCoeff();
    } else {
        r.token_gap = multiset_gap(sa, sb);
    }
    r.tokens_distinguished = r.token_gap > kSignatureGap;
    std::ostringstream s;
    if (fx.anchored) {
        s << "distance encoding: " << (r.distance_equal ? "EQUAL" : "DIFFERENT");
    } else {
        s << "1-WL: " << (r.wl_indistinguishable ? "INDISTINGUISHABLE" : "DISTINGUISHED");
    }
    s << "; GMN tokens: " << (r.tokens_distinguished ? "DISTINGUISHED" : "EQUAL") << " (gap " << r.token_gap << ")";
    r.summary = s.str();
    return r;
}

// ---- bench -----------------------------------------------------------------------------

std::vector<BenchRow> run_bench(const TrainConfig& cfg, const BenchParams& params) {
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    for (std::size_t n : params.sizes) {
        const Graph g = random_regular_graph(n, params.degree, derive_seed(cfg.seed, 0x62656e6368ULL, n));
        const GMNModel model = init_model(cfg, prepare_graph(path_graph(2), cfg).graph.feature_dim(), 0, 2);
        std::vector<double> times;
        for (std::size_t rep = 0; rep <= params.repeats; ++rep) {
            const auto t0 = clock::now();
            const PreparedGraph pg = prepare_graph(g, cfg);
            const Matrix out = gmn_forward(model, pg);
            if (!out.allFinite()) throw NumericalError("bench: non-finite forward output at n=" + std::to_string(n));
            times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
        times.erase(times.begin()); // warmup run
        std::sort(times.begin(), times.end());
        BenchRow row;
        row.n = n;
        row.min_seconds = times.front();
        row.median_seconds = times.size() % 2 ? times[times.size() / 2]
                                              : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
        row.warmup = n < params.warmup_below;
        rows.push_back(row);
    }
    return rows;
}

std::vector<double> doubling_ratios(const std::vector<BenchRow>& rows) {
    std::vector<double> out;
    const BenchRow* prev = nullptr;
    for (const auto& r : rows) {
        if (r.warmup) continue;
        if (prev) {
            // Normalized to one doubling when consecutive sizes are not exactly 2x apart.
            const double steps = std::log2(static_cast<double>(r.n) / static_cast<double>(prev->n));
            out.push_back(std::pow(r.median_seconds / prev->median_seconds, 1.0 / steps));
        }
        prev = &r;
    }
    return out;
}

} // namespace gmn
