#include <doctest.h>

#include <cmath>

#include "gmn/encoder.hpp"
#include "gmn/errors.hpp"
#include "test_support.hpp"

using namespace gmn;

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Plain loops, one node at a time.
Eigen::RowVectorXd mpnn_oracle(const Graph& g, const MpnnWeights& w, std::size_t rounds) {
    Matrix h = g.node_features();
    for (std::size_t r = 0; r < rounds; ++r) {
        const auto& l = w.layers[r];
        Matrix next(h.rows(), l.W_self.rows());
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            Eigen::RowVectorXd agg = Eigen::RowVectorXd::Zero(h.cols());
            for (NodeId u : g.neighbors(v)) agg += h.row(u);
            if (g.degree(v) > 0) agg /= static_cast<double>(g.degree(v));
            Eigen::RowVectorXd z = h.row(v) * l.W_self.transpose() + agg * l.W_nbr.transpose() + l.bias;
            if (w.activation == ad::Activation::silu) z = z.unaryExpr([](double x) { return silu(x); });
            next.row(v) = z;
        }
        h = next;
    }
    return h.colwise().mean();
}

Eigen::RowVectorXd rwf_oracle(const std::vector<WalkFeatures>& walks, const RwfWeights& w) {
    Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(w.conv.rows());
    for (const auto& f : walks) {
        const Eigen::Index width = f.rows.cols();
        Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(w.conv.rows());
        for (Eigen::Index t = 0; t < f.rows.rows(); ++t) {
            Eigen::RowVectorXd z = w.conv_bias;
            for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(w.window) && k <= t; ++k)
                z += f.rows.row(t - k) * w.conv.middleCols(k * width, width).transpose();
            z = z.unaryExpr([](double x) { return silu(x); });
            Eigen::RowVectorXd y = z * w.mix.transpose() + w.mix_bias;
            pooled += y.unaryExpr([](double x) { return silu(x); });
        }
        total += pooled / static_cast<double>(f.rows.rows());
    }
    return total / static_cast<double>(walks.size());
}

MpnnWeights scalar_weights(double self, double nbr) {
    MpnnWeights w;
    w.layers.push_back({Matrix::Constant(1, 1, self), Matrix::Constant(1, 1, nbr), Matrix::Zero(1, 1)});
    w.activation = ad::Activation::identity;
    return w;
}

} // namespace

TEST_CASE("encode_mpnn examples") {
    MpnnWeights zero;
    zero.layers.push_back({Matrix::Zero(3, 2), Matrix::Zero(3, 2), Matrix::Zero(1, 3)});
    const Graph single(1, {}, Matrix::Constant(1, 2, 5.0));
    CHECK(encode_mpnn(single, 1, zero).isZero());

    Rng rng(1);
    const Graph g = cycle_graph(5).with_node_features(test::random_matrix(rng, 5, 3));
    MpnnWeights bypass;
    bypass.layers.push_back({Matrix::Identity(3, 3), Matrix::Zero(3, 3), Matrix::Zero(1, 3)});
    bypass.activation = ad::Activation::identity;
    CHECK(test::max_abs(encode_mpnn(g, 1, bypass) - g.node_features().colwise().mean()) < 1e-14);

    Matrix x(2, 1);
    x << 1, 3;
    const Graph k2 = path_graph(2).with_node_features(x);
    const auto tok = encode_mpnn(k2, 1, scalar_weights(1, 1));
    REQUIRE(tok.size() == 1);
    CHECK(tok(0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("encode_mpnn matches a loop oracle and errors") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng rng(seed);
        const Graph g =
            random_bounded_degree_graph(9, 3, 9, seed).with_node_features(test::random_matrix(rng, 9, 4));
        const auto w = init_mpnn_weights(4, 6, 2, seed);
        CHECK(test::max_abs(encode_mpnn(g, 2, w) - mpnn_oracle(g, w, 2)) < 1e-12);
    }
    const auto w = init_mpnn_weights(2, 3, 1, 0);
    CHECK_THROWS_AS(encode_mpnn(path_graph(3), 1, w), ValidationError);
    CHECK_THROWS_AS(encode_mpnn(Graph(0, {}), 1, w), ValidationError);
    CHECK_THROWS_AS(encode_mpnn(path_graph(3).with_node_features(Matrix::Ones(3, 2)), 2, w), ValidationError);
}

TEST_CASE("encode_mpnn is invariant to node relabeling") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Graph g =
            random_bounded_degree_graph(10, 4, 14, seed).with_node_features(test::random_matrix(rng, 10, 3));
        const auto w = init_mpnn_weights(3, 5, 2, seed + 1);
        const Graph h = g.permuted(random_permutation(10, seed + 2));
        CHECK(test::max_abs(encode_mpnn(g, 2, w) - encode_mpnn(h, 2, w)) < 1e-12);
    }
}

TEST_CASE("build_walk_features examples") {
    const Graph tri = complete_graph(3);
    const auto single = build_walk_features(tri, {1}, 3);
    CHECK(single.rows.rows() == 1);
    CHECK(single.rows.rightCols(4).isZero());
    CHECK(walk_feature_width(tri, 3) == 5);

    // Columns: [x | id offsets 1..3 | adj offsets 1..3].
    const auto f = build_walk_features(tri, {0, 1, 2, 0}, 4);
    REQUIRE(f.rows.cols() == 7);
    CHECK(f.rows(3, 1) == 0.0);
    CHECK(f.rows(3, 2) == 0.0);
    CHECK(f.rows(3, 3) == 1.0);
    CHECK(f.rows(3, 4) == 1.0);
    CHECK(f.rows(3, 5) == 1.0);
    CHECK(f.rows(3, 6) == 0.0);

    // P3 walk 0-1-0, w = 3: [x | id1 id2 | adj1 adj2].
    const auto p = build_walk_features(path_graph(3), {0, 1, 0}, 3);
    Matrix expect(3, 5);
    expect << 1, 0, 0, 0, 0,
              1, 0, 0, 1, 0,
              1, 0, 1, 1, 0;
    CHECK(p.rows == expect);

    CHECK_THROWS_AS(build_walk_features(path_graph(3), {0, 2}, 3), ValidationError);
    CHECK_THROWS_AS(build_walk_features(path_graph(3), {0, 0}, 3), ValidationError);
    CHECK_NOTHROW(build_walk_features(Graph(2, {}), {1, 1, 1}, 3));
    CHECK_THROWS_AS(build_walk_features(path_graph(3), {}, 3), ValidationError);
}

TEST_CASE("walk features include edge features and commute with relabeling") {
    Matrix ef(2, 2);
    ef << 1, 2,
          3, 4;
    const Graph g(3, {{0, 1}, {1, 2}}, {}, ef);
    const auto f = build_walk_features(g, {0, 1, 2}, 2);
    REQUIRE(f.rows.cols() == 1 + 2 + 2);
    CHECK(f.rows.row(0).segment(1, 2).isZero());
    CHECK(f.rows(1, 1) == 1.0);
    CHECK(f.rows(2, 2) == 4.0);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Graph h = random_bounded_degree_graph(10, 4, 15, seed);
        const auto perm = random_permutation(10, seed + 7);
        const Graph hp = h.permuted(perm);
        const auto s = sample_walks(h, 0, 6, 5, seed);
        for (const auto& w : s.walks) {
            Walk wp;
            for (NodeId v : w) wp.push_back(perm[v]);
            CHECK(build_walk_features(h, w, 4).rows == build_walk_features(hp, wp, 4).rows);
        }
    }
}

TEST_CASE("walk_im2col is causal") {
    const auto f = build_walk_features(path_graph(3), {0, 1, 2}, 2);
    const Matrix cols = walk_im2col(f);
    const Eigen::Index w = f.rows.cols();
    CHECK(cols.rows() == 3);
    CHECK(cols.row(0).segment(w, w).isZero());
    CHECK(cols.row(2).segment(0, w) == f.rows.row(2));
    CHECK(cols.row(2).segment(w, w) == f.rows.row(1));
}

TEST_CASE("encode_rwf") {
    const Graph zero = cycle_graph(4).with_node_features(Matrix::Zero(4, 2));
    RwfWeights w = init_rwf_weights(walk_feature_width(zero, 3), 5, 3, 2);
    w.conv_bias.setZero();
    w.mix_bias.setZero();
    // Zero features on a length-0 walk leave every flag at 0 as well.
    const std::vector<WalkFeatures> origin{build_walk_features(zero, {0}, 3)};
    CHECK(encode_rwf(origin, w).isZero());

    Rng rng(3);
    const Graph g = cycle_graph(6).with_node_features(test::random_matrix(rng, 6, 2));
    const auto weights = init_rwf_weights(walk_feature_width(g, 3), 4, 3, 11);
    const std::vector<WalkFeatures> single{build_walk_features(g, {2}, 3)};
    CHECK(test::max_abs(encode_rwf(single, weights) - rwf_oracle(single, weights)) < 1e-12);

    const auto s = sample_walks(g, 1, 5, 6, 4);
    std::vector<WalkFeatures> walks;
    for (const auto& walk : s.walks) walks.push_back(build_walk_features(g, walk, 3));
    CHECK(test::max_abs(encode_rwf(walks, weights) - rwf_oracle(walks, weights)) < 1e-12);

    std::vector<WalkFeatures> reversed(walks.rbegin(), walks.rend());
    CHECK(test::max_abs(encode_rwf(walks, weights) - encode_rwf(reversed, weights)) < 1e-12);

    CHECK_THROWS_AS(encode_rwf(std::vector<WalkFeatures>{}, weights), ValidationError);
}

TEST_CASE("three-step returns separate the triangle from C6") {
    // Multiset of length-3 walk feature matrices over all walks from node 0.
    auto flags = [](const Graph& g) {
        std::vector<std::vector<double>> out;
        const auto n0 = g.neighbors(0);
        for (NodeId a : n0)
            for (NodeId b : g.neighbors(a))
                for (NodeId c : g.neighbors(b)) {
                    const auto f = build_walk_features(g, {0, a, b, c}, 4);
                    out.emplace_back(f.rows.data(), f.rows.data() + f.rows.size());
                }
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto tri = flags(complete_graph(3));
    const auto c6 = flags(cycle_graph(6));
    CHECK(tri != c6);
    bool tri_returns = false;
    for (const auto& r : tri) tri_returns = tri_returns || r[3 * 7 + 3] == 1.0;
    bool c6_returns = false;
    for (const auto& r : c6) c6_returns = c6_returns || r[3 * 7 + 3] == 1.0;
    CHECK(tri_returns);
    CHECK_FALSE(c6_returns);
}
