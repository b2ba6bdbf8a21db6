#include <doctest.h>

#include <cmath>

#include "gmn/errors.hpp"
#include "gmn/posenc.hpp"
#include "test_support.hpp"

using namespace gmn;

namespace {

// Dense matrix powers of D^-1 A: the library propagates sparsely instead.
Matrix rwse_oracle(const Graph& g, std::size_t K) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Matrix P = Matrix::Zero(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
        const auto nb = g.neighbors(static_cast<NodeId>(u));
        for (NodeId v : nb) P(u, v) = 1.0 / static_cast<double>(nb.size());
    }
    Matrix out(n, static_cast<Eigen::Index>(K));
    Matrix Pk = Matrix::Identity(n, n);
    for (std::size_t k = 0; k < K; ++k) {
        Pk = Pk * P;
        out.col(static_cast<Eigen::Index>(k)) = Pk.diagonal();
    }
    return out;
}

} // namespace

TEST_CASE("rwse examples") {
    const auto k1 = rwse(cycle_graph(5), 1);
    CHECK(k1.vectors == Matrix::Zero(5, 1));
    CHECK(k1.mode == PeMode::rwse);

    const auto tri = rwse(complete_graph(3), 2);
    for (Eigen::Index v = 0; v < 3; ++v) {
        CHECK(tri.vectors(v, 0) == 0.0);
        CHECK(tri.vectors(v, 1) == doctest::Approx(0.5).epsilon(1e-14));
    }

    const auto k2 = rwse(path_graph(2), 2);
    for (Eigen::Index v = 0; v < 2; ++v) {
        CHECK(k2.vectors(v, 0) == 0.0);
        CHECK(k2.vectors(v, 1) == doctest::Approx(1.0).epsilon(1e-14));
    }

    const auto iso = rwse(Graph(3, {{0, 1}}), 3);
    CHECK(iso.vectors.row(2).isZero());
}

TEST_CASE("rwse matches dense powers, stays in [0,1] and is permutation equivariant") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Graph g = random_bounded_degree_graph(12, 4, 16, seed);
        const auto pe = rwse(g, 6);
        CHECK(test::max_abs(pe.vectors - rwse_oracle(g, 6)) < 1e-12);
        CHECK(pe.vectors.minCoeff() >= 0.0);
        CHECK(pe.vectors.maxCoeff() <= 1.0);

        const auto perm = random_permutation(12, seed + 50);
        const auto pp = rwse(g.permuted(perm), 6);
        for (NodeId v = 0; v < 12; ++v) CHECK(test::max_abs(pp.vectors.row(perm[v]) - pe.vectors.row(v)) < 1e-14);
    }
}

TEST_CASE("lappe examples") {
    const auto k2 = lappe(path_graph(2), 1);
    REQUIRE(k2.dim() == 1);
    CHECK(k2.vectors(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(k2.vectors(1, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));

    const auto eig = jacobi_eigen(laplacian(cycle_graph(4)));
    REQUIRE(eig.values.size() == 4);
    CHECK(std::abs(eig.values(0)) < 1e-12);
    CHECK(eig.values(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eig.values(2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eig.values(3) == doctest::Approx(4.0).epsilon(1e-12));

    // The constant kernel vector is skipped: every column sums to zero.
    const auto c5 = lappe(cycle_graph(5), 3);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(c5.vectors.col(j).sum()) < 1e-10);
}

TEST_CASE("lappe eigenpairs against a reference solver") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Graph g = random_bounded_degree_graph(16, 4, 22, seed);
        const Matrix L = laplacian(g);
        const auto eig = jacobi_eigen(L);
        const Eigen::MatrixXd dense = L;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(dense);
        CHECK((eig.values - ref.eigenvalues()).cwiseAbs().maxCoeff() < 1e-9);
        for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
            const Vector q = eig.vectors.col(j);
            CHECK((L * q - eig.values(j) * q).cwiseAbs().maxCoeff() <= 1e-8);
            // Sign convention: the first entry of (near-)maximal magnitude is positive.
            const double top = q.cwiseAbs().maxCoeff();
            Eigen::Index arg = 0;
            while (std::abs(q(arg)) < top - 1e-12) ++arg;
            CHECK(q(arg) > 0.0);
        }
        const Matrix gram = eig.vectors.transpose() * eig.vectors;
        CHECK(test::max_abs(gram - Matrix::Identity(16, 16)) <= 1e-8);
        CHECK(lappe(g, 4).dim() == 4);
    }
}

TEST_CASE("lappe rejects oversized and degenerate requests") {
    CHECK_THROWS_AS(lappe(path_graph(kLapPeMaxNodes + 1), 2), CapacityError);
    CHECK_THROWS_AS(lappe(path_graph(3), 3), ValidationError);
}

TEST_CASE("concat_pe") {
    const Graph g = complete_graph(3);
    const Graph same = concat_pe(g, no_encoding(g));
    CHECK(same.node_features() == g.node_features());
    CHECK(no_encoding(g).dim() == 0);

    const Graph two = concat_pe(g, rwse(g, 2));
    CHECK(two.feature_dim() == 3);
    for (Eigen::Index v = 0; v < 3; ++v) {
        CHECK(two.node_features()(v, 0) == 1.0);
        CHECK(two.node_features()(v, 1) == 0.0);
        CHECK(two.node_features()(v, 2) == doctest::Approx(0.5).epsilon(1e-14));
    }

    CHECK_THROWS_AS(concat_pe(g, rwse(path_graph(4), 2)), ValidationError);
}
