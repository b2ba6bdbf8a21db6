#pragma once

#include <string>
#include <vector>

#include "gmn/config.hpp"
#include "gmn/encoder.hpp"

namespace gmn {

// ---- walk-token signatures -------------------------------------------------------

/// Every walk of exactly `length` steps from v with its probability under the
/// uniform random walk (a degree-0 node stays put with probability 1).
struct WalkDistribution {
    std::vector<Walk> walks;
    std::vector<double> probs;
};
WalkDistribution enumerate_walks(const Graph& g, NodeId v, std::size_t length);

/// Per node: the expected walk-feature token (M -> infinity limit of the
/// sampled token) for each length 0..max_length, concatenated. n x (m+1)d.
Matrix expected_token_signatures(const Graph& g, std::size_t max_length, const RwfWeights& weights);

/// Rows quantized to `quantum` and sorted lexicographically.
Matrix sorted_rows(const Matrix& rows, double quantum = 1e-9);

/// Max entrywise gap between two sorted multisets of rows; infinity when the
/// shapes differ.
double multiset_gap(const Matrix& a, const Matrix& b);

/// Per distance d = 0, 1, ...: the sorted multiset of feature rows at distance
/// d from v. Two anchors with equal signatures are indistinguishable to any
/// method that only groups nodes by distance.
std::vector<Matrix> distance_signature(const Graph& g, NodeId v);
bool distance_signatures_equal(const Graph& a, NodeId va, const Graph& b, NodeId vb);

// ---- fixtures ------------------------------------------------------------------------

struct WlFixture {
    std::string name;
    Graph a, b;
    NodeId anchor_a = 0, anchor_b = 0;
    bool anchored = false; // compare one anchor node instead of whole graphs
};

/// k33-vs-prism, distance-pair, triangle-vs-p3, relabel.
std::vector<std::string> wl_fixture_names();
WlFixture make_wl_fixture(const std::string& name, std::uint64_t seed = 0);

struct WlReport {
    std::string fixture;
    bool isomorphic = false;       // brute force
    bool wl_indistinguishable = false;
    bool distance_equal = false;   // anchored fixtures only
    double token_gap = 0.0;
    bool tokens_distinguished = false;
    std::string summary;
};

struct WlCheckParams {
    std::size_t max_length = 3;
    std::size_t window = 3;
    std::size_t d_model = 16;
    std::uint64_t seed = 0;
};

/// Gap above which token signatures count as distinguished.
inline constexpr double kSignatureGap = 1e-6;

/// Runs one fixture. Throws ValidationError when the fixture's own
/// construction check fails (e.g. a pair meant to differ is isomorphic).
WlReport run_wl_check(const WlFixture& fixture, const WlCheckParams& params);

// ---- scaling bench ----------------------------------------------------------------

struct BenchRow {
    std::size_t n = 0;
    double median_seconds = 0.0;
    double min_seconds = 0.0;
    bool warmup = false; // below the fit threshold, excluded from ratios
};

struct BenchParams {
    std::vector<std::size_t> sizes{1000, 2000, 4000, 8000};
    std::size_t degree = 4;
    std::size_t repeats = 5;
    std::size_t warmup_below = 500;
};

/// Times tokenize + prepare + one forward pass of a freshly initialized model
/// on random regular graphs. The first run at each size is discarded.
std::vector<BenchRow> run_bench(const TrainConfig& cfg, const BenchParams& params);

/// Median-time ratio per doubling of n between consecutive non-warmup rows.
std::vector<double> doubling_ratios(const std::vector<BenchRow>& rows);

} // namespace gmn
