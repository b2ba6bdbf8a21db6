#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmn/graph.hpp"

namespace gmn {

using Walk = std::vector<NodeId>;

/// Union of M random walks of one length from one origin. The raw walks are
/// kept because the walk-feature encoder consumes them directly.
struct WalkSample {
    NodeId origin = 0;
    std::size_t length = 0;
    std::size_t repeat = 0;      // 1..s; 0 for the single length-0 token
    std::vector<NodeId> visited; // sorted
    std::vector<Walk> walks;

    friend bool operator==(const WalkSample&, const WalkSample&) = default;
};

enum class TokenOrderMode { reverse_hierarchy, node_only };

struct TokenSequence {
    NodeId origin = 0;
    std::vector<WalkSample> tokens; // model-input order
    TokenOrderMode order_mode = TokenOrderMode::reverse_hierarchy;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct SamplingParams {
    std::size_t M = 1;  // walks per token
    std::size_t m = 1;  // max walk length
    std::size_t s = 1;  // repeats per length
    std::uint64_t seed = 0;
};

/// M simple random walks of exactly `length` steps from v (uniform over
/// neighbors, backtracking allowed). A walk at a degree-0 node stays there.
WalkSample sample_walks(const Graph& g, NodeId v, std::size_t length, std::size_t M, std::uint64_t seed);

/// Seed for the (v, length, repeat) token; independent of sampling order.
std::uint64_t token_seed(std::uint64_t seed, NodeId v, std::size_t length, std::size_t repeat);

/// One length-0 sample then, for each length 1..m and repeat 1..s, a sample
/// seeded by token_seed(). Returns s*m + 1 samples in generation order.
std::vector<WalkSample> build_token_sets(const Graph& g, NodeId v, const SamplingParams& p);

/// Descending length; equal-length blocks permuted with a seeded shuffle;
/// the length-0 token last.
TokenSequence order_tokens(std::vector<WalkSample> samples, std::uint64_t seed);

/// m = 0 mode: the whole-graph node sequence in ordering order.
std::vector<NodeId> node_token_mode(const Graph& g, const NodeOrdering& ordering);

/// build_token_sets + order_tokens for every node. Parallel across nodes
/// (GMN_THREADS caps worker count); output independent of thread count.
std::vector<TokenSequence> tokenize_graph(const Graph& g, const SamplingParams& p);

// ---- cache ----------------------------------------------------------------

/// Tokens for one graph plus the key they were produced under.
struct TokenCacheEntry {
    std::string graph_hash;
    std::vector<TokenSequence> sequences;
};

struct TokenCache {
    SamplingParams params;
    std::vector<TokenCacheEntry> graphs;
};

nlohmann::json token_cache_to_json(const TokenCache& cache);
TokenCache token_cache_from_json(const nlohmann::json& doc);
void save_token_cache(const TokenCache& cache, const std::filesystem::path& path);
TokenCache load_token_cache(const std::filesystem::path& path);

/// Number of worker threads from GMN_THREADS (default: hardware concurrency).
std::size_t worker_threads();

} // namespace gmn
