#include "gmn/tokenizer.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "gmn/errors.hpp"
#include "gmn/parallel.hpp"
#include "gmn/rng.hpp"

namespace gmn {

std::uint64_t token_seed(std::uint64_t seed, NodeId v, std::size_t length, std::size_t repeat) {
    return derive_seed(seed, 0x746f6b656eULL, v, length, repeat);
}

WalkSample sample_walks(const Graph& g, NodeId v, std::size_t length, std::size_t M, std::uint64_t seed) {
    if (v >= g.num_nodes()) throw ValidationError("walk origin out of range");
    if (M == 0) throw ValidationError("M must be >= 1");
    Rng rng(seed);
    WalkSample out;
    out.origin = v;
    out.length = length;
    out.walks.reserve(M);
    std::vector<NodeId> visited{v};
    for (std::size_t i = 0; i < M; ++i) {
        Walk w;
        w.reserve(length + 1);
        w.push_back(v);
        NodeId cur = v;
        for (std::size_t step = 0; step < length; ++step) {
            auto nb = g.neighbors(cur);
            if (!nb.empty()) cur = nb[rng.index(nb.size())];
            w.push_back(cur);
            visited.push_back(cur);
        }
        out.walks.push_back(std::move(w));
    }
    std::sort(visited.begin(), visited.end());
    visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
    out.visited = std::move(visited);
    return out;
}

std::vector<WalkSample> build_token_sets(const Graph& g, NodeId v, const SamplingParams& p) {
    if (p.m == 0) throw ValidationError("build_token_sets needs m >= 1 (m = 0 uses node tokens)");
    if (p.s == 0) throw ValidationError("s = 0 is not a valid repeat count when m >= 1");
    std::vector<WalkSample> out;
    out.reserve(p.s * p.m + 1);
    out.push_back(sample_walks(g, v, 0, p.M, token_seed(p.seed, v, 0, 0)));
    for (std::size_t len = 1; len <= p.m; ++len) {
        for (std::size_t rep = 1; rep <= p.s; ++rep) {
            auto sample = sample_walks(g, v, len, p.M, token_seed(p.seed, v, len, rep));
            sample.repeat = rep;
            out.push_back(std::move(sample));
        }
    }
    return out;
}

TokenSequence order_tokens(std::vector<WalkSample> samples, std::uint64_t seed) {
    TokenSequence seq;
    seq.order_mode = TokenOrderMode::reverse_hierarchy;
    if (samples.empty()) return seq;
    seq.origin = samples.front().origin;
    std::stable_sort(samples.begin(), samples.end(),
                     [](const WalkSample& a, const WalkSample& b) { return a.length > b.length; });
    Rng rng(derive_seed(seed, 0x6f72646572ULL, seq.origin));
    std::size_t begin = 0;
    while (begin < samples.size()) {
        std::size_t end = begin;
        while (end < samples.size() && samples[end].length == samples[begin].length) ++end;
        rng.shuffle(std::span<WalkSample>(samples.data() + begin, end - begin));
        begin = end;
    }
    seq.tokens = std::move(samples);
    return seq;
}

std::vector<NodeId> node_token_mode(const Graph& g, const NodeOrdering& ordering) {
    if (ordering.permutation.size() != g.num_nodes()) throw ValidationError("ordering size mismatch");
    return ordering.permutation;
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("GMN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TokenSequence> tokenize_graph(const Graph& g, const SamplingParams& p) {
    const std::size_t n = g.num_nodes();
    std::vector<TokenSequence> out(n);
    const std::size_t threads = std::min<std::size_t>(worker_threads(), std::max<std::size_t>(1, n / 64));
    parallel_for(n, threads, [&](std::size_t v) {
        out[v] = order_tokens(build_token_sets(g, static_cast<NodeId>(v), p), p.seed);
    });
    return out;
}

// ---- cache ----------------------------------------------------------------

using nlohmann::json;

json token_cache_to_json(const TokenCache& cache) {
    json doc;
    doc["format"] = "gmn_tokens_v1";
    doc["M"] = cache.params.M;
    doc["m"] = cache.params.m;
    doc["s"] = cache.params.s;
    doc["seed"] = cache.params.seed;
    json graphs = json::array();
    for (const auto& entry : cache.graphs) {
        json nodes = json::array();
        for (const auto& seq : entry.sequences) {
            json tokens = json::array();
            for (const auto& t : seq.tokens) {
                tokens.push_back({{"origin", t.origin},
                                  {"length", t.length},
                                  {"repeat", t.repeat},
                                  {"visited", t.visited},
                                  {"walks", t.walks}});
            }
            nodes.push_back({{"origin", seq.origin}, {"tokens", std::move(tokens)}});
        }
        graphs.push_back({{"graph_hash", entry.graph_hash}, {"nodes", std::move(nodes)}});
    }
    doc["graphs"] = std::move(graphs);
    return doc;
}

TokenCache token_cache_from_json(const json& doc) {
    try {
        if (doc.at("format") != "gmn_tokens_v1") throw ValidationError("unsupported token cache format");
        TokenCache cache;
        cache.params.M = doc.at("M").get<std::size_t>();
        cache.params.m = doc.at("m").get<std::size_t>();
        cache.params.s = doc.at("s").get<std::size_t>();
        cache.params.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& g : doc.at("graphs")) {
            TokenCacheEntry entry;
            entry.graph_hash = g.at("graph_hash").get<std::string>();
            for (const auto& node : g.at("nodes")) {
                TokenSequence seq;
                seq.origin = node.at("origin").get<NodeId>();
                for (const auto& t : node.at("tokens")) {
                    WalkSample w;
                    w.origin = t.at("origin").get<NodeId>();
                    w.length = t.at("length").get<std::size_t>();
                    w.repeat = t.at("repeat").get<std::size_t>();
                    w.visited = t.at("visited").get<std::vector<NodeId>>();
                    w.walks = t.at("walks").get<std::vector<Walk>>();
                    seq.tokens.push_back(std::move(w));
                }
                entry.sequences.push_back(std::move(seq));
            }
            cache.graphs.push_back(std::move(entry));
        }
        return cache;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed token cache: ") + e.what());
    }
}

void save_token_cache(const TokenCache& cache, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << token_cache_to_json(cache).dump() << '\n';
}

TokenCache load_token_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return token_cache_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

} // namespace gmn
