// gmn command-line entry point.
//
// Exit codes: 0 ok, 1 validation/config error, 2 numerical failure, 3 IO error.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gmn/errors.hpp"
#include "gmn/harness.hpp"
#include "gmn/model.hpp"
#include "gmn/train.hpp"

namespace fs = std::filesystem;
using namespace gmn;

namespace {

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string format = "json";
    std::string tokens;
    std::string checkpoint;
    std::string fixture = "all";
    std::vector<std::size_t> sizes{1000, 2000, 4000, 8000};
    std::size_t repeats = 5;
    std::size_t max_coords = 2000;
    std::optional<std::uint64_t> seed;
};

TrainConfig config_or_default(const Options& o) {
    TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();
    return cfg;
}

std::vector<Graph> load_data(const Options& o) {
    if (o.data.empty()) throw ValidationError("--data is required");
    if (o.format == "edgelist") return {load_graph(o.data, GraphFormat::edgelist)};
    if (o.format != "json") throw ValidationError("unknown --format '" + o.format + "'");
    return load_dataset(o.data);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

int cmd_tokenize(const Options& o) {
    const TrainConfig cfg = config_or_default(o);
    if (cfg.m == 0) throw ValidationError("tokenize: m = 0 has no subgraph tokens");
    if (o.out.empty()) throw ValidationError("--out is required");
    const auto data = load_data(o);
    TokenCache cache{cfg.sampling(), {}};
    for (const auto& g : data) cache.graphs.push_back({g.content_hash(), tokenize_graph(g, cfg.sampling())});
    save_token_cache(cache, o.out);
    std::size_t records = 0;
    for (const auto& e : cache.graphs)
        for (const auto& s : e.sequences) records += s.tokens.size();
    std::printf("wrote %zu graphs, %zu token records to %s\n", cache.graphs.size(), records, o.out.c_str());
    return 0;
}

std::optional<std::vector<std::vector<TokenSequence>>> cached_tokens(const Options& o, const TrainConfig& cfg,
                                                                     const std::vector<Graph>& data) {
    if (o.tokens.empty()) return std::nullopt;
    auto cache = load_token_cache(o.tokens);
    const auto want = cfg.sampling();
    if (cache.params.M != want.M || cache.params.m != want.m || cache.params.s != want.s ||
        cache.params.seed != want.seed) {
        throw ValidationError("token cache was built with different sampling parameters");
    }
    if (cache.graphs.size() != data.size()) throw ValidationError("token cache covers a different number of graphs");
    std::vector<std::vector<TokenSequence>> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (cache.graphs[i].graph_hash != data[i].content_hash()) {
            throw ValidationError("token cache entry " + std::to_string(i) + " does not match the graph (hash)");
        }
        out.push_back(std::move(cache.graphs[i].sequences));
    }
    return out;
}

int cmd_train(const Options& o) {
    const TrainConfig cfg = config_or_default(o);
    if (o.out.empty()) throw ValidationError("--out is required");
    const auto data = load_data(o);
    const auto tokens = cached_tokens(o, cfg, data);
    const auto res = train(data, cfg, tokens ? &*tokens : nullptr);
    const fs::path dir(o.out);
    fs::create_directories(dir);
    save_checkpoint(res.model, dir / "checkpoint.json");
    auto csv = open_out(dir / "metrics.csv");
    write_metrics_csv(csv, res.history);
    if (!res.history.empty()) {
        const auto& last = res.history.back();
        std::printf("epoch %zu %s loss %.6f metric %.6f\n", last.epoch, last.split.c_str(), last.loss, last.metric);
    }
    std::printf("wrote %s and %s\n", (dir / "checkpoint.json").c_str(), (dir / "metrics.csv").c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw ValidationError("--checkpoint is required");
    const GMNModel model = load_checkpoint(o.checkpoint);
    TrainConfig cfg = model.config;
    cfg.val_fraction = 0.0; // every example counts as evaluated data
    const auto data = load_data(o);
    const auto tokens = cached_tokens(o, cfg, data);
    const auto examples = prepare_examples(data, cfg, tokens ? &*tokens : nullptr);
    auto row = evaluate(model, examples, false, 0);
    row.split = "eval";
    std::printf("loss %.6f metric %.6f\n", row.loss, row.metric);
    if (!o.out.empty()) {
        auto csv = open_out(o.out);
        write_metrics_csv(csv, {row});
    }
    return 0;
}

int cmd_bench(const Options& o) {
    TrainConfig cfg = config_or_default(o);
    BenchParams bp;
    bp.sizes = o.sizes;
    bp.repeats = o.repeats;
    const auto rows = run_bench(cfg, bp);
    std::ostringstream csv;
    csv << "n,median_seconds,min_seconds,warmup\n";
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%d\n", r.n, r.median_seconds, r.min_seconds, r.warmup ? 1 : 0);
        csv << buf;
    }
    std::cout << csv.str();
    for (double q : doubling_ratios(rows)) std::printf("# ratio per doubling %.3f\n", q);
    if (!o.out.empty()) {
        auto out = open_out(o.out);
        out << csv.str();
    }
    return 0;
}

int cmd_wl_check(const Options& o) {
    WlCheckParams params;
    if (o.seed) params.seed = *o.seed;
    std::vector<std::string> names = o.fixture == "all" ? wl_fixture_names() : std::vector<std::string>{o.fixture};
    bool ok = true;
    for (const auto& name : names) {
        const auto r = run_wl_check(make_wl_fixture(name, params.seed), params);
        bool expected = true;
        if (name == "k33-vs-prism") expected = r.wl_indistinguishable && r.tokens_distinguished;
        if (name == "distance-pair") expected = r.distance_equal && r.tokens_distinguished;
        if (name == "triangle-vs-p3") expected = !r.wl_indistinguishable;
        if (name == "relabel") expected = !r.tokens_distinguished;
        std::printf("%s: %s [%s]\n", name.c_str(), r.summary.c_str(), expected ? "ok" : "FAIL");
        ok = ok && expected;
    }
    return ok ? 0 : 2;
}

int cmd_grad_check(const Options& o) {
    TrainConfig cfg = config_or_default(o);
    cfg.task = TaskKind::node_class;
    cfg.val_fraction = 0.0;
    Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
    g.set_node_labels({0, 1, 0, 1, 1});
    const auto examples = prepare_examples({g}, cfg);
    GMNModel model = init_model(cfg, examples[0].input.graph.feature_dim(), 0, 2);
    const auto rep = grad_check_model(model, examples[0], 1e-5, 1e-4, o.max_coords, cfg.seed);
    std::printf("checked %zu coordinates, max rel-err %.3e (tolerance %.0e)\n", rep.entries.size(), rep.max_rel_err,
                rep.tolerance);
    for (const auto& f : rep.failures()) {
        std::printf("  %s[%ld] analytic %.9e numeric %.9e rel-err %.3e\n", f.name.c_str(), static_cast<long>(f.index),
                    f.analytic, f.numeric, f.rel_err);
    }
    return rep.passed() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph Mamba Network engine"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config");
        sub->add_option("--data", o.data, "graph or dataset file");
        sub->add_option("--out", o.out, "output path");
        sub->add_option("--format", o.format, "data format: json or edgelist");
        sub->add_option("--seed", o.seed, "override the config seed");
    };
    auto* tokenize = app.add_subcommand("tokenize", "sample and cache walk tokens");
    common(tokenize);
    auto* train_cmd = app.add_subcommand("train", "train a model; writes checkpoint.json and metrics.csv to --out");
    common(train_cmd);
    train_cmd->add_option("--tokens", o.tokens, "token cache from `tokenize`");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    common(eval);
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    eval->add_option("--tokens", o.tokens, "token cache from `tokenize`");
    auto* bench = app.add_subcommand("bench", "time tokenize + forward on random 4-regular graphs");
    common(bench);
    bench->add_option("--sizes", o.sizes, "node counts")->delimiter(',');
    bench->add_option("--repeats", o.repeats, "timed runs per size");
    auto* wl = app.add_subcommand("wl-check", "expressiveness fixtures");
    common(wl);
    wl->add_option("--fixture", o.fixture, "all, k33-vs-prism, distance-pair, triangle-vs-p3 or relabel");
    auto* grad = app.add_subcommand("grad-check", "finite-difference check on a 5-node graph");
    common(grad);
    grad->add_option("--max-coords", o.max_coords, "check a seeded sample of this many coordinates (0: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        if (*tokenize) return cmd_tokenize(o);
        if (*train_cmd) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*bench) return cmd_bench(o);
        if (*wl) return cmd_wl_check(o);
        if (*grad) return cmd_grad_check(o);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
