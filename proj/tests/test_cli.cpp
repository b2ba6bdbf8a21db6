#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "gmn/model.hpp"
#include "gmn/train.hpp"
#include "test_support.hpp"

using namespace gmn;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run gmn_cli(const std::string& args, const fs::path& dir) {
    const fs::path log = dir / "cli.log";
    const std::string cmd = std::string(GMN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_file(log)};
}

TrainConfig cli_config() {
    TrainConfig cfg;
    cfg.task = TaskKind::graph_class;
    cfg.M = 4;
    cfg.m = 2;
    cfg.s = 3;
    cfg.n_token_layers = 1;
    cfg.n_node_layers = 1;
    cfg.d_model = 4;
    cfg.d_state = 2;
    cfg.conv_width = 2;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg.off_grid = true;
    return cfg;
}

void write_dataset(const fs::path& path, bool labels) {
    nlohmann::json graphs = nlohmann::json::array();
    for (std::size_t i = 0; i < 6; ++i) {
        Graph g = i % 2 ? cycle_graph(10) : path_graph(10);
        if (labels) g.set_graph_label(static_cast<double>(i % 2));
        graphs.push_back(graph_to_json(g));
    }
    test::write_file(path, nlohmann::json{{"graphs", graphs}}.dump());
}

} // namespace

TEST_CASE("tokenize is reproducible and writes one record per token") {
    const auto dir = test::scratch_dir("cli_tokenize");
    test::write_file(dir / "cfg.json", config_to_json(cli_config()).dump());
    write_dataset(dir / "data.json", true);
    const std::string base = "tokenize --config " + (dir / "cfg.json").string() + " --data " + (dir / "data.json").string();
    REQUIRE(gmn_cli(base + " --out " + (dir / "a.json").string(), dir).code == 0);
    REQUIRE(gmn_cli(base + " --out " + (dir / "b.json").string(), dir).code == 0);
    CHECK(test::read_file(dir / "a.json") == test::read_file(dir / "b.json"));

    const auto cache = load_token_cache(dir / "a.json");
    REQUIRE(cache.graphs.size() == 6);
    std::size_t records = 0;
    for (const auto& seq : cache.graphs[0].sequences) records += seq.tokens.size();
    CHECK(records == 10 * 7);

    const auto other = gmn_cli(base + " --seed 6 --out " + (dir / "c.json").string(), dir);
    CHECK(other.code == 0);
    CHECK(test::read_file(dir / "a.json") != test::read_file(dir / "c.json"));
}

TEST_CASE("train with a cached token file, then eval") {
    const auto dir = test::scratch_dir("cli_train");
    const TrainConfig cfg = cli_config();
    test::write_file(dir / "cfg.json", config_to_json(cfg).dump());
    write_dataset(dir / "data.json", true);
    const std::string common = " --config " + (dir / "cfg.json").string() + " --data " + (dir / "data.json").string();
    REQUIRE(gmn_cli("tokenize" + common + " --out " + (dir / "tok.json").string(), dir).code == 0);

    const auto cached = gmn_cli("train" + common + " --tokens " + (dir / "tok.json").string() + " --out " +
                                    (dir / "run1").string(),
                                dir);
    REQUIRE(cached.code == 0);
    const auto fresh = gmn_cli("train" + common + " --out " + (dir / "run2").string(), dir);
    REQUIRE(fresh.code == 0);
    // Tokens from the cache are the ones train would sample itself.
    CHECK(test::read_file(dir / "run1" / "metrics.csv") == test::read_file(dir / "run2" / "metrics.csv"));
    CHECK(test::read_file(dir / "run1" / "metrics.csv").starts_with("epoch,split,loss,metric\n"));

    const auto eval = gmn_cli("eval" + common + " --checkpoint " + (dir / "run1" / "checkpoint.json").string() +
                                  " --out " + (dir / "eval.csv").string(),
                              dir);
    CHECK(eval.code == 0);
    CHECK(test::read_file(dir / "eval.csv").find(",eval,") != std::string::npos);

    // A cache built with other sampling parameters is refused.
    TrainConfig other = cfg;
    other.M = 2;
    test::write_file(dir / "other.json", config_to_json(other).dump());
    const auto mismatch = gmn_cli("train --config " + (dir / "other.json").string() + " --data " +
                                      (dir / "data.json").string() + " --tokens " + (dir / "tok.json").string() +
                                      " --out " + (dir / "run3").string(),
                                  dir);
    CHECK(mismatch.code == 1);
}

TEST_CASE("epochs = 0 writes the initialization") {
    const auto dir = test::scratch_dir("cli_epochs0");
    TrainConfig cfg = cli_config();
    cfg.epochs = 0;
    test::write_file(dir / "cfg.json", config_to_json(cfg).dump());
    write_dataset(dir / "data.json", true);
    REQUIRE(gmn_cli("train --config " + (dir / "cfg.json").string() + " --data " + (dir / "data.json").string() +
                        " --out " + (dir / "run").string(),
                    dir)
                .code == 0);
    const auto model = load_checkpoint(dir / "run" / "checkpoint.json");
    CHECK(model.params == init_model(cfg, 1, 0, 2).params);
}

TEST_CASE("exit codes") {
    const auto dir = test::scratch_dir("cli_errors");
    test::write_file(dir / "cfg.json", config_to_json(cli_config()).dump());
    write_dataset(dir / "nolabels.json", false);
    const std::string cfg = " --config " + (dir / "cfg.json").string();

    const auto missing_labels =
        gmn_cli("train" + cfg + " --data " + (dir / "nolabels.json").string() + " --out " + (dir / "o").string(), dir);
    CHECK(missing_labels.code == 1);
    CHECK(missing_labels.output.find("label") != std::string::npos);

    CHECK(gmn_cli("train" + cfg + " --data " + (dir / "absent.json").string() + " --out " + (dir / "o").string(), dir)
              .code == 3);

    test::write_file(dir / "typo.json", R"({"epochz": 3})");
    CHECK(gmn_cli("train --config " + (dir / "typo.json").string() + " --data x --out y", dir).code == 1);
    CHECK(gmn_cli("frobnicate", dir).code == 1);
    CHECK(gmn_cli("eval --data x", dir).code == 1);
}

TEST_CASE("wl-check reports the expected verdicts") {
    const auto dir = test::scratch_dir("cli_wl");
    const auto all = gmn_cli("wl-check", dir);
    CHECK(all.code == 0);
    CHECK(all.output.find("k33-vs-prism: 1-WL: INDISTINGUISHABLE; GMN tokens: DISTINGUISHED") != std::string::npos);
    CHECK(all.output.find("triangle-vs-p3: 1-WL: DISTINGUISHED") != std::string::npos);
    CHECK(all.output.find("distance-pair: distance encoding: EQUAL; GMN tokens: DISTINGUISHED") != std::string::npos);
    CHECK(all.output.find("relabel: 1-WL: INDISTINGUISHABLE; GMN tokens: EQUAL") != std::string::npos);
    CHECK(all.output.find("FAIL") == std::string::npos);
    CHECK(gmn_cli("wl-check --fixture nope", dir).code == 1);
}

TEST_CASE("grad-check and bench run") {
    const auto dir = test::scratch_dir("cli_grad");
    test::write_file(dir / "cfg.json", config_to_json(cli_config()).dump());
    const auto grad = gmn_cli("grad-check --max-coords 300 --config " + (dir / "cfg.json").string(), dir);
    CHECK(grad.code == 0);
    CHECK(grad.output.find("checked 300 coordinates") != std::string::npos);

    const auto bench = gmn_cli("bench --sizes 200,600 --repeats 1 --config " + (dir / "cfg.json").string() +
                                   " --out " + (dir / "bench.csv").string(),
                               dir);
    CHECK(bench.code == 0);
    const std::string table = test::read_file(dir / "bench.csv");
    CHECK(table.starts_with("n,median_seconds,min_seconds,warmup\n"));
    CHECK(table.find("\n200,") != std::string::npos);
    CHECK(table.find(",1\n") != std::string::npos);
    CHECK(table.find(",0\n") != std::string::npos);
}
