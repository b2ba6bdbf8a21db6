// One line per acceptance criterion; exit status is nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gmn/harness.hpp"
#include "gmn/model.hpp"
#include "gmn/ssm.hpp"
#include "gmn/train.hpp"

using namespace gmn;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& body) {
    const auto t0 = clock_type::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

// ---- 1 --------------------------------------------------------------------------------

Outcome scan_conv_equivalence() {
    Rng rng(101);
    double worst = 0.0;
    const auto t0 = clock_type::now();
    for (int trial = 0; trial < 100; ++trial) {
        const auto L = static_cast<Eigen::Index>(1 + rng.index(64));
        const auto N = static_cast<Eigen::Index>(1 + rng.index(16));
        const auto D = static_cast<Eigen::Index>(1 + rng.index(4));
        const Matrix A = random_matrix(rng, D, N, -2.0, -0.05);
        const Matrix delta = random_matrix(rng, 1, D, 0.01, 1.0).replicate(L, 1);
        const Matrix B = random_matrix(rng, 1, N).replicate(L, 1);
        const Eigen::RowVectorXd c = random_matrix(rng, 1, N);
        const Matrix C = c.replicate(L, 1);
        const Matrix x = random_matrix(rng, L, D);
        const auto disc = ssm::discretize(A, delta, B);
        const Matrix y_scan = ssm::scan_recurrent(disc, C, x);
        const Matrix y_conv = ssm::kernel_conv(disc, c, x);
        const double scale = std::max(y_scan.cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (y_scan - y_conv).cwiseAbs().maxCoeff() / scale);
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-8 && t < 5.0, fmt("max rel-err %.3e over 100 instances", worst) + fmt(", %.3fs (< 5s)", t)};
}

// ---- 2 --------------------------------------------------------------------------------

Outcome zoh_limits() {
    double worst_small = 0.0, worst_large = 0.0;
    for (double a : {-0.01, -0.5, -1.0, -3.0, -16.0}) {
        const double delta = 1e-8;
        const auto z = ssm::zoh(delta, a);
        worst_small = std::max(worst_small, std::abs(z.a_bar - 1.0));
        worst_small = std::max(worst_small, std::abs(z.b_factor / delta - 1.0)); // B_bar / delta vs B
        worst_large = std::max(worst_large, ssm::zoh(1e4, a).a_bar);
    }
    return {worst_small <= 1e-6 && worst_large <= 1e-10,
            fmt("delta=1e-8 max rel-err %.3e", worst_small) + fmt("; delta=1e4 max A_bar %.3e", worst_large)};
}

// ---- 3 --------------------------------------------------------------------------------

TrainConfig small_config() {
    TrainConfig c;
    c.task = TaskKind::node_class;
    c.M = 4;
    c.m = 2;
    c.s = 2;
    c.n_token_layers = 2;
    c.n_node_layers = 1;
    c.d_model = 4;
    c.d_state = 3;
    c.conv_width = 3;
    c.expansion = 2;
    c.encoder = EncoderKind::rwf;
    c.rwf_window = 3;
    c.pe = PeMode::rwse;
    c.pe_dim = 3;
    c.val_fraction = 0.0;
    c.seed = 7;
    return c;
}

Outcome gradient_check() {
    const auto t0 = clock_type::now();
    Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
    g.set_node_labels({0, 1, 0, 1, 1});
    const TrainConfig cfg = small_config();
    auto examples = prepare_examples({g}, cfg);
    GMNModel model = init_model(cfg, examples[0].input.graph.feature_dim(), 0, 2);
    std::size_t count = 0;
    for (const auto& [name, p] : model.params) count += static_cast<std::size_t>(p.size());
    const auto rep = grad_check_model(model, examples[0]);
    const double t = seconds_since(t0);
    std::string detail = fmt("%.0f parameters, ", static_cast<double>(count)) +
                         fmt("max rel-err %.3e", rep.max_rel_err) + fmt(", %.1fs (< 120s)", t);
    for (const auto& f : rep.failures()) {
        detail += "; " + f.name + "[" + std::to_string(f.index) + "] analytic " + fmt("%.6e", f.analytic) +
                  " numeric " + fmt("%.6e", f.numeric);
        break;
    }
    return {rep.passed() && rep.entries.size() == count && t < 120.0, detail};
}

// ---- 4 --------------------------------------------------------------------------------

Outcome reversal_equivariance() {
    Rng rng(404);
    ad::ParamMap params;
    const BiMambaWeights w{"layer", true};
    const MambaDims dims{8, 4, 4, 2};
    init_bimamba(params, w, dims, rng);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto L = 1 + rng.index(24);
        const Matrix x = random_matrix(rng, static_cast<Eigen::Index>(L), 8);
        ad::Tape tape;
        const Matrix y = bimamba(tape, tape.constant(x), params, w, L).value();
        const Matrix y_rev = bimamba(tape, tape.constant(x.colwise().reverse()), params, w, L).value();
        worst = std::max(worst, (y_rev - y.colwise().reverse()).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-12, fmt("max |bimamba(rev x) - rev bimamba(x)| = %.3e over 50 sequences", worst)};
}

// ---- 5 --------------------------------------------------------------------------------

Outcome coverage() {
    int hits[4] = {0, 0, 0, 0};
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(derive_seed(505, trial));
        const std::size_t n = 5 + rng.index(16);
        const std::size_t edges = n - 1 + rng.index(n);
        const Graph g = random_bounded_degree_graph(n, 4, edges, rng.next());
        const auto v = static_cast<NodeId>(rng.index(n));
        for (std::size_t k = 1; k <= 3; ++k) {
            const auto sample = sample_walks(g, v, k, 1000, rng.next());
            if (sample.visited == k_hop_neighborhood(g, v, k)) ++hits[k];
        }
    }
    const bool ok = hits[1] >= 99 && hits[2] >= 99 && hits[3] >= 99;
    return {ok, "exact k-hop recovery in " + std::to_string(hits[1]) + "/" + std::to_string(hits[2]) + "/" +
                    std::to_string(hits[3]) + " of 100 trials for k=1/2/3 (need >= 99)"};
}

// ---- 6 --------------------------------------------------------------------------------

Outcome beyond_wl() {
    const WlCheckParams params;
    const auto a = run_wl_check(make_wl_fixture("k33-vs-prism"), params);
    const auto b = run_wl_check(make_wl_fixture("distance-pair"), params);
    const bool ok = a.wl_indistinguishable && a.tokens_distinguished && b.distance_equal && b.tokens_distinguished;
    return {ok, "(a) " + a.summary + "; (b) " + b.summary};
}

// ---- 7 --------------------------------------------------------------------------------

Outcome linear_scaling() {
    TrainConfig cfg;
    cfg.M = 4;
    cfg.m = 2;
    cfg.s = 1;
    cfg.n_token_layers = 1;
    cfg.n_node_layers = 1;
    cfg.d_model = 8;
    cfg.d_state = 4;
    cfg.off_grid = true;
    BenchParams bp;
    bp.repeats = 7;
    const auto rows = run_bench(cfg, bp);
    const auto ratios = doubling_ratios(rows);
    bool ok = ratios.size() == 3;
    std::string detail = "median s:";
    for (const auto& r : rows) detail += " n=" + std::to_string(r.n) + fmt(" %.4f", r.median_seconds);
    detail += "; ratios:";
    for (double q : ratios) {
        detail += fmt(" %.2f", q);
        ok = ok && q <= 2.5;
    }
    return {ok, detail + " (need <= 2.5)"};
}

// ---- 8 --------------------------------------------------------------------------------

std::vector<Graph> cycles_vs_paths(std::uint64_t seed) {
    std::vector<Graph> out;
    Rng rng(seed);
    for (int i = 0; i < 200; ++i) {
        const std::size_t k = 6 + rng.index(7);
        Graph g = (i % 2 == 0) ? cycle_graph(k) : path_graph(k);
        g.set_graph_label(i % 2 == 0 ? 1.0 : 0.0);
        out.push_back(std::move(g));
    }
    return out;
}

TrainConfig cycles_config() {
    TrainConfig c;
    c.task = TaskKind::graph_class;
    c.M = 8;
    c.m = 2;
    c.s = 1;
    c.n_token_layers = 2;
    c.n_node_layers = 1;
    c.d_model = 8;
    c.d_state = 4;
    c.encoder = EncoderKind::rwf;
    c.rwf_window = 3;
    c.lr = 0.001;
    c.epochs = 200;
    c.batch_size = 8;
    c.val_fraction = 0.25;
    c.seed = 11;
    return c;
}

Outcome desk_learning() {
    const auto t0 = clock_type::now();
    const auto res = train(cycles_vs_paths(808), cycles_config());
    const double t_graph = seconds_since(t0);
    double train_acc = 0.0, val_acc = 0.0;
    for (const auto& r : res.history) (r.split == "train" ? train_acc : val_acc) = r.metric;

    // Degree parity on a random graph. Constant features leave the origin's
    // degree almost invisible to mean-pooled walks, so LapPE is attached.
    TrainConfig nc = cycles_config();
    nc.task = TaskKind::node_class;
    nc.M = 16;
    nc.s = 4;
    nc.epochs = 300;
    nc.batch_size = 1;
    nc.val_fraction = 0.0;
    nc.pe = PeMode::lappe;
    nc.pe_dim = 8;
    Graph g = random_bounded_degree_graph(50, 6, 110, 909);
    std::vector<double> parity;
    for (NodeId v = 0; v < 50; ++v) parity.push_back(static_cast<double>(g.degree(v) % 2));
    g.set_node_labels(parity);
    const auto node_res = train({g}, nc);
    const double node_acc = node_res.history.back().metric;
    const double t = seconds_since(t0);
    const bool ok = train_acc >= 0.95 && val_acc >= 0.90 && t_graph < 600.0 && node_acc >= 0.95;
    return {ok, fmt("cycles/paths train %.3f", train_acc) + fmt(" held-out %.3f", val_acc) +
                    fmt(" in %.1fs", t_graph) + fmt("; degree parity train %.3f", node_acc) + fmt(" (total %.1fs)", t)};
}

// ---- 9 --------------------------------------------------------------------------------

Outcome m0_specialization() {
    TrainConfig cfg = small_config();
    cfg.m = 0;
    cfg.s = 0;
    cfg.n_token_layers = 0;
    cfg.n_node_layers = 2;
    cfg.off_grid = true;
    cfg.mpnn_augment = true;
    const Graph g = random_bounded_degree_graph(9, 3, 11, 99);
    const PreparedGraph pg = prepare_graph(g, cfg);
    const GMNModel model = init_model(cfg, pg.graph.feature_dim(), 0, 2);
    const Matrix got = gmn_forward(model, pg);

    // Node-layer-only pipeline built by hand: projection, ordered node stack, Psi.
    const Matrix x = concat_pe(g, rwse(g, cfg.pe_dim)).node_features();
    const auto& P = model.params;
    Matrix h = (x * P.at("embed.W").transpose()).rowwise() + P.at("embed.b").row(0);
    const auto perm = degree_ordering(g).permutation;
    Matrix ordered(h.rows(), h.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) ordered.row(static_cast<Eigen::Index>(i)) = h.row(perm[i]);
    ad::Tape tape;
    const Matrix stacked =
        bimamba_stack(tape, tape.constant(ordered), P, model.node_layers(), "node.norm", g.num_nodes()).value();
    Matrix expect(h.rows(), h.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) expect.row(perm[i]) = stacked.row(static_cast<Eigen::Index>(i));
    const Matrix psi =
        mpnn_augment(tape, P, "psi", message_passing_batch(concat_pe(g, rwse(g, cfg.pe_dim))), 1, cfg.activation)
            .value();
    expect += psi;
    const bool equal = got.rows() == expect.rows() && got == expect;
    return {equal, equal ? "bitwise equal to the node-layer-only pipeline"
                         : fmt("max diff %.3e", (got - expect).cwiseAbs().maxCoeff())};
}

// ---- 10 -------------------------------------------------------------------------------

Outcome determinism() {
    TrainConfig cfg = cycles_config();
    cfg.epochs = 5;
    std::vector<Graph> data = cycles_vs_paths(1010);
    data.resize(40);
    std::string csv[2];
    for (int run = 0; run < 2; ++run) {
        std::ostringstream out;
        write_metrics_csv(out, train(data, cfg).history);
        csv[run] = out.str();
    }
    const bool same = csv[0] == csv[1] && !csv[0].empty();
    return {same, same ? "two runs produced byte-identical CSVs (" + std::to_string(csv[0].size()) + " bytes)"
                       : "CSV output differs between runs"};
}

} // namespace

int main(int argc, char** argv) {
    // Timings below are single-core figures.
    setenv("GMN_THREADS", "1", 0);
    const std::string only = argc > 1 ? argv[1] : "";
    auto want = [&](int id) { return only.empty() || only == std::to_string(id); };
    if (want(1)) report(1, "scan/convolution equivalence", scan_conv_equivalence);
    if (want(2)) report(2, "ZOH limits", zoh_limits);
    if (want(3)) report(3, "gradient check (5-node GMN)", gradient_check);
    if (want(4)) report(4, "bidirectional reversal equivariance", reversal_equivariance);
    if (want(5)) report(5, "walk coverage of k-hop neighborhoods", coverage);
    if (want(6)) report(6, "expressiveness beyond 1-WL / distance encoding", beyond_wl);
    if (want(7)) report(7, "linear scaling", linear_scaling);
    if (want(8)) report(8, "desk-scale learning", desk_learning);
    if (want(9)) report(9, "m = 0 specialization", m0_specialization);
    if (want(10)) report(10, "determinism", determinism);
    return failures == 0 ? 0 : 1;
}
