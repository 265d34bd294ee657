#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "cascon/cascade.hpp"
#include "cascon/graph.hpp"
#include "cascon/infer.hpp"
#include "cascon/model.hpp"
#include "cascon/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string data_dir;
    std::string name;
    std::string out_dir = "out";
    long long seed = -1;  // -1 keeps the config value
};

cascon::RunConfig resolve_config(const CommonArgs& args) {
    cascon::RunConfig cfg;
    if (!args.config_path.empty()) cfg = cascon::load_run_config(args.config_path);
    if (!args.data_dir.empty()) cfg.dataset_dir = args.data_dir;
    if (!args.name.empty()) cfg.dataset_name = args.name;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.validate();
    return cfg;
}

cascon::Dataset load_dataset(const cascon::RunConfig& cfg) {
    if (cfg.dataset_dir.empty() || cfg.dataset_name.empty()) {
        throw std::runtime_error("no dataset: set --data/--name or dataset_dir/dataset_name");
    }
    return cascon::load_tu_dataset(cfg.dataset_dir, cfg.dataset_name);
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key-value run configuration file");
    cmd->add_option("--data", args.data_dir, "dataset directory (TU format)");
    cmd->add_option("--name", args.name, "dataset name (file prefix)");
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--out", args.out_dir, "output directory");
}

int cmd_simulate(const CommonArgs& args, int graph_index) {
    const cascon::RunConfig cfg = resolve_config(args);
    const cascon::Dataset ds = load_dataset(cfg);
    fs::create_directories(args.out_dir);
    const int begin = graph_index >= 0 ? graph_index : 0;
    const int end = graph_index >= 0 ? graph_index + 1 : static_cast<int>(ds.graphs.size());
    if (begin >= static_cast<int>(ds.graphs.size())) {
        throw std::runtime_error("graph index out of range");
    }
    const std::uint64_t stream = cascon::Rng::derive(cfg.seed, 0x11);
    for (int gi = begin; gi < end; ++gi) {
        const cascon::Graph& g = ds.graphs[gi];
        const int q = cfg.q > 0 ? cfg.q : 20 * g.num_nodes();
        const cascon::CascadeSet cs =
            cascon::simulate_cascades(g, q, cfg.T, cascon::Rng::derive(stream, gi));
        const fs::path path = fs::path(args.out_dir) / ("cascades_" + std::to_string(gi) + ".txt");
        write_file(path, cascon::format_cascades(cs));
        std::cout << "graph " << gi << ": " << q << " cascades (" << g.num_nodes()
                  << " nodes) -> " << path.string() << "\n";
    }
    return 0;
}

int cmd_infer(const std::string& cascades_path, int nodes, double T, const std::string& out_path,
              double tol, int max_iters) {
    std::ifstream in(cascades_path);
    if (!in) throw std::runtime_error("cannot open " + cascades_path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const cascon::CascadeSet cs = cascon::parse_cascades(buffer.str(), nodes, T);

    cascon::SolverConfig solver;
    solver.tol = tol;
    solver.max_iters = max_iters;
    auto [m, report] = cascon::infer_structure(cs, solver);

    std::ostringstream out;
    char buf[48];
    for (std::size_t k = 0; k < m.support().size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%d %d %.9g\n", m.support()[k].first,
                      m.support()[k].second, m.rate_by_index(static_cast<int>(k)));
        out << buf;
    }
    write_file(out_path, out.str());
    std::cout << "inferred " << m.support().size() << " rates in " << report.iterations
              << " iterations (nll " << report.final_nll << ", grad norm "
              << report.final_grad_norm << (report.converged ? ", converged" : "")
              << (report.degenerate ? ", degenerate" : "") << ") -> " << out_path << "\n";
    return 0;
}

cascon::TransmissionMatrix read_rates(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rates file " + path);
    std::vector<std::pair<int, int>> support;
    std::vector<double> vals;
    int i = 0, j = 0;
    double r = 0.0;
    while (in >> i >> j >> r) {
        support.emplace_back(i, j);
        vals.push_back(r);
    }
    cascon::TransmissionMatrix m(n, support);
    for (std::size_t k = 0; k < support.size(); ++k) {
        m.set_rate(support[k].first, support[k].second, vals[k]);
    }
    return m;
}

int cmd_augment(const CommonArgs& args, const std::string& rates_dir) {
    const cascon::RunConfig cfg = resolve_config(args);
    cascon::Dataset ds = load_dataset(cfg);
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const fs::path path = fs::path(rates_dir) / ("rates_" + std::to_string(gi) + ".txt");
        const cascon::TransmissionMatrix m =
            read_rates(path.string(), ds.graphs[gi].num_nodes());
        ds.graphs[gi] = cascon::augment_graph(ds.graphs[gi], m, cfg.xi);
    }
    cascon::save_tu_dataset(ds, args.out_dir);
    std::cout << "augmented dataset written to " << args.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const cascon::RunConfig cfg = resolve_config(args);
    const cascon::Dataset ds = load_dataset(cfg);
    const std::string cache = (fs::path(args.out_dir) / "cache").string();
    const cascon::Preprocessed data = cascon::preprocess(ds, cfg, cache);

    std::vector<int> all(ds.graphs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const cascon::TrainResult result = cascon::train(data, all, cfg, cfg.seed);

    cascon::save_model(result.params, (fs::path(args.out_dir) / "model.txt").string());
    std::ostringstream trace;
    trace << "epoch\tgc\tsc\ttotal\n";
    char buf[96];
    for (std::size_t e = 0; e < result.trace.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.9g\t%.9g\t%.9g\n", e, result.trace[e].gc,
                      result.trace[e].sc, result.trace[e].total);
        trace << buf;
    }
    write_file(fs::path(args.out_dir) / "train_trace.tsv", trace.str());
    std::cout << "model and trace written to " << args.out_dir << "\n";
    return 0;
}

int run_cv(const CommonArgs& args, bool with_timing) {
    const cascon::RunConfig cfg = resolve_config(args);
    const cascon::Dataset ds = load_dataset(cfg);
    const std::string cache = (fs::path(args.out_dir) / "cache").string();
    const cascon::Preprocessed data = cascon::preprocess(ds, cfg, cache);
    if (data.cache_hit) std::cout << "preprocess: cache hit\n";

    const cascon::MetricsReport report = cascon::cross_validate(data, cfg);
    write_file(fs::path(args.out_dir) / "metrics.txt", cascon::format_metrics(report, cfg));
    write_file(fs::path(args.out_dir) / "traces.tsv", cascon::format_traces(report));
    if (with_timing) {
        std::ostringstream timing;
        timing << "wallclock_seconds " << report.wallclock_seconds << "\n";
        write_file(fs::path(args.out_dir) / "timing.txt", timing.str());
    }
    std::cout << "mean accuracy " << report.mean_accuracy << " +- " << report.std_accuracy
              << " over " << cfg.folds << " folds (" << report.wallclock_seconds << " s)\n";
    std::cout << "metrics written to " << args.out_dir << "\n";
    return 0;
}

int cmd_gen_data(const std::string& out_dir, const std::string& name, int graphs,
                 long long seed) {
    const cascon::Dataset ds =
        cascon::make_synthetic_dataset(graphs, seed < 0 ? 0 : seed, name);
    cascon::save_tu_dataset(ds, out_dir);
    std::cout << "wrote " << graphs << " graphs to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-cascade structure inference + contrastive graph classification"};
    app.require_subcommand(1);

    CommonArgs args;
    int graph_index = -1;

    CLI::App* simulate = app.add_subcommand("simulate", "write cascade dumps per graph");
    add_common(simulate, args);
    simulate->add_option("--graph", graph_index, "graph index (default: all)");

    std::string cascades_path, rates_out = "rates.txt";
    int infer_nodes = 0;
    double infer_T = 10.0, infer_tol = 1e-6;
    int infer_iters = 2000;
    CLI::App* infer = app.add_subcommand("infer", "infer transmission rates from a cascade dump");
    infer->add_option("--cascades", cascades_path, "cascade dump file")->required();
    infer->add_option("--nodes", infer_nodes, "node count of the graph")->required();
    infer->add_option("--T", infer_T, "observation window");
    infer->add_option("--out", rates_out, "output rates file (i j rate)");
    infer->add_option("--tol", infer_tol, "solver gradient tolerance");
    infer->add_option("--max-iters", infer_iters, "solver iteration cap");

    std::string rates_dir;
    CLI::App* augment = app.add_subcommand("augment", "apply top-xi inferred edges, write TU dataset");
    add_common(augment, args);
    augment->add_option("--rates-dir", rates_dir, "directory with rates_<i>.txt files")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "train on the full dataset, save checkpoint");
    add_common(train_cmd, args);

    CLI::App* cv = app.add_subcommand("cv", "stratified cross-validation");
    add_common(cv, args);

    CLI::App* run_all = app.add_subcommand("run-all", "preprocess + cross-validation + reports");
    add_common(run_all, args);

    std::string gen_out = "data/synthetic", gen_name = "synthetic";
    int gen_graphs = 188;
    long long gen_seed = 0;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic TU-format benchmark");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--name", gen_name, "dataset name");
    gen->add_option("--graphs", gen_graphs, "number of graphs");
    gen->add_option("--seed", gen_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(args, graph_index);
        if (infer->parsed()) {
            return cmd_infer(cascades_path, infer_nodes, infer_T, rates_out, infer_tol,
                             infer_iters);
        }
        if (augment->parsed()) return cmd_augment(args, rates_dir);
        if (train_cmd->parsed()) return cmd_train(args);
        if (cv->parsed()) return run_cv(args, false);
        if (run_all->parsed()) return run_cv(args, true);
        if (gen->parsed()) return cmd_gen_data(gen_out, gen_name, gen_graphs, gen_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
