#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cascon/pipeline.hpp"

using namespace cascon;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.dataset_name = "tiny";
    cfg.seed = 5;
    cfg.beta = 4;
    cfg.xi = 1;
    cfg.q = 30;
    cfg.T = 5.0;
    cfg.lambda = 0.01;
    cfg.L = 2;
    cfg.hidden_dim = 8;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.folds = 2;
    return cfg;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("cascon_pipe_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    auto na = a.named_params();
    auto nb = b.named_params();
    if (na.size() != nb.size()) return false;
    for (std::size_t i = 0; i < na.size(); ++i) {
        if (na[i].second->raw() != nb[i].second->raw()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("rmsprop_step matches the hand-computed update") {
    Matrix p(1, 1, {1.0});
    Matrix g(1, 1, {1.0});
    Matrix s(1, 1, {0.0});
    rmsprop_step(p, g, s, 0.1, 0.9, 0.0);
    CHECK(s(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(p(0, 0) == doctest::Approx(0.68377).epsilon(1e-4));
}

TEST_CASE("rmsprop_step with zero gradient") {
    SUBCASE("no weight decay: parameter unchanged, state decayed") {
        Matrix p(2, 2, 3.0);
        Matrix g(2, 2, 0.0);
        Matrix s(2, 2, 0.4);
        rmsprop_step(p, g, s, 0.1, 0.9, 0.0);
        for (double v : p.raw()) CHECK(v == 3.0);
        for (double v : s.raw()) CHECK(v == doctest::Approx(0.36).epsilon(1e-12));
    }
    SUBCASE("pure decoupled decay") {
        Matrix p(1, 1, {2.0});
        Matrix g(1, 1, {0.0});
        Matrix s(1, 1, {0.0});
        rmsprop_step(p, g, s, 0.05, 0.9, 0.01);
        CHECK(p(0, 0) == doctest::Approx(2.0 * (1.0 - 0.05 * 0.01)).epsilon(1e-12));
    }
    SUBCASE("shape mismatch is rejected") {
        Matrix p(1, 2, 0.0), g(2, 1, 0.0), s(1, 2, 0.0);
        CHECK_THROWS_AS(rmsprop_step(p, g, s, 0.1, 0.9, 0.0), std::invalid_argument);
    }
}

TEST_CASE("run config files parse and validate") {
    const fs::path dir = fresh_dir("config");
    {
        std::ofstream out(dir / "run.cfg");
        out << "# comment\n";
        out << "dataset_name demo\n";
        out << "beta = 7\n";
        out << "lambda 0.02\n";
        out << "T 6.5\n";
    }
    const RunConfig cfg = load_run_config((dir / "run.cfg").string());
    CHECK(cfg.dataset_name == "demo");
    CHECK(cfg.beta == 7);
    CHECK(cfg.lambda == doctest::Approx(0.02));
    CHECK(cfg.T == doctest::Approx(6.5));

    {
        std::ofstream out(dir / "bad.cfg");
        out << "betta 3\n";
    }
    CHECK_THROWS_WITH_AS(load_run_config((dir / "bad.cfg").string()),
                         doctest::Contains("unknown key"), std::runtime_error);

    RunConfig invalid = tiny_config();
    invalid.tau = 0.0;
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("preprocess with xi=0 returns the dataset unchanged") {
    const Dataset ds = make_synthetic_dataset(6, 2, "tiny");
    RunConfig cfg = tiny_config();
    cfg.xi = 0;
    const Preprocessed pre = preprocess(ds, cfg, "");
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        CHECK(pre.augmented[i].edges() == ds.graphs[i].edges());
    }
}

TEST_CASE("preprocess adds at most xi edges and never mutates the rest") {
    const Dataset ds = make_synthetic_dataset(6, 3, "tiny");
    RunConfig cfg = tiny_config();
    cfg.xi = 2;
    const Preprocessed pre = preprocess(ds, cfg, "");
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        const Graph& before = ds.graphs[i];
        const Graph& after = pre.augmented[i];
        CHECK(after.num_edges() <= before.num_edges() + cfg.xi);
        std::set<std::pair<int, int>> edges(after.edges().begin(), after.edges().end());
        for (const auto& e : before.edges()) CHECK(edges.count(e) == 1);
        CHECK(after.attributes() == before.attributes());
        CHECK(after.label() == before.label());
    }
}

TEST_CASE("preprocess caches inference results") {
    const Dataset ds = make_synthetic_dataset(5, 9, "tiny");
    RunConfig cfg = tiny_config();
    const fs::path cache = fresh_dir("cache");

    const Preprocessed first = preprocess(ds, cfg, cache.string());
    CHECK(!first.cache_hit);
    const Preprocessed second = preprocess(ds, cfg, cache.string());
    CHECK(second.cache_hit);

    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        CHECK(second.augmented[i].edges() == first.augmented[i].edges());
        CHECK(second.rates[i].to_dense().raw() == first.rates[i].to_dense().raw());
    }

    // A different seed misses the cache.
    RunConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(!preprocess(ds, other, cache.string()).cache_hit);
}

TEST_CASE("make_views") {
    const Dataset ds = make_synthetic_dataset(4, 21, "views");
    RunConfig cfg = tiny_config();
    cfg.xi = 2;

    SUBCASE("a single candidate collapses both views") {
        Graph g(3, {{0, 1}}, Matrix(3, 1, 1.0), 0);
        TransmissionMatrix m(3, {{0, 2}});
        m.set_rate(0, 2, 1.0);
        RunConfig one = cfg;
        one.xi = 1;
        Rng rng(4);
        auto [pos, neg] = make_views(g, m, one, rng);
        CHECK(pos.edges() == neg.edges());
        CHECK(pos.num_edges() == 2);
    }
    SUBCASE("no eligible pairs keeps the original graph") {
        Graph g(2, {{0, 1}}, Matrix(2, 1, 1.0), 0);
        TransmissionMatrix m(2, {});
        Rng rng(4);
        auto [pos, neg] = make_views(g, m, cfg, rng);
        CHECK(pos.edges() == g.edges());
        CHECK(neg.edges() == g.edges());
    }
    SUBCASE("stochastic view is seed-deterministic and a superset of the graph") {
        const Preprocessed pre = preprocess(ds, cfg, "");
        for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
            Rng r1(77), r2(77), r3(78);
            auto [pos1, neg1] = make_views(ds.graphs[i], pre.rates[i], cfg, r1);
            auto [pos2, neg2] = make_views(ds.graphs[i], pre.rates[i], cfg, r2);
            CHECK(neg1.edges() == neg2.edges());
            CHECK(pos1.edges() == pos2.edges());

            std::set<std::pair<int, int>> edges(pos1.edges().begin(), pos1.edges().end());
            for (const auto& e : ds.graphs[i].edges()) CHECK(edges.count(e) == 1);

            auto [pos3, neg3] = make_views(ds.graphs[i], pre.rates[i], cfg, r3);
            (void)pos3;
            (void)neg3;  // different seed may or may not differ; only determinism is asserted
        }
    }
}

TEST_CASE("train is deterministic given the seed") {
    const Dataset ds = make_synthetic_dataset(10, 13, "tiny");
    RunConfig cfg = tiny_config();
    const Preprocessed pre = preprocess(ds, cfg, "");

    std::vector<int> all;
    for (int i = 0; i < 10; ++i) all.push_back(i);

    const TrainResult a = train(pre, all, cfg, 42);
    const TrainResult b = train(pre, all, cfg, 42);
    CHECK(params_equal(a.params, b.params));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t e = 0; e < a.trace.size(); ++e) {
        CHECK(a.trace[e].gc == b.trace[e].gc);
        CHECK(a.trace[e].sc == b.trace[e].sc);
        CHECK(a.trace[e].total == b.trace[e].total);
    }

    const TrainResult c = train(pre, all, cfg, 43);
    CHECK(!params_equal(a.params, c.params));
}

TEST_CASE("with lambda=0 the total loss is exactly the classification loss") {
    const Dataset ds = make_synthetic_dataset(8, 17, "tiny");
    RunConfig cfg = tiny_config();
    cfg.lambda = 0.0;
    cfg.batch_size = 8;
    const Preprocessed pre = preprocess(ds, cfg, "");

    std::vector<int> all;
    for (int i = 0; i < 8; ++i) all.push_back(i);
    const TrainResult r = train(pre, all, cfg, 7);
    for (const EpochTrace& t : r.trace) CHECK(t.total == t.gc);
}

TEST_CASE("training reduces the loss on a learnable dataset") {
    const Dataset ds = make_synthetic_dataset(24, 3, "tiny");
    RunConfig cfg = tiny_config();
    cfg.epochs = 20;
    cfg.batch_size = 12;
    const Preprocessed pre = preprocess(ds, cfg, "");

    std::vector<int> all;
    for (int i = 0; i < 24; ++i) all.push_back(i);
    const TrainResult r = train(pre, all, cfg, 11);
    CHECK(r.trace.back().total < r.trace.front().total);
}

TEST_CASE("stratified folds partition the dataset with class balance") {
    const Dataset ds = make_synthetic_dataset(40, 19, "folds");
    Rng rng(2);
    const auto folds = stratified_folds(ds, 4, rng);
    REQUIRE(folds.size() == 4);

    std::set<int> seen;
    for (const auto& fold : folds) {
        for (int gi : fold) {
            CHECK(seen.count(gi) == 0);
            seen.insert(gi);
        }
    }
    CHECK(seen.size() == ds.graphs.size());

    // Class balance within one graph per fold.
    std::vector<int> class_total(2, 0);
    for (const Graph& g : ds.graphs) class_total[*g.label()]++;
    for (const auto& fold : folds) {
        std::vector<int> count(2, 0);
        for (int gi : fold) count[*ds.graphs[gi].label()]++;
        for (int c = 0; c < 2; ++c) {
            const double expected = static_cast<double>(class_total[c]) / 4.0;
            CHECK(std::abs(count[c] - expected) <= 1.0);
        }
    }
}

TEST_CASE("too many folds for a small class is rejected with advice") {
    Dataset ds = make_synthetic_dataset(6, 23, "folds");
    // Force a 1-member class.
    Matrix attrs = ds.graphs[0].attributes();
    ds.graphs[0] = Graph(ds.graphs[0].num_nodes(), ds.graphs[0].edges(), attrs, 0);
    for (std::size_t i = 1; i < ds.graphs.size(); ++i) {
        ds.graphs[i] = Graph(ds.graphs[i].num_nodes(), ds.graphs[i].edges(),
                             ds.graphs[i].attributes(), 1);
    }
    Rng rng(3);
    CHECK_THROWS_WITH_AS(stratified_folds(ds, 4, rng), doctest::Contains("at most"),
                         std::invalid_argument);
}

TEST_CASE("a constant predictor scores the majority rate on balanced folds") {
    // 20 graphs, 10 per class, 2 folds -> 5 per class per fold.
    Dataset ds = make_synthetic_dataset(20, 29, "balanced");
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        ds.graphs[i] = Graph(ds.graphs[i].num_nodes(), ds.graphs[i].edges(),
                             ds.graphs[i].attributes(), static_cast<int>(i % 2));
    }
    RunConfig cfg = tiny_config();
    cfg.xi = 0;
    const Preprocessed pre = preprocess(ds, cfg, "");

    ModelConfig mc = cfg.model_config(ds.graphs[0].attr_dim(), 2);
    Rng rng(1);
    ModelParams params = ModelParams::init(mc, rng);
    params.classifier_w = Matrix(2, mc.hidden_dim, 0.0);
    params.classifier_b = Matrix(1, 2, 0.0);

    Rng fold_rng(4);
    const auto folds = stratified_folds(ds, 2, fold_rng);
    for (const auto& fold : folds) {
        CHECK(evaluate_accuracy(pre, fold, params) == doctest::Approx(0.5));
    }
}

TEST_CASE("cross_validate reports are deterministic and well-formed") {
    const Dataset ds = make_synthetic_dataset(16, 31, "cvset");
    RunConfig cfg = tiny_config();
    cfg.dataset_name = "cvset";
    cfg.epochs = 3;
    cfg.folds = 2;
    const Preprocessed pre = preprocess(ds, cfg, "");

    const MetricsReport r1 = cross_validate(pre, cfg);
    const MetricsReport r2 = cross_validate(pre, cfg);

    CHECK(r1.fold_accuracy.size() == 2);
    for (double a : r1.fold_accuracy) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    CHECK(r1.std_accuracy >= 0.0);

    CHECK(format_metrics(r1, cfg) == format_metrics(r2, cfg));
    CHECK(format_traces(r1) == format_traces(r2));
    CHECK(format_metrics(r1, cfg).find("wallclock") == std::string::npos);
}
