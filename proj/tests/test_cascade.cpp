#include <doctest.h>

#include <cmath>

#include "cascon/cascade.hpp"
#include "cascon/pipeline.hpp"

using namespace cascon;

namespace {

Graph k3() {
    return Graph(3, {{0, 1}, {1, 2}, {0, 2}}, Matrix(3, 1, 1.0));
}

}  // namespace

TEST_CASE("single isolated node activates only itself") {
    Graph g(1, {}, Matrix(1, 1, 1.0));
    Rng rng(3);
    const Cascade c = simulate_cascade(g, 100.0, rng);
    CHECK(c.root == 0);
    CHECK(c.times[0] == 0.0);
    CHECK(c.num_activated() == 1);
}

TEST_CASE("zero window keeps only the root") {
    Rng rng(11);
    const Cascade c = simulate_cascade(k3(), 0.0, rng);
    CHECK(c.num_activated() == 1);
    CHECK(c.times[c.root] == 0.0);
}

TEST_CASE("the root's component bounds the spread") {
    // Components {0,1} and {2,3}.
    Graph g(4, {{0, 1}, {2, 3}}, Matrix(4, 1, 1.0));
    const CascadeSet cs = simulate_cascades(g, 50, 1000.0, 17);
    for (const Cascade& c : cs.cascades) {
        const bool root_left = c.root <= 1;
        CHECK(!c.activated(root_left ? 2 : 0));
        CHECK(!c.activated(root_left ? 3 : 1));
    }
}

TEST_CASE("edgeless graphs never spread") {
    Graph g(5, {}, Matrix(5, 1, 1.0));
    const CascadeSet cs = simulate_cascades(g, 20, 10.0, 23);
    for (const Cascade& c : cs.cascades) CHECK(c.num_activated() == 1);
}

TEST_CASE("simulation is deterministic in the seed") {
    const CascadeSet a = simulate_cascades(k3(), 3, 10.0, 1234);
    const CascadeSet b = simulate_cascades(k3(), 3, 10.0, 1234);
    REQUIRE(a.cascades.size() == b.cascades.size());
    for (std::size_t i = 0; i < a.cascades.size(); ++i) {
        CHECK(a.cascades[i].root == b.cascades[i].root);
        CHECK(a.cascades[i].times == b.cascades[i].times);
    }
    const CascadeSet c = simulate_cascades(k3(), 3, 10.0, 1235);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.cascades.size() && !any_diff; ++i) {
        any_diff = a.cascades[i].times != c.cascades[i].times;
    }
    CHECK(any_diff);
}

TEST_CASE("invalid arguments are rejected") {
    Rng rng(0);
    Graph g = k3();
    CHECK_THROWS_AS(simulate_cascade(g, -1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(simulate_cascades(g, 0, 10.0, 1), std::invalid_argument);
}

TEST_CASE("K3 with a wide window almost always activates everyone") {
    const CascadeSet cs = simulate_cascades(k3(), 1000, 10.0, 99);
    int full = 0;
    for (const Cascade& c : cs.cascades) {
        if (c.num_activated() == 3) ++full;
    }
    CHECK(static_cast<double>(full) / 1000.0 > 0.95);
}

TEST_CASE("cascade invariants hold on random graphs") {
    const Dataset ds = make_synthetic_dataset(8, 31, "cascade_prop");
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const Graph& g = ds.graphs[gi];
        const CascadeSet cs = simulate_cascades(g, 25, 4.0, 1000 + gi);
        for (const Cascade& c : cs.cascades) {
            int zeros = 0;
            for (int v = 0; v < g.num_nodes(); ++v) {
                if (c.times[v] == 0.0) ++zeros;
                if (!c.activated(v)) continue;
                CHECK(c.times[v] <= 4.0);
                if (v != c.root) {
                    // Some neighbor activated strictly earlier.
                    bool has_earlier = false;
                    for (int u : g.neighbors(v)) {
                        if (c.activated(u) && c.times[u] < c.times[v]) has_earlier = true;
                    }
                    CHECK(has_earlier);
                }
            }
            CHECK(zeros == 1);
            CHECK(c.times[c.root] == 0.0);
        }
    }
}

TEST_CASE("root choice is uniform by a chi-square test") {
    // 10 nodes, df = 9, critical value 21.666 at significance 0.01.
    Graph g(10, {{0, 1}}, Matrix(10, 1, 1.0));
    const int q = 10000;
    const CascadeSet cs = simulate_cascades(g, q, 1.0, 424242);
    std::vector<int> counts(10, 0);
    for (const Cascade& c : cs.cascades) counts[c.root]++;
    const double expected = q / 10.0;
    double chi2 = 0.0;
    for (int cnt : counts) chi2 += (cnt - expected) * (cnt - expected) / expected;
    CHECK(chi2 < 21.666);
}

TEST_CASE("cascade dump round-trips through the text format") {
    const Dataset ds = make_synthetic_dataset(2, 55, "dump");
    const Graph& g = ds.graphs[0];
    const CascadeSet cs = simulate_cascades(g, 10, 5.0, 7);
    const std::string text = format_cascades(cs);
    const CascadeSet back = parse_cascades(text, g.num_nodes(), 5.0);
    REQUIRE(back.cascades.size() == cs.cascades.size());
    for (std::size_t i = 0; i < cs.cascades.size(); ++i) {
        CHECK(back.cascades[i].root == cs.cascades[i].root);
        for (int v = 0; v < g.num_nodes(); ++v) {
            if (cs.cascades[i].activated(v)) {
                CHECK(back.cascades[i].times[v] ==
                      doctest::Approx(cs.cascades[i].times[v]).epsilon(1e-6));
            } else {
                CHECK(!back.cascades[i].activated(v));
            }
        }
    }
}
