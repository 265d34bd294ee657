#include <doctest.h>

#include <cmath>

#include "cascon/rng.hpp"
#include "cascon/tensor.hpp"

using namespace cascon;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.raw()) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("matmul computes the product and rejects bad shapes") {
    Tape t;
    Value a = t.constant(Matrix(2, 2, {1, 2, 3, 4}));
    Value b = t.constant(Matrix(2, 1, {1, 1}));
    Value c = t.matmul(a, b);
    CHECK(c.value()(0, 0) == 3.0);
    CHECK(c.value()(1, 0) == 7.0);

    Value bad = t.constant(Matrix(3, 1, {1, 1, 1}));
    CHECK_THROWS_WITH_AS(t.matmul(a, bad), doctest::Contains("matmul"), std::invalid_argument);
}

TEST_CASE("row softmax of a constant row is uniform") {
    Tape t;
    Value s = t.softmax_rows(t.constant(Matrix(1, 2, {0, 0})));
    CHECK(s.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("row L2 normalization on the 3-4-5 triple") {
    Tape t;
    Value n = t.l2_normalize_rows(t.constant(Matrix(1, 2, {3, 4})));
    CHECK(n.value()(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n.value()(0, 1) == doctest::Approx(0.8).epsilon(1e-12));

    CHECK_THROWS_AS(t.l2_normalize_rows(t.constant(Matrix(1, 2, {0, 0}))), std::domain_error);
}

TEST_CASE("log rejects non-positive entries") {
    Tape t;
    CHECK_THROWS_AS(t.log(t.constant(Matrix(1, 1, {0.0}))), std::domain_error);
    CHECK_THROWS_AS(t.log(t.constant(Matrix(1, 2, {1.0, -2.0}))), std::domain_error);
}

TEST_CASE("non-finite forward results are surfaced at the op") {
    Tape t;
    Value big = t.constant(Matrix(1, 1, {1e308}));
    CHECK_THROWS_AS(t.exp(big), std::domain_error);          // overflow to inf
    CHECK_THROWS_AS(t.add(big, t.scale(big, 10.0)), std::domain_error);
}

TEST_CASE("backward of a sum gives all-ones") {
    Tape t;
    Value x = t.leaf(Matrix(2, 3, 0.25), true);
    Gradients g = t.backward(t.sum_all(x));
    for (double v : g.at(x).raw()) CHECK(v == 1.0);
}

TEST_CASE("backward of sum(x*x) at 2 gives 4") {
    Tape t;
    Value x = t.leaf(Matrix(1, 1, {2.0}), true);
    Gradients g = t.backward(t.sum_all(t.mul(x, x)));
    CHECK(g.at(x)(0, 0) == 4.0);
}

TEST_CASE("leaves disconnected from the root get zero gradients") {
    Tape t;
    Value x = t.leaf(Matrix(1, 2, {1.0, 2.0}), true);
    Value unused = t.leaf(Matrix(3, 3, 0.5), true);
    Gradients g = t.backward(t.sum_all(x));
    for (double v : g.at(unused).raw()) CHECK(v == 0.0);
}

TEST_CASE("backward requires a scalar root") {
    Tape t;
    Value x = t.leaf(Matrix(2, 2, 1.0), true);
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("grad_check examples") {
    Rng rng(42);
    SUBCASE("sum of a matrix product") {
        auto f = [](Tape& t, const std::vector<Value>& v) {
            return t.sum_all(t.matmul(v[0], v[1]));
        };
        CHECK(grad_check(f, {random_matrix(3, 3, rng), random_matrix(3, 3, rng)}) < 1e-6);
    }
    SUBCASE("relu away from the kink") {
        auto f = [](Tape& t, const std::vector<Value>& v) { return t.sum_all(t.relu(v[0])); };
        CHECK(grad_check(f, {random_matrix(4, 4, rng, 0.1, 2.0)}) < 1e-6);
    }
    SUBCASE("constant function has zero gradients both ways") {
        auto f = [](Tape& t, const std::vector<Value>& v) {
            (void)v;
            return t.scalar_constant(3.5);
        };
        Tape t;
        Value x = t.leaf(random_matrix(2, 2, rng), true);
        Gradients g = t.backward(t.scalar_constant(3.5));
        for (double v : g.at(x).raw()) CHECK(v == 0.0);
        CHECK(grad_check(f, {random_matrix(2, 2, rng)}) == 0.0);
    }
}

TEST_CASE("every differentiable primitive passes grad_check at generic inputs") {
    Rng rng(7);
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        CAPTURE(trial);
        // Fixed random downstream weights make the scalar sensitive to every
        // entry, so Jacobians are exercised beyond their row sums.
        const Matrix w34 = random_matrix(3, 4, rng);
        const Matrix w43 = random_matrix(4, 3, rng);
        const Matrix w31 = random_matrix(3, 1, rng);
        const Matrix w14 = random_matrix(1, 4, rng);
        const Matrix w64 = random_matrix(6, 4, rng);
        const Matrix w38 = random_matrix(3, 8, rng);

        auto weighted = [](Tape& t, Value x, const Matrix& w) {
            return t.sum_all(t.mul(x, t.constant(w)));
        };

        struct NamedCheck {
            const char* name;
            std::function<Value(Tape&, const std::vector<Value>&)> f;
            std::vector<Matrix> leaves;
        };
        std::vector<NamedCheck> checks;
        checks.push_back({"matmul",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.matmul(v[0], v[1]), w34);
                          },
                          {random_matrix(3, 5, rng), random_matrix(5, 4, rng)}});
        checks.push_back({"add_full",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.add(v[0], v[1]), w34);
                          },
                          {random_matrix(3, 4, rng), random_matrix(3, 4, rng)}});
        checks.push_back({"add_col_broadcast",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.add(v[0], v[1]), w34);
                          },
                          {random_matrix(3, 4, rng), random_matrix(3, 1, rng)}});
        checks.push_back({"add_row_broadcast",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.add(v[0], v[1]), w34);
                          },
                          {random_matrix(3, 4, rng), random_matrix(1, 4, rng)}});
        checks.push_back({"mul_scalar_broadcast",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.mul(v[0], v[1]), w34);
                          },
                          {random_matrix(3, 4, rng), random_matrix(1, 1, rng)}});
        checks.push_back({"scale",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.scale(v[0], -1.7), w34);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"relu",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.relu(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng, 0.2, 1.5)}});
        checks.push_back({"exp",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.exp(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"log",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.log(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng, 0.5, 2.0)}});
        checks.push_back({"sigmoid",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.sigmoid(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"softmax_rows",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.softmax_rows(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"l2_normalize_rows",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.l2_normalize_rows(v[0]), w34);
                          },
                          {random_matrix(3, 4, rng, 0.4, 1.5)}});
        checks.push_back({"transpose",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.transpose(v[0]), w43);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"mean_all",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return t.mean_all(t.mul(v[0], t.constant(w34)));
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"row_sum",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.row_sum(v[0]), w31);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"col_mean",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.col_mean(v[0]), w14);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"gather_rows_with_duplicates",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.gather_rows(v[0], {0, 2, 2, 1, 0, 2}), w64);
                          },
                          {random_matrix(3, 4, rng)}});
        checks.push_back({"concat_rows",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.concat_rows({v[0], v[1], v[0]}), w64);
                          },
                          {random_matrix(2, 4, rng), random_matrix(2, 4, rng)}});
        checks.push_back({"hcat",
                          [&](Tape& t, const std::vector<Value>& v) {
                              return weighted(t, t.hcat(v[0], v[1]), w38);
                          },
                          {random_matrix(3, 4, rng), random_matrix(3, 4, rng)}});

        for (auto& check : checks) {
            CAPTURE(check.name);
            CHECK(grad_check(check.f, check.leaves) < 1e-4);
        }
    }
}

TEST_CASE("backward is linear in the root") {
    Rng rng(99);
    const Matrix x0 = random_matrix(3, 3, rng, 0.3, 1.2);
    const double a = 2.25, b = -0.75;

    auto make_f = [](Tape& t, Value x) { return t.sum_all(t.mul(x, x)); };
    auto make_g = [](Tape& t, Value x) { return t.sum_all(t.log(x)); };

    Tape tf;
    Value xf = tf.leaf(x0, true);
    const Matrix gf = tf.backward(make_f(tf, xf)).at(xf);

    Tape tg;
    Value xg = tg.leaf(x0, true);
    const Matrix gg = tg.backward(make_g(tg, xg)).at(xg);

    Tape tc;
    Value xc = tc.leaf(x0, true);
    Value combined = tc.add(tc.scale(make_f(tc, xc), a), tc.scale(make_g(tc, xc), b));
    const Matrix gc = tc.backward(combined).at(xc);

    for (std::size_t i = 0; i < gc.raw().size(); ++i) {
        CHECK(gc.raw()[i] == doctest::Approx(a * gf.raw()[i] + b * gg.raw()[i]).epsilon(1e-9));
    }
}

TEST_CASE("forward results are bit-identical across repeated runs") {
    Rng rng(5);
    const Matrix a = random_matrix(4, 4, rng);
    const Matrix b = random_matrix(4, 4, rng);

    auto run = [&]() {
        Tape t;
        Value va = t.leaf(a);
        Value vb = t.leaf(b);
        Value out = t.softmax_rows(t.matmul(t.sigmoid(va), t.exp(t.scale(vb, 0.5))));
        return out.value();
    };
    const Matrix r1 = run();
    const Matrix r2 = run();
    CHECK(r1.raw() == r2.raw());
}
