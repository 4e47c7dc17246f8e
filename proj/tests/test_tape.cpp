#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glformer/rng.hpp"
#include "glformer/tape.hpp"

using namespace glformer;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Gradcheck helper for a single-input composite: compares the tape gradient
// of x -> sum(f(x)) against central finite differences.
double tape_vs_fd(const std::function<Var(const Var&)>& f, const Tensor& x, double h = 1e-5) {
    Tape tape;
    Var leaf = tape.leaf(x);
    Var loss = sum(f(leaf));
    tape.backward(loss);
    const Tensor analytic = tape.gradient(leaf);
    const Tensor numeric = finite_diff_grad(
        [&](const Tensor& probe) { return sum(f(Var(probe)).value()); }, x, h);
    const double scale = std::max({1.0, max_abs(analytic), max_abs(numeric)});
    return max_abs_diff(analytic, numeric) / scale;
}

} // namespace

TEST_CASE("identity gradient is one") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3.0));
    Var y = sum(x);
    tape.backward(y);
    CHECK(tape.gradient(x)[0] == 1.0);
}

TEST_CASE("sum of softmax has zero gradient") {
    Tape tape;
    Var x = tape.leaf(Tensor({1, 5}, {0.3, -1.2, 2.0, 0.0, 0.7}));
    Var loss = sum(softmax(x, 1));
    tape.backward(loss);
    CHECK(max_abs(tape.gradient(x)) < 1e-12);
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tape tape;
    Var x = tape.leaf(Tensor({2, 2}));
    Var y = relu(x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("gradients of unused nodes are exactly zero") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(2.0));
    Var unused = tape.leaf(Tensor({3, 3}, std::vector<double>(9, 1.0)));
    Var also_unused = mul_scalar(unused, 5.0);
    Var loss = sum(mul_scalar(x, 2.0));
    tape.backward(loss);
    CHECK(max_abs(tape.gradient(unused)) == 0.0);
    CHECK(max_abs(tape.gradient(also_unused)) == 0.0);
    CHECK(tape.gradient(x)[0] == 2.0);
}

TEST_CASE("mixing tapes is a contract error") {
    Tape a, b;
    Var x = a.leaf(Tensor({2, 2}));
    Var y = b.leaf(Tensor({2, 2}));
    CHECK_THROWS_AS(add(x, y), ContractError);
}

TEST_CASE("finite_diff_grad analytic cases") {
    // f = sum -> all-ones gradient.
    const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor g = finite_diff_grad([](const Tensor& t) { return sum(t); }, x);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0).epsilon(1e-10));

    // f(x) = x^2 at 2 -> 4.
    const Tensor x2 = Tensor::scalar(2.0);
    const Tensor g2 =
        finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, x2, 1e-5);
    CHECK(std::abs(g2[0] - 4.0) < 1e-8);
}

TEST_CASE("finite_diff_grad matches the quadratic-form formula") {
    Rng rng(11);
    const Tensor q = random_tensor({4, 4}, rng.derive("q"));
    const Tensor x = random_tensor({4, 1}, rng.derive("x"));
    const Tensor g = finite_diff_grad(
        [&](const Tensor& t) { return sum(matmul(transpose(t), matmul(q, t))); }, x);
    // d/dx xT Q x = (Q + QT) x
    const Tensor expected = matmul(add(q, transpose(q)), x);
    CHECK(max_abs_diff(g, expected) < 1e-6);
}

TEST_CASE("every operation's pullback matches finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Tensor a = random_tensor({4, 3}, rng.derive("a"));
        const Tensor b = random_tensor({4, 3}, rng.derive("b"));
        const Tensor sq = random_tensor({3, 3}, rng.derive("sq"));
        const Tensor pos = random_tensor({4, 3}, rng.derive("pos"), 0.5, 2.0);
        const Tensor rowv = random_tensor({1, 3}, rng.derive("rowv"));
        const Tensor colv = random_tensor({4, 1}, rng.derive("colv"));
        const Var bc(b), sqc(sq), rowc(rowv), colc(colv);

        CHECK(tape_vs_fd([&](const Var& v) { return matmul(v, sqc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return matmul(transpose(v), bc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return add(v, bc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return sub(bc, v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul(v, bc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul(v, v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return add_scalar(v, 2.5); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul_scalar(v, -1.7); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return relu(v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return softmax(v, 1); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return softmax(v, 0); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return reshape(v, {3, 4}); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return concat_rows({v, bc}); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return concat_cols({v, bc}); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return slice_rows(v, 1, 3); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return slice_cols(v, 0, 2); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return add_rowvec(v, rowc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return add_rowvec(Var(a), v); }, rowv) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul_rowvec(v, rowc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul_rowvec(Var(a), v); }, rowv) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul_colvec(v, colc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mul_colvec(Var(a), v); }, colv) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return row_sums(v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return mean_rows(v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return sqrt0(v); }, pos) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return recip(v); }, pos) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return sigmoid(v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return scale(slice_cols(mean_rows(v), 0, 1), bc); },
                         a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return weighted_sqdist(v, rowc); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return weighted_sqdist(Var(a), v); }, rowv) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return cosine_matrix(v); }, a) < 1e-5);
        CHECK(tape_vs_fd([&](const Var& v) { return stack_cols3(v, bc, mul(v, v)); }, a) < 1e-5);
        CHECK(tape_vs_fd(
                  [&](const Var& v) {
                      return layer_norm(v, Var(Tensor::full({1, 3}, 1.1)),
                                        Var(Tensor::full({1, 3}, 0.2)));
                  },
                  a) < 1e-5);
        CHECK(tape_vs_fd(
                  [&](const Var& v) { return layer_norm(Var(a), v, Var(Tensor({1, 3}))); },
                  rowv) < 1e-5);
        CHECK(tape_vs_fd(
                  [&](const Var& v) { return layer_norm(Var(a), Var(Tensor::full({1, 3}, 1.0)), v); },
                  rowv) < 1e-5);

        // Mask multiply: gradient flows only through surviving entries.
        Tensor mask({4, 3});
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i % 2 == 0) ? 1.0 : 0.0;
        CHECK(tape_vs_fd([&](const Var& v) { return mask_mul(v, mask); }, a) < 1e-5);
    }
}

TEST_CASE("sqrt0 uses the zero subgradient at exact zeros") {
    Tape tape;
    Var x = tape.leaf(Tensor({1, 3}, {0.0, 4.0, 9.0}));
    Var loss = sum(sqrt0(x));
    tape.backward(loss);
    const Tensor g = tape.gradient(x);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(0.25));
    CHECK(g[2] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("repeated forward passes with one seed are bit-identical") {
    auto run = [] {
        Rng rng(5);
        const Tensor a = random_tensor({6, 6}, rng.derive("a"));
        const Tensor b = random_tensor({6, 6}, rng.derive("b"));
        return matmul(softmax(matmul(a, b), 1), transpose(a));
    };
    CHECK(run() == run());
}
