#include <doctest.h>

#include <random>

#include "pverify/autodiff.hpp"

using namespace pverify;
using ad::Var;

namespace {

std::mt19937 rng(3);

Eigen::MatrixXd rnd(int r, int c, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

// Central-difference check of d/dx sum(W .* f(x)) with a fixed random W.
double op_grad_err(const Eigen::MatrixXd& x0,
                   const std::function<Var(ad::Tape&, Var)>& f) {
    ad::Tape probe;
    Var y0 = f(probe, probe.leaf(x0));
    Eigen::MatrixXd W = rnd(y0.rows(), y0.cols());

    auto loss = [&](const Eigen::MatrixXd& x) {
        ad::Tape t;
        return (W.array() * f(t, t.leaf(x)).val().array()).sum();
    };

    ad::Tape t;
    Var x = t.leaf(x0);
    t.backward(ad::sum_all(ad::mul(t.constant(W), f(t, x))));
    Eigen::MatrixXd g = x.grad();

    double h = 1e-6, maxerr = 0;
    for (int i = 0; i < x0.rows(); ++i)
        for (int j = 0; j < x0.cols(); ++j) {
            Eigen::MatrixXd xp = x0, xm = x0;
            xp(i, j) += h;
            xm(i, j) -= h;
            double num = (loss(xp) - loss(xm)) / (2 * h);
            maxerr = std::max(maxerr, std::abs(num - g(i, j)) /
                                          (std::abs(num) + std::abs(g(i, j)) + 1e-10));
        }
    return maxerr;
}

}  // namespace

TEST_CASE("every primitive op backpropagates correctly") {
    Eigen::MatrixXd A = rnd(3, 4), B = rnd(4, 5), C = rnd(3, 4), v = rnd(1, 4);
    Eigen::MatrixXd pos = rnd(3, 4, 0.5, 2.0), col = rnd(3, 1, 0.5, 2.0);
    constexpr double tol = 1e-6;

    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::add(x, t.constant(C)); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::sub(t.constant(C), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::mul(x, t.constant(C)); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::divide(x, t.constant(pos)); }) < tol);
    CHECK(op_grad_err(pos, [&](ad::Tape& t, Var x) { return ad::divide(t.constant(A), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::matmul(x, t.constant(B)); }) < tol);
    CHECK(op_grad_err(B, [&](ad::Tape& t, Var x) { return ad::matmul(t.constant(A), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::transpose(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::scale(x, 2.5); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::add_scalar(x, 0.7); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::neg(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::add_rowvec(x, t.constant(v)); }) < tol);
    CHECK(op_grad_err(v, [&](ad::Tape& t, Var x) { return ad::add_rowvec(t.constant(A), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::mul_colvec(x, t.constant(col)); }) < tol);
    CHECK(op_grad_err(col, [&](ad::Tape& t, Var x) { return ad::mul_colvec(t.constant(A), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) { return ad::div_colvec(x, t.constant(col)); }) < tol);
    CHECK(op_grad_err(col, [&](ad::Tape& t, Var x) { return ad::div_colvec(t.constant(A), x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::tanh_(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::relu_(x); }) < tol);
    CHECK(op_grad_err(pos, [&](ad::Tape&, Var x) { return ad::log_(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::exp_(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::square_(x); }) < tol);
    CHECK(op_grad_err(pos, [&](ad::Tape&, Var x) { return ad::sqrt_(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::softmax_rows(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::rowwise_sum(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::mean_rows(x); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::rows(x, 1, 2); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::cols(x, 1, 2); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) { return ad::row_gather(x, {2, 0, 2}); }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) {
              return ad::concat_rows({x, t.constant(C), x});
          }) < tol);
    CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) {
              return ad::concat_cols({x, t.constant(C)});
          }) < tol);
}

TEST_CASE("compositions used by the model backpropagate correctly") {
    Eigen::MatrixXd A = rnd(4, 6), v = rnd(1, 6);

    SUBCASE("self-attention block") {
        CHECK(op_grad_err(A, [&](ad::Tape&, Var x) {
                  Var scores = ad::scale(ad::matmul(x, ad::transpose(x)), 0.5);
                  return ad::matmul(ad::softmax_rows(scores), x);
              }) < 1e-6);
    }
    SUBCASE("layer norm") {
        CHECK(op_grad_err(A, [&](ad::Tape& t, Var x) {
                  Var mean = ad::scale(ad::rowwise_sum(x), 1.0 / x.cols());
                  Var centered = ad::sub(
                      x, ad::matmul(mean, t.constant(Eigen::MatrixXd::Ones(1, x.cols()))));
                  Var var = ad::scale(ad::rowwise_sum(ad::square_(centered)), 1.0 / x.cols());
                  Var normed = ad::div_colvec(centered, ad::sqrt_(ad::add_scalar(var, 1e-5)));
                  Var ones = t.constant(Eigen::MatrixXd::Ones(x.rows(), 1));
                  return ad::add_rowvec(ad::mul(normed, ad::matmul(ones, t.constant(v))),
                                        t.constant(v));
              }) < 1e-6);
    }
    SUBCASE("row-normalized cosine with kernel") {
        CHECK(op_grad_err(A, [&](ad::Tape&, Var x) {
                  Var norm = ad::sqrt_(ad::add_scalar(ad::rowwise_sum(ad::square_(x)), 1e-12));
                  Var n = ad::div_colvec(x, norm);
                  Var sim = ad::matmul(n, ad::transpose(n));
                  Var kernel = ad::exp_(ad::scale(ad::square_(ad::add_scalar(sim, -0.5)), -50.0));
                  return ad::log_(ad::add_scalar(ad::rowwise_sum(kernel), 1e-10));
              }) < 1e-6);
    }
}

TEST_CASE("a value reused on several paths accumulates all contributions") {
    // f(x) = sum(x * x^T x): x feeds three paths.
    Eigen::MatrixXd A = rnd(3, 3);
    CHECK(op_grad_err(A, [&](ad::Tape&, Var x) {
              return ad::matmul(x, ad::matmul(ad::transpose(x), x));
          }) < 1e-6);
}

TEST_CASE("backward requires a scalar output") {
    ad::Tape t;
    Var x = t.leaf(rnd(2, 2));
    CHECK_THROWS_AS(t.backward(x), std::logic_error);
}

TEST_CASE("mixing tapes is rejected") {
    ad::Tape t1, t2;
    Var a = t1.leaf(rnd(2, 2));
    Var b = t2.leaf(rnd(2, 2));
    CHECK_THROWS_AS(ad::add(a, b), std::logic_error);
}
