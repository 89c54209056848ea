#include "doctest.h"

#include "lrk/errors.hpp"
#include "lrk/lowrank.hpp"
#include "lrk/oracle.hpp"
#include "support/reference.hpp"

#include <cmath>
#include <limits>

using namespace lrk;

namespace {

Matrix unit(Index n, Index i) {
    Matrix e = Matrix::Zero(n, 1);
    e(i, 0) = 1.0;
    return e;
}

}  // namespace

TEST_CASE("trunc keeps a rank-one product intact") {
    const auto r = trunc(unit(10, 0), Matrix::Ones(1, 1), unit(10, 0), 0.1);
    CHECK(r.kept_rank == 1);
    CHECK(r.discarded_norm == 0.0);
    CHECK(ref::rel_diff(ref::dense(r.kept), unit(10, 0) * unit(10, 0).transpose()) < 1e-15);
}

TEST_CASE("trunc of a zero middle factor gives rank zero") {
    std::mt19937_64 gen(1);
    const Matrix l = ref::gaussian(12, 3, gen);
    const Matrix n = ref::gaussian(9, 2, gen);
    const auto r = trunc(l, Matrix::Zero(3, 2), n, 0.1);
    CHECK(r.kept_rank == 0);
    CHECK(r.kept.is_zero_rank());
    CHECK(r.discarded_norm == 0.0);
    CHECK(r.kept.rows() == 12);
    CHECK(r.kept.cols() == 9);
}

TEST_CASE("trunc matches the dense SVD oracle") {
    std::mt19937_64 gen(2);
    // unit-variance columns in the ambient dimension
    const Matrix l = ref::gaussian(50, 8, gen) / std::sqrt(50.0);
    const Matrix n = ref::gaussian(50, 8, gen) / std::sqrt(50.0);
    const Matrix m = Matrix::Identity(8, 8);
    const Matrix p = l * n.transpose();
    const auto r = trunc(l, m, n, 1e-2);
    const auto o = ref::svd_truncate(p, 1e-2);
    CHECK(r.kept_rank == o.rank);
    const double err_lr = (ref::dense(r.kept) - p).norm();
    const double err_or = (o.kept - p).norm();
    CHECK(std::abs(err_lr - err_or) < 1e-12);
    CHECK(r.discarded_norm == doctest::Approx(err_or).epsilon(1e-10));
    // the library oracle agrees with the independent one
    const auto lib = oracle::dense_trunc_oracle(l, m, n, 1e-2);
    CHECK(lib.rank == o.rank);
    CHECK(ref::rel_diff(lib.kept, o.kept) < 1e-10);
}

TEST_CASE("trunc accepts a rectangular middle factor") {
    std::mt19937_64 gen(3);
    const Matrix l = ref::gaussian(20, 4, gen);
    const Matrix m = ref::gaussian(4, 6, gen);
    const Matrix n = ref::gaussian(15, 6, gen);
    const auto r = trunc(l, m, n, 0.0);
    CHECK(r.kept_rank == 4);
    CHECK(ref::rel_diff(ref::dense(r.kept), l * m * n.transpose()) < 1e-13);
}

TEST_CASE("trunc balances the factors by sqrt(sigma)") {
    std::mt19937_64 gen(4);
    const Matrix l = ref::gaussian(30, 5, gen);
    const Matrix n = ref::gaussian(25, 5, gen);
    const auto r = trunc(l, Matrix::Identity(5, 5), n, 0.0);
    const Matrix fl = r.kept.left().transpose() * r.kept.left();
    const Matrix fr = r.kept.right().transpose() * r.kept.right();
    // both Gram matrices are diag(sigma)
    CHECK((fl - fr).norm() < 1e-12 * fl.norm());
    CHECK((fl - Matrix(fl.diagonal().asDiagonal())).norm() < 1e-12 * fl.norm());
}

TEST_CASE("trunc rejects bad input") {
    CHECK_THROWS_AS(trunc(Matrix::Ones(4, 2), Matrix::Ones(3, 2), Matrix::Ones(4, 2), 0.1), ContractError);
    CHECK_THROWS_AS(trunc(Matrix::Ones(4, 2), Matrix::Ones(2, 2), Matrix::Ones(4, 2), -1.0), ContractError);
    Matrix bad = Matrix::Ones(4, 2);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(trunc(bad, Matrix::Ones(2, 2), Matrix::Ones(4, 2), 0.1), NumericError);
}

TEST_CASE("trunc with eps 0 is lossless and drops numerically zero directions") {
    std::mt19937_64 gen(5);
    const Matrix base = ref::gaussian(40, 3, gen);
    Matrix l(40, 6);
    l << base, base;  // rank 3 in six columns
    const Matrix n = ref::gaussian(30, 6, gen);
    const auto r = trunc(l, Matrix::Identity(6, 6), n, 0.0);
    CHECK(r.kept_rank == 3);
    CHECK(ref::rel_diff(ref::dense(r.kept), l * n.transpose()) < 1e-13);
}

TEST_CASE("budget tolerances convert to relative ones and clamp") {
    std::mt19937_64 gen(6);
    const Matrix l = ref::gaussian(30, 6, gen);
    const Matrix n = ref::gaussian(30, 6, gen);
    const auto full = trunc(l, Matrix::Identity(6, 6), n, 0.0);
    const auto r = trunc(l, Matrix::Identity(6, 6), n, Tolerance::budget(1e-3 * full.input_norm, 1e-16, 0.5));
    CHECK(r.eps_rel_used == doctest::Approx(1e-3));
    const auto c = trunc(l, Matrix::Identity(6, 6), n, Tolerance::budget(10.0 * full.input_norm, 1e-16, 0.5));
    CHECK(c.eps_rel_used == 0.5);
}

TEST_CASE("block orthogonality of kept and discarded parts") {
    std::mt19937_64 gen(7);
    const Matrix l = ref::gaussian(60, 10, gen);
    const Matrix n = ref::gaussian(50, 10, gen);
    const Matrix p = l * n.transpose();
    const auto r = trunc(l, Matrix::Identity(10, 10), n, 0.3);
    const Matrix e = p - ref::dense(r.kept);
    CHECK((r.kept.left().transpose() * e).norm() <= 1e-12 * p.squaredNorm());
    CHECK((e * r.kept.right()).norm() <= 1e-12 * p.squaredNorm());
    CHECK(e.norm() <= 0.3 * p.norm());
}

TEST_CASE("inner product examples") {
    Matrix u(2, 1), v(2, 1);
    u << 1, 2;
    v << 3, 4;
    const LowRankMatrix x(u, v);
    CHECK(inner(x, x) == doctest::Approx(125.0));
    CHECK(inner(x, LowRankMatrix::zero(2, 2)) == 0.0);
    CHECK_THROWS_AS(inner(x, LowRankMatrix::zero(3, 2)), ContractError);

    std::mt19937_64 gen(8);
    const auto a = ref::random_lr(20, 20, 3, gen);
    const auto b = ref::random_lr(20, 20, 3, gen);
    const double dense = (ref::dense(b).transpose() * ref::dense(a)).trace();
    CHECK(std::abs(inner(a, b) - dense) <= 1e-12 * std::abs(dense));
}

TEST_CASE("inner is symmetric and bilinear") {
    std::mt19937_64 gen(9);
    for (int t = 0; t < 20; ++t) {
        const auto x = ref::random_lr(15, 12, 2, gen);
        const auto y = ref::random_lr(15, 12, 3, gen);
        const auto z = ref::random_lr(15, 12, 4, gen);
        const double tol = 1e-14 * fro_norm(x) * fro_norm(y);
        CHECK(std::abs(inner(x, y) - inner(y, x)) <= 4 * tol);
        const double a = 0.7, b = -1.3;
        const auto s = concat_scaled({{a, &x}, {b, &y}});
        const LowRankMatrix comb(s.left * s.middle, s.right);
        const double lhs = inner(comb, z);
        const double rhs = a * inner(x, z) + b * inner(y, z);
        CHECK(std::abs(lhs - rhs) <= 1e-13 * (std::abs(a) * fro_norm(x) + std::abs(b) * fro_norm(y)) * fro_norm(z));
    }
}

TEST_CASE("fro_norm examples") {
    CHECK(fro_norm(LowRankMatrix::zero(4, 5)) == 0.0);
    Matrix u(2, 1), v(2, 1);
    u << 3, 4;
    v << 1, 0;
    CHECK(fro_norm(LowRankMatrix(u, v)) == doctest::Approx(5.0));
    std::mt19937_64 gen(10);
    const auto x = ref::random_lr(30, 30, 5, gen);
    const double dn = ref::dense(x).norm();
    CHECK(std::abs(fro_norm(x) - dn) <= 1e-12 * dn);
    CHECK(std::abs(fro_norm(x) * fro_norm(x) - inner(x, x)) <= 1e-12 * inner(x, x));
}

TEST_CASE("fro_norm survives heavy cancellation") {
    std::mt19937_64 gen(11);
    const auto x = ref::random_lr(30, 30, 3, gen);
    Matrix small = ref::gaussian(30, 1, gen) * 1e-7;
    // x + tiny - x: the Gram route would lose everything
    const LowRankMatrix tiny(small, ref::gaussian(30, 1, gen));
    const auto s = concat_scaled({{1.0, &x}, {1.0, &tiny}, {-1.0, &x}});
    const LowRankMatrix sum(s.left * s.middle, s.right);
    const double expect = ref::dense(tiny).norm();
    CHECK(std::abs(fro_norm(sum) - expect) <= 1e-6 * expect);
}

TEST_CASE("concat_scaled builds the stacked factors") {
    std::mt19937_64 gen(12);
    const auto x = ref::random_lr(8, 7, 2, gen);
    const auto y = ref::random_lr(8, 7, 3, gen);
    const auto one = concat_scaled({{1.0, &x}});
    CHECK(one.left == x.left());
    CHECK(one.right == x.right());
    CHECK(one.middle == Matrix::Identity(2, 2));

    const double h = 0.25;
    const auto two = concat_scaled({{1.0, &x}, {-h, &y}});
    Vector d(5);
    d << 1, 1, -h, -h, -h;
    CHECK(two.middle == Matrix(d.asDiagonal()));

    const auto lin = trunc(concat_scaled({{2.0, &x}, {3.0, &y}}), 0.0);
    CHECK(ref::rel_diff(ref::dense(lin.kept), 2 * ref::dense(x) + 3 * ref::dense(y)) < 1e-12);

    const auto z = ref::random_lr(9, 7, 1, gen);
    CHECK_THROWS_AS(concat_scaled({{1.0, &x}, {1.0, &z}}), ContractError);
}

TEST_CASE("materialize") {
    CHECK(materialize(LowRankMatrix::zero(3, 4)) == Matrix::Zero(3, 4));
    const LowRankMatrix e12(unit(3, 0), unit(3, 1));
    Matrix expect = Matrix::Zero(3, 3);
    expect(0, 1) = 1.0;
    CHECK(materialize(e12) == expect);
    CHECK_THROWS_AS(materialize(LowRankMatrix::zero(2000, 2000)), ResourceError);

    std::mt19937_64 gen(13);
    const Matrix l = ref::gaussian(20, 4, gen);
    const Matrix n = ref::gaussian(20, 4, gen);
    const auto r = trunc(l, Matrix::Identity(4, 4), n, 0.0);
    CHECK((materialize(r.kept) - l * n.transpose()).norm() <= 1e-13 * (l * n.transpose()).norm());
}

TEST_CASE("LowRankMatrix validates its factors") {
    CHECK_THROWS_AS(LowRankMatrix(Matrix::Ones(3, 2), Matrix::Ones(3, 1)), ContractError);
    Matrix inf = Matrix::Ones(3, 1);
    inf(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(LowRankMatrix(inf, Matrix::Ones(3, 1)), NumericError);
    const LowRankMatrix x(Matrix::Ones(3, 1), Matrix::Ones(2, 1));
    CHECK(ref::dense(x.scaled(-4.0)) == -4.0 * Matrix::Ones(3, 2));
}
