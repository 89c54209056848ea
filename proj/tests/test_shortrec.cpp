#include "doctest.h"

#include "lrk/errors.hpp"
#include "lrk/oracle.hpp"
#include "lrk/precond.hpp"
#include "lrk/problems.hpp"
#include "lrk/shortrec.hpp"
#include "support/reference.hpp"

using namespace lrk;

namespace {

SparseMatrix eye(Index n) {
    SparseMatrix i(n, n);
    i.setIdentity();
    return i;
}

MultitermOperator lyapunov(Index n) {
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = static_cast<double>(i + 1);
    const SparseMatrix a = Matrix(d.asDiagonal()).sparseView();
    return MultitermOperator({{a, eye(n)}, {eye(n), a}});
}

}  // namespace

TEST_CASE("CG threshold examples") {
    CHECK(cg_threshold(2.0, 1e-6) == doctest::Approx(1e-6).epsilon(1e-14));
    CHECK(cg_threshold(1e-3, 1e-6) == doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(cg_threshold(1e-7, 1e-6) == 1.0);
    CHECK(cg_threshold(1.0, 1e-6) == doctest::Approx(1e-6).epsilon(1e-14));
}

TEST_CASE("CG with a zero right-hand side") {
    const auto op = lyapunov(4);
    const auto r = cg_solve(op, Matrix::Zero(4, 1), Matrix::Ones(4, 1), CgConfig{});
    CHECK(r.report.iterations == 0);
    CHECK(r.report.termination == Termination::converged);
    CHECK(fro_norm(r.solution) == 0.0);
}

TEST_CASE("pinned LR-CG reproduces dense CG on a Lyapunov equation") {
    const auto op = lyapunov(8);
    std::mt19937_64 gen(81);
    const Matrix c1 = ref::gaussian(8, 1, gen);
    const Matrix c2 = ref::gaussian(8, 1, gen);
    CgConfig cfg;
    cfg.eps = 1e-10;
    cfg.pinned_tolerance = 1e-14;
    const auto lr = cg_solve(op, c1, c2, cfg);
    const auto dense = oracle::dense_cg(op, c1, c2, 100, 1e-10);
    CHECK(lr.report.termination == Termination::converged);
    REQUIRE(lr.report.history.size() == dense.residuals.size());
    for (std::size_t k = 0; k < dense.residuals.size(); ++k) {
        const double d = dense.residuals[k] / dense.beta;
        CHECK(std::abs(lr.report.history[k].computed_residual - d) <= 1e-10 * std::max(d, 1e-3));
    }
    CHECK(ref::rel_diff(ref::dense(lr.solution), oracle::dense_solve(op, c1, c2)) < 1e-8);
    CHECK(lr.report.rank_sums.size() == lr.report.history.size());
}

TEST_CASE("error decreases monotonically in the energy norm") {
    const auto op = lyapunov(10);
    std::mt19937_64 gen(82);
    const Matrix c1 = ref::gaussian(10, 2, gen);
    const Matrix c2 = ref::gaussian(10, 2, gen);
    const Matrix k = ref::kron_matrix(op);
    const Vector xs = ref::vec(oracle::dense_solve(op, c1, c2));
    CgConfig cfg;
    cfg.eps = 1e-8;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= 12; ++it) {
        cfg.max_iter = it;
        const auto r = cg_solve(op, c1, c2, cfg);
        const Vector e = ref::vec(ref::dense(r.solution)) - xs;
        const double energy = std::sqrt(e.dot(k * e));
        CHECK(energy <= prev * (1 + 1e-8));
        prev = energy;
        if (r.report.termination == Termination::converged) break;
    }
}

TEST_CASE("mean-based preconditioner is exact without random variables") {
    const auto p = gen_stochastic(10, 0, 2, 0.0);
    const auto pc = Preconditioner::build(PreconditionerSpec::mean_based(p.k_list[0], p.n_sigma));
    const auto r = cg_solve(p.op, p.c1, p.c2, CgConfig{}, &pc);
    CHECK(r.report.iterations == 1);
    CHECK(r.report.termination == Termination::converged);
    CHECK(r.report.true_residual_final <= 1e-6);
}

TEST_CASE("preconditioned LR-CG on the stochastic problem") {
    const auto p = gen_stochastic(12, 2, 2, 0.5);
    const auto mean = Preconditioner::build(PreconditionerSpec::mean_based(p.k_list[0], p.n_sigma));
    CgConfig cfg;
    const auto r = cg_solve(p.op, p.c1, p.c2, cfg, &mean);
    CHECK(r.report.termination == Termination::converged);
    CHECK(r.report.true_residual_final <= 1e-6);
    CHECK(std::abs(r.report.true_residual_final - r.report.computed_residual_final) <= 10 * cfg.eps);
    const auto plain = cg_solve(p.op, p.c1, p.c2, cfg);
    CHECK(plain.report.termination == Termination::converged);
    CHECK(r.report.iterations < plain.report.iterations);
    const Matrix xd = oracle::dense_solve(p.op, p.c1, p.c2);
    CHECK(ref::rel_diff(ref::dense(r.solution), xd) < 1e-4);
}

TEST_CASE("operators that are not SPD are rejected") {
    std::mt19937_64 gen(83);
    const auto ns = ref::random_operator(6, 2, gen);
    CHECK_THROWS_AS(cg_solve(ns, Matrix::Ones(6, 1), Matrix::Ones(6, 1), CgConfig{}), SpdViolation);

    Vector d(4);
    d << 1, -1, 2, 3;
    const MultitermOperator indef({{Matrix(d.asDiagonal()).sparseView(), eye(4)}});
    Matrix e2 = Matrix::Zero(4, 1);
    e2(1, 0) = 1.0;
    CHECK_THROWS_AS(cg_solve(indef, e2, Matrix::Ones(4, 1), CgConfig{}), SpdViolation);
}

TEST_CASE("CG configuration and limits") {
    CgConfig bad;
    bad.eps = 0.0;
    CHECK_THROWS_AS(cg_solve(lyapunov(3), Matrix::Ones(3, 1), Matrix::Ones(3, 1), bad), ContractError);
    bad = CgConfig{};
    bad.max_iter = 0;
    CHECK_THROWS_AS(cg_solve(lyapunov(3), Matrix::Ones(3, 1), Matrix::Ones(3, 1), bad), ContractError);
    CHECK_THROWS_AS(cg_solve(lyapunov(3), Matrix::Ones(4, 1), Matrix::Ones(3, 1), CgConfig{}), ContractError);

    CgConfig few;
    few.max_iter = 2;
    few.eps = 1e-12;
    const auto r = cg_solve(lyapunov(12), Matrix::Ones(12, 1), Matrix::Ones(12, 1), few);
    CHECK(r.report.termination == Termination::max_iters);
    CHECK(r.report.iterations == 2);

    CgConfig guard;
    guard.eps = 1e-12;
    guard.pinned_tolerance = 1e-2;
    guard.stagnation_guard = true;
    guard.max_iter = 500;
    const auto g = cg_solve(lyapunov(12), Matrix::Ones(12, 1), Matrix::Ones(12, 1), guard);
    CHECK(g.report.termination != Termination::converged);
}
