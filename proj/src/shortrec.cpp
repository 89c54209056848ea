#include "lrk/shortrec.hpp"

#include "lrk/errors.hpp"
#include "lrk/kernels.hpp"
#include "lrk/precond.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace lrk {

void CgConfig::validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw ContractError("cg config: eps must lie in (0, 1)");
    if (max_iter < 1) throw ContractError("cg config: max_iter must be at least 1");
    if (!(x_tol >= 0.0 && x_tol < 1.0)) throw ContractError("cg config: x_tol must lie in [0, 1)");
    if (pinned_tolerance && !(*pinned_tolerance >= 0.0 && *pinned_tolerance < 1.0))
        throw ContractError("cg config: pinned tolerance must lie in [0, 1)");
    if (!truncator) throw ContractError("cg config: no truncator");
}

double cg_threshold(double residual, double eps) {
    const double alpha = 1.0 / std::min(residual, 1.0);
    return std::min(alpha * eps, 1.0);
}

namespace {

LowRankMatrix random_rank_one(Index rows, Index cols, std::mt19937_64& gen) {
    std::normal_distribution<double> d;
    Matrix l(rows, 1), r(cols, 1);
    for (Index i = 0; i < rows; ++i) l(i, 0) = d(gen);
    for (Index i = 0; i < cols; ++i) r(i, 0) = d(gen);
    return LowRankMatrix(std::move(l), std::move(r));
}

void check_symmetric(const MultitermOperator& op, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const LowRankMatrix x = random_rank_one(op.rows_a(), op.rows_b(), gen);
    const LowRankMatrix y = random_rank_one(op.rows_a(), op.rows_b(), gen);
    const LowRankMatrix ax = apply(op, x);
    const LowRankMatrix ay = apply(op, y);
    const double lhs = inner(ax, y);
    const double rhs = inner(x, ay);
    const double scale = std::max(fro_norm(ax) * fro_norm(y), fro_norm(x) * fro_norm(ay));
    if (std::abs(lhs - rhs) > 1e-10 * scale)
        throw SpdViolation("cg: operator is not symmetric (<AX,Y> - <X,AY> = " + std::to_string(lhs - rhs) + ")");
}

}  // namespace

SolveResult cg_solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, const CgConfig& config,
                     const Preconditioner* precond) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    if (c1.rows() != op.rows_a() || c2.rows() != op.rows_b() || c1.cols() != c2.cols())
        throw ContractError("cg_solve: right-hand side factors do not conform to the operator");

    const Truncator& tr = *config.truncator;
    const bool pinned = config.pinned_tolerance.has_value();
    auto compress = [&](const LowRankMatrix& a, double tol) {
        const Index k = a.rank();
        return tr(a.left(), Matrix::Identity(k, k), a.right(), Tolerance::relative(pinned ? *config.pinned_tolerance : tol))
            .kept;
    };
    auto combine = [&](double a, const LowRankMatrix& x, double b, const LowRankMatrix& y, double tol) {
        const StackedFactors s = concat_scaled({{a, &x}, {b, &y}});
        return tr(s.left, s.middle, s.right, Tolerance::relative(pinned ? *config.pinned_tolerance : tol)).kept;
    };

    SolveResult res;
    SolveReport& rep = res.report;
    rep.method = "lr-cg";
    rep.threads = kernels::max_threads();
    if (precond) rep.precond_build_time = precond->build_seconds();

    const LowRankMatrix c(c1, c2);
    const double beta = fro_norm_qr(c);
    rep.beta = beta;
    res.solution = LowRankMatrix::zero(op.rows_a(), op.rows_b());
    if (beta == 0.0) {
        rep.termination = Termination::converged;
        rep.true_residual_final = 0.0;
        rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return res;
    }
    if (config.check_symmetry) check_symmetric(op, config.seed);

    auto precondition = [&](const LowRankMatrix& r, double tol) {
        if (!precond) return r;
        return compress(precond->apply_inverse_exact(r), tol);
    };

    LowRankMatrix x = res.solution;
    double rho = 1.0;
    double thr = cg_threshold(rho, config.eps);
    LowRankMatrix r = compress(c.scaled(-1.0), thr);
    LowRankMatrix z = precondition(r, thr);
    LowRankMatrix p = z;
    LowRankMatrix q = compress(apply(op, p), thr);
    rep.termination = Termination::max_iters;

    // Step and direction update in line-search form: alpha = <R, P>/<P, Q>,
    // beta = -<Z_new, Q>/<P, Q>. Equal to the textbook ratios in exact arithmetic.
    for (int k = 1; k <= config.max_iter; ++k) {
        const double pq = inner(p, q);
        if (!(pq > 0.0))
            throw SpdViolation("cg: <P, A P> = " + std::to_string(pq) + " at iteration " + std::to_string(k));
        const double alpha = inner(r, p) / pq;
        const double step = std::abs(alpha) * fro_norm(p);
        x = combine(1.0, x, alpha, p, config.x_tol);

        // Residual from X itself, measured before it is truncated.
        const LowRankMatrix ax = apply(op, x);
        const StackedFactors rs = concat_scaled({{-1.0, &ax}, {-1.0, &c}});
        rho = fro_norm_qr(LowRankMatrix(rs.left, rs.right)) / beta;

        IterationRecord rec;
        rec.iter = k;
        rec.computed_residual = rho;
        rec.bound = rho;
        rep.iterations = k;
        if (rho < config.eps) {
            rec.basis_rank = x.rank();
            rep.history.push_back(rec);
            rep.rank_sums.push_back(x.rank() + r.rank() + z.rank() + p.rank() + q.rank());
            rep.termination = Termination::converged;
            break;
        }

        thr = cg_threshold(rho, config.eps);
        rec.eps_a = thr;
        rec.eps_orth = thr;
        r = tr(rs.left, rs.middle, rs.right, Tolerance::relative(pinned ? *config.pinned_tolerance : thr)).kept;
        z = precondition(r, thr);
        const double b = -inner(z, q) / pq;
        p = combine(1.0, z, b, p, thr);
        q = compress(apply(op, p), thr);

        rec.basis_rank = x.rank();
        rep.history.push_back(rec);
        rep.rank_sums.push_back(x.rank() + r.rank() + z.rank() + p.rank() + q.rank());
        if (config.stagnation_guard && step <= config.eps) {
            rep.termination = Termination::breakdown;
            rep.message = "stagnation: ||X_{k+1} - X_k|| <= eps";
            break;
        }
    }

    res.solution = x;
    rep.computed_residual_final = rho;
    rep.bound_final = rho;
    rep.true_residual_final = true_relative_residual(op, x, c1, c2);
    rep.solution_rank = x.rank();
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace lrk
