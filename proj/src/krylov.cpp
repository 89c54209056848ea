#include "lrk/krylov.hpp"

#include "lrk/errors.hpp"
#include "lrk/kernels.hpp"
#include "lrk/precond.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace lrk {

namespace {

constexpr double kMachEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::fom ? "fom" : "gmres"; }

std::string to_string(Schedule s) {
    switch (s) {
        case Schedule::relaxed_sigma: return "relaxed_sigma";
        case Schedule::relaxed_kappa: return "relaxed_kappa";
        case Schedule::fixed: return "fixed";
    }
    return "unknown";
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::max_iters: return "max_iters";
        case Termination::breakdown: return "breakdown";
    }
    return "unknown";
}

Variant parse_variant(const std::string& s) {
    if (s == "fom") return Variant::fom;
    if (s == "gmres") return Variant::gmres;
    throw ContractError("unknown variant '" + s + "' (expected fom or gmres)");
}

Schedule parse_schedule(const std::string& s) {
    if (s == "relaxed_sigma") return Schedule::relaxed_sigma;
    if (s == "relaxed_kappa") return Schedule::relaxed_kappa;
    if (s == "fixed") return Schedule::fixed;
    throw ContractError("unknown schedule '" + s + "' (expected relaxed_sigma, relaxed_kappa or fixed)");
}

void SolverConfig::validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw ContractError("solver config: eps must lie in (0, 1)");
    if (m_max < 1) throw ContractError("solver config: m_max must be at least 1");
    if (c1 && !(*c1 > 0.0)) throw ContractError("solver config: c1 must be positive");
    if (c2 && !(*c2 > 0.0)) throw ContractError("solver config: c2 must be positive");
    if (eps_orth_cap && !(*eps_orth_cap > 0.0)) throw ContractError("solver config: eps_orth_cap must be positive");
    if (pinned_tolerance && !(*pinned_tolerance >= 0.0 && *pinned_tolerance < 1.0))
        throw ContractError("solver config: pinned tolerance must lie in [0, 1)");
    if (recover_eps && !(*recover_eps >= 0.0 && *recover_eps < 1.0))
        throw ContractError("solver config: recover_eps must lie in [0, 1)");
    if (!truncator) throw ContractError("solver config: no truncator");
}

std::vector<double> SolveReport::computed_residuals() const {
    std::vector<double> out;
    for (const auto& r : history) out.push_back(r.computed_residual);
    return out;
}

std::vector<double> SolveReport::bounds() const {
    std::vector<double> out;
    for (const auto& r : history) out.push_back(r.bound);
    return out;
}

Matrix ArnoldiState::hessenberg() const {
    const auto m = static_cast<Index>(hess.size());
    Matrix h = Matrix::Zero(m + 1, m);
    for (Index j = 0; j < m; ++j) h.col(j).head(j + 2) = hess[static_cast<std::size_t>(j)];
    return h;
}

ArnoldiState make_state(double beta) {
    ArnoldiState s;
    s.beta = beta;
    s.g = Vector::Constant(1, beta);
    return s;
}

GivensOutcome givens_update(ArnoldiState& state, const Vector& column) {
    const Index m = state.steps() + 1;
    if (column.size() != m + 1)
        throw ContractError("givens_update: column " + std::to_string(m) + " must have " + std::to_string(m + 1) +
                            " entries");
    Vector col = column;
    for (Index i = 0; i + 1 < m; ++i) {
        const double c = state.cs[static_cast<std::size_t>(i)];
        const double s = state.sn[static_cast<std::size_t>(i)];
        const double t = c * col(i) + s * col(i + 1);
        col(i + 1) = -s * col(i) + c * col(i + 1);
        col(i) = t;
    }
    const double pre = col(m - 1);
    const double sub = col(m);
    const double r = std::hypot(pre, sub);
    const double c = r == 0.0 ? 1.0 : pre / r;
    const double s = r == 0.0 ? 0.0 : sub / r;
    const double g_pre = state.g(m - 1);

    state.g.conservativeResize(m + 1);
    state.g(m - 1) = c * g_pre;
    state.g(m) = -s * g_pre;
    col(m - 1) = r;

    state.cs.push_back(c);
    state.sn.push_back(s);
    state.u_cols.push_back(col.head(m));
    state.hess.push_back(column);
    state.last_pre_diag = pre;
    state.last_pre_g = g_pre;

    GivensOutcome out;
    out.gmres_residual = std::abs(state.g(m));
    out.fom_residual = pre == 0.0 ? kInf : std::abs(sub * g_pre / pre);
    return out;
}

std::optional<Vector> solve_coefficients(const ArnoldiState& state, Variant variant) {
    const Index m = state.steps();
    if (m == 0) return Vector();
    Matrix u = Matrix::Zero(m, m);
    for (Index j = 0; j < m; ++j) u.col(j).head(j + 1) = state.u_cols[static_cast<std::size_t>(j)];
    Vector rhs = state.g.head(m);
    if (variant == Variant::fom) {
        u(m - 1, m - 1) = state.last_pre_diag;
        rhs(m - 1) = state.last_pre_g;
    }
    for (Index i = 0; i < m; ++i)
        if (u(i, i) == 0.0) return std::nullopt;
    return Vector(u.triangularView<Eigen::Upper>().solve(rhs));
}

double residual_bound(const ArnoldiState& state, const Vector& y, double computed_residual) {
    double b = computed_residual;
    for (Index j = 0; j < y.size(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        b += (state.e_norms[k] + state.f_norms[k]) * std::abs(y(j));
    }
    return b;
}

TruncationResult recover_solution(const ArnoldiState& state, const Vector& y, double eps, bool use_z) {
    const auto& vecs = use_z ? state.z_basis : state.basis;
    if (static_cast<std::size_t>(y.size()) > vecs.size())
        throw ContractError("recover_solution: more coefficients than basis vectors");
    if (vecs.empty()) throw ContractError("recover_solution: empty basis");
    if (y.size() == 0) {
        TruncationResult r;
        r.kept = LowRankMatrix::zero(vecs.front().rows(), vecs.front().cols());
        return r;
    }
    std::vector<std::pair<double, const LowRankMatrix*>> terms;
    for (Index j = 0; j < y.size(); ++j) terms.emplace_back(y(j), &vecs[static_cast<std::size_t>(j)]);
    return trunc(concat_scaled(terms), eps);
}

double eps_a_schedule(int k, double prev_residual, const SolverConfig& config, const SpectralEstimates& est) {
    const double rho = k <= 1 ? 1.0 : std::max(prev_residual, std::numeric_limits<double>::min());
    const double m = config.m_max;
    double v = config.eps / m;
    switch (config.schedule) {
        case Schedule::relaxed_sigma: v = (config.c1.value_or(est.sigma_min) / m) * config.eps / rho; break;
        case Schedule::relaxed_kappa: v = config.eps / (m * config.c2.value_or(est.condition()) * rho); break;
        case Schedule::fixed: break;
    }
    return std::clamp(v, kMachEps, 0.5);
}

double eps_orth_value(double eps_a_k, const SolverConfig& config) {
    return std::min(eps_a_k, config.eps_orth_cap.value_or(config.eps / config.m_max));
}

double true_relative_residual(const MultitermOperator& op, const LowRankMatrix& x, const Matrix& c1,
                              const Matrix& c2) {
    const LowRankMatrix ax = apply(op, x);
    const LowRankMatrix c(c1, c2);
    const double beta = fro_norm_qr(c);
    if (beta == 0.0) return fro_norm_qr(ax);
    const StackedFactors s = concat_scaled({{1.0, &ax}, {1.0, &c}});
    return fro_norm_qr(LowRankMatrix(s.left, s.right)) / beta;
}

std::pair<double, double> orthonormality_loss(const std::vector<LowRankMatrix>& basis) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const Vector c = kernels::batched_inner_omp(std::span(basis.data(), i + 1), basis[i]);
        for (std::size_t j = 0; j < i; ++j) off = std::max(off, std::abs(c(static_cast<Index>(j))));
        diag = std::max(diag, std::abs(std::sqrt(std::max(c(static_cast<Index>(i)), 0.0)) - 1.0));
    }
    return {off, diag};
}

namespace {

SpectralEstimates estimate(const MultitermOperator& op, const Preconditioner* precond, const SolverConfig& cfg) {
    if (!precond || !precond->has_adjoint()) return estimate_extremes(op, cfg.lanczos);
    LowRankMap map;
    map.rows = op.rows_a();
    map.cols = op.rows_b();
    map.forward = [&](const LowRankMatrix& x) { return apply(op, precond->apply_inverse_exact(x)); };
    map.adjoint = [&](const LowRankMatrix& x) { return precond->apply_inverse_adjoint(apply_adjoint(op, x)); };
    return estimate_extremes(map, cfg.lanczos);
}

LowRankMatrix with_identity(const Truncator& tr, const LowRankMatrix& x, const Tolerance& tol,
                            TruncationResult* info) {
    const Index k = x.rank();
    TruncationResult r = tr(x.left(), Matrix::Identity(k, k), x.right(), tol);
    if (info) *info = r;
    return std::move(r.kept);
}

}  // namespace

SolveResult solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, const SolverConfig& config,
                  const Preconditioner* precond) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    if (c1.rows() != op.rows_a() || c2.rows() != op.rows_b() || c1.cols() != c2.cols())
        throw ContractError("solve: right-hand side factors are " + std::to_string(c1.rows()) + "x" +
                            std::to_string(c1.cols()) + " and " + std::to_string(c2.rows()) + "x" +
                            std::to_string(c2.cols()) + ", operator acts on " + std::to_string(op.rows_a()) + "x" +
                            std::to_string(op.rows_b()));
    require_finite(c1, "solve: C1");
    require_finite(c2, "solve: C2");
    if (precond && !config.flexible && !precond->is_linear())
        throw ContractError("solve: a " + to_string(precond->kind()) +
                            " preconditioner is not a fixed linear map; enable the flexible variant");

    const Truncator& tr = *config.truncator;
    const bool flexible = config.flexible;
    const bool pinned = config.pinned_tolerance.has_value();

    SolveResult res;
    SolveReport& rep = res.report;
    rep.method = std::string(flexible ? "f" : "") + "lr-" + to_string(config.variant);
    rep.threads = kernels::max_threads();
    if (precond) rep.precond_build_time = precond->build_seconds();

    TruncationResult start;
    const LowRankMatrix c(c1, c2);
    const LowRankMatrix v1 = with_identity(tr, c, Tolerance::relative(0.0), &start);
    const double beta = start.kept_norm;
    rep.beta = beta;
    if (beta == 0.0) {
        res.solution = LowRankMatrix::zero(op.rows_a(), op.rows_b());
        rep.termination = Termination::converged;
        rep.true_residual_final = 0.0;
        rep.wall_time = seconds_since(t0);
        return res;
    }

    ArnoldiState st = make_state(beta);
    st.basis.push_back(v1.scaled(1.0 / beta));

    SpectralEstimates est;
    const bool need_sigma = config.schedule == Schedule::relaxed_sigma && !config.c1;
    const bool need_kappa = config.schedule == Schedule::relaxed_kappa && !config.c2;
    if (!pinned && (need_sigma || need_kappa)) {
        est = estimate(op, precond, config);
        rep.estimates = est;
    } else if (config.c1 || config.c2) {
        est.source = EstimateSource::user_supplied;
        est.sigma_min = config.c1.value_or(1.0);
        est.sigma_max = config.c2.value_or(1.0) * est.sigma_min;
        rep.estimates = est;
    }

    double rho_prev = 1.0;
    std::optional<Vector> y_last;
    double computed_last = 1.0;
    Index cum_s = st.basis.front().rank();
    Index cum_z = 0;
    rep.termination = Termination::max_iters;

    for (int m = 1; m <= config.m_max; ++m) {
        const LowRankMatrix& v = st.basis.back();
        LowRankMatrix w_raw;
        if (precond) {
            LowRankMatrix z = flexible ? precond->apply_inverse(v) : precond->apply_inverse_exact(v);
            w_raw = apply(op, z);
            if (flexible) st.z_basis.push_back(std::move(z));
        } else {
            if (flexible) st.z_basis.push_back(v);
            w_raw = apply(op, v);
        }

        const double eps_a = pinned ? *config.pinned_tolerance : eps_a_schedule(m, rho_prev, config, est);
        const Tolerance tol_a =
            pinned ? Tolerance::relative(eps_a) : Tolerance::budget(eps_a, kMachEps, 0.5);
        TruncationResult ta;
        LowRankMatrix w = with_identity(tr, w_raw, tol_a, &ta);
        const double eps_orth =
            pinned ? *config.pinned_tolerance : std::clamp(eps_orth_value(eps_a, config), kMachEps, 0.5);

        // Two Gram-Schmidt passes; h accumulates both, each pass subtracts its own increment.
        Vector h = Vector::Zero(m + 1);
        double f_norm = 0.0;
        double h_next = ta.kept_norm;
        for (int pass = 0; pass < 2; ++pass) {
            const Vector coef = kernels::batched_inner_omp(st.basis, w);
            h.head(m) += coef;
            std::vector<std::pair<double, const LowRankMatrix*>> terms;
            terms.reserve(st.basis.size() + 1);
            terms.emplace_back(1.0, &w);
            for (std::size_t j = 0; j < st.basis.size(); ++j)
                terms.emplace_back(-coef(static_cast<Index>(j)), &st.basis[j]);
            const StackedFactors sf = concat_scaled(terms);
            TruncationResult tg = tr(sf.left, sf.middle, sf.right, Tolerance::relative(eps_orth));
            f_norm += tg.discarded_norm;
            h_next = tg.kept_norm;
            w = std::move(tg.kept);
        }
        h(m) = h_next;

        st.e_norms.push_back(ta.discarded_norm);
        st.f_norms.push_back(f_norm);
        st.eps_a_used.push_back(eps_a);
        st.eps_orth_used.push_back(eps_orth);

        const GivensOutcome go = givens_update(st, h);
        const bool happy = h_next <= config.breakdown_tol * h.norm();
        if (!happy) st.basis.push_back(w.scaled(1.0 / h_next));
        rho_prev = go.gmres_residual / beta;

        IterationRecord rec;
        rec.iter = m;
        rec.eps_a = eps_a;
        rec.eps_orth = eps_orth;
        rec.e_norm = ta.discarded_norm;
        rec.f_norm = f_norm;
        rec.fom_estimate = go.fom_residual / beta;
        rec.basis_rank = happy ? 0 : st.basis.back().rank();
        rec.z_rank = flexible ? st.z_basis.back().rank() : 0;
        cum_s += rec.basis_rank;
        cum_z += rec.z_rank;
        rec.cum_columns_s = cum_s;
        rec.cum_columns_z = cum_z;

        const double computed = config.variant == Variant::gmres ? go.gmres_residual : go.fom_residual;
        auto y = solve_coefficients(st, config.variant);
        rep.iterations = m;
        if (!y) {
            rec.computed_residual = kInf;
            rec.bound = kInf;
            rep.history.push_back(rec);
            if (happy) {
                rep.termination = Termination::breakdown;
                rep.message = "singular projected system at an invariant subspace";
                break;
            }
            continue;
        }
        const double bound = residual_bound(st, *y, computed);
        rec.computed_residual = computed / beta;
        rec.bound = bound / beta;
        rep.history.push_back(rec);
        y_last = std::move(y);
        computed_last = rec.computed_residual;
        rep.bound_final = rec.bound;

        if (rec.bound < config.eps) {
            rep.termination = Termination::converged;
            break;
        }
        if (happy) {
            rep.termination = Termination::breakdown;
            rep.message = "invariant subspace reached but the residual bound is above eps";
            break;
        }
    }
    rep.computed_residual_final = computed_last;
    if (!y_last) {
        y_last = Vector();
        rep.termination = Termination::breakdown;
        rep.message = "no iterate exists (singular projected system)";
        rep.bound_final = 1.0;
    } else if (config.variant == Variant::fom && rep.history.back().computed_residual == kInf &&
               rep.termination == Termination::max_iters) {
        rep.termination = Termination::breakdown;
        rep.message = "projected system singular at the last step; returning the previous iterate";
    }

    // X = -sum_j y_j v_j (or z_j); right preconditioning without flexibility applies P^-1 at the end.
    const double eps_rec = config.recover_eps.value_or(config.eps);
    const Vector neg_y = -*y_last;
    auto recover_at = [&](double eps) {
        LowRankMatrix x = recover_solution(st, neg_y, eps, flexible).kept;
        if (precond && !flexible) x = precond->apply_inverse_exact(x);
        return x;
    };
    res.solution = recover_at(eps_rec);
    if (config.compute_true_residual) {
        rep.true_residual_final = true_relative_residual(op, res.solution, c1, c2);
        // The bound covers the untruncated combination; tighten the final compression until it holds.
        for (double e = eps_rec / 10.0; rep.true_residual_final > rep.bound_final && e >= 1e-14; e /= 10.0) {
            res.solution = recover_at(e);
            rep.true_residual_final = true_relative_residual(op, res.solution, c1, c2);
        }
    }
    rep.solution_rank = res.solution.rank();
    rep.columns_s = cum_s;
    rep.columns_z = cum_z;
    std::tie(rep.orthogonality_loss, rep.normality_loss) = orthonormality_loss(st.basis);
    rep.wall_time = seconds_since(t0);
    if (config.keep_state) res.state = std::move(st);
    return res;
}

}  // namespace lrk
