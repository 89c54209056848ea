#include "lrk/precond.hpp"

#include "lrk/errors.hpp"
#include "lrk/krylov.hpp"
#include "lrk/sylvester.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <optional>
#include <string>

namespace lrk {

std::string to_string(PrecondKind k) {
    switch (k) {
        case PrecondKind::one_term: return "one_term";
        case PrecondKind::mean_based: return "mean_based";
        case PrecondKind::ullmann: return "ullmann";
        case PrecondKind::sylvester: return "sylvester";
        case PrecondKind::inner_krylov: return "inner_krylov";
    }
    return "unknown";
}

PreconditionerSpec PreconditionerSpec::one_term(SparseMatrix t1, SparseMatrix p1) {
    PreconditionerSpec s;
    s.kind = PrecondKind::one_term;
    s.t1 = std::move(t1);
    s.p1 = std::move(p1);
    return s;
}

PreconditionerSpec PreconditionerSpec::mean_based(SparseMatrix k0, Index n_b) {
    PreconditionerSpec s;
    s.kind = PrecondKind::mean_based;
    s.k0 = std::move(k0);
    s.right_order = n_b;
    return s;
}

PreconditionerSpec PreconditionerSpec::ullmann(std::vector<SparseMatrix> k_list, std::vector<SparseMatrix> g_list) {
    PreconditionerSpec s;
    s.kind = PrecondKind::ullmann;
    if (!k_list.empty()) s.k0 = k_list.front();
    s.k_list = std::move(k_list);
    s.g_list = std::move(g_list);
    return s;
}

PreconditionerSpec PreconditionerSpec::sylvester(SparseMatrix a_s, SparseMatrix b_s, SylvesterStrategy strategy,
                                                 int iters) {
    PreconditionerSpec s;
    s.kind = PrecondKind::sylvester;
    s.a_s = std::move(a_s);
    s.b_s = std::move(b_s);
    s.strategy = strategy;
    s.inner_iters = iters;
    return s;
}

PreconditionerSpec PreconditionerSpec::inner_krylov(std::shared_ptr<const MultitermOperator> op, int iters) {
    PreconditionerSpec s;
    s.kind = PrecondKind::inner_krylov;
    s.inner_op = std::move(op);
    s.inner_iters = iters;
    return s;
}

SparseMatrix ullmann_gbar(const std::vector<SparseMatrix>& k_list, const std::vector<SparseMatrix>& g_list) {
    if (k_list.empty() || k_list.size() != g_list.size())
        throw ContractError("ullmann_gbar: K and G lists must be nonempty and of equal length");
    const SparseMatrix& k0 = k_list.front();
    const double denom = k0.squaredNorm();
    if (denom == 0.0) throw ContractError("ullmann_gbar: trace(K0^T K0) is zero");
    SparseMatrix gbar(g_list.front().rows(), g_list.front().cols());
    for (std::size_t i = 0; i < k_list.size(); ++i) {
        const SparseMatrix& ki = k_list[i];
        if (ki.rows() != k0.rows() || ki.cols() != k0.cols())
            throw ContractError("ullmann_gbar: K_" + std::to_string(i) + " has a different shape than K_0");
        if (g_list[i].rows() != gbar.rows() || g_list[i].cols() != gbar.cols())
            throw ContractError("ullmann_gbar: G_" + std::to_string(i) + " has a different shape than G_0");
        // trace(K_i^T K_0) = sum of entrywise products
        const double coef = ki.cwiseProduct(k0).sum() / denom;
        if (coef != 0.0) gbar += coef * g_list[i];
    }
    gbar.makeCompressed();
    return gbar;
}

namespace {

using SparseLu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

std::unique_ptr<SparseLu> factorize(const SparseMatrix& a, const std::string& name) {
    if (a.rows() != a.cols()) throw ContractError("preconditioner: " + name + " is not square");
    auto lu = std::make_unique<SparseLu>();
    SparseMatrix c = a;
    c.makeCompressed();
    lu->analyzePattern(c);
    lu->factorize(c);
    if (lu->info() != Eigen::Success)
        throw FactorizationError("preconditioner: sparse LU of " + name + " failed (singular matrix): " +
                                 lu->lastErrorMessage());
    return lu;
}

SparseMatrix identity(Index n) {
    SparseMatrix i(n, n);
    i.setIdentity();
    return i;
}

}  // namespace

struct Preconditioner::Impl {
    PreconditionerSpec spec;
    std::optional<MultitermOperator> forward;
    std::unique_ptr<SparseLu> left;   // null: identity
    std::unique_ptr<SparseLu> right;  // null: identity
    std::unique_ptr<SparseLu> left_t, right_t;  // transposes, for the adjoint
    std::unique_ptr<SylvesterSolver> sylvester;
    double build_seconds = 0.0;

    bool inner() const {
        return spec.kind == PrecondKind::inner_krylov ||
               (spec.kind == PrecondKind::sylvester && spec.strategy == SylvesterStrategy::inner_krylov);
    }
};

Preconditioner Preconditioner::build(const PreconditionerSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    auto impl = std::make_shared<Impl>();
    impl->spec = spec;
    if (!(spec.eps_precond >= 0.0 && spec.eps_precond < 1.0))
        throw ContractError("preconditioner: eps_precond must lie in [0, 1)");

    switch (spec.kind) {
        case PrecondKind::one_term:
            impl->left = factorize(spec.t1, "T1");
            impl->right = factorize(spec.p1, "P1");
            impl->left_t = factorize(spec.t1.transpose(), "T1^T");
            impl->right_t = factorize(spec.p1.transpose(), "P1^T");
            impl->forward.emplace(std::vector<KronTerm>{{spec.t1, spec.p1}});
            break;
        case PrecondKind::mean_based:
            impl->left = factorize(spec.k0, "K0");
            impl->left_t = factorize(spec.k0.transpose(), "K0^T");
            if (spec.right_order > 0)
                impl->forward.emplace(std::vector<KronTerm>{{spec.k0, identity(spec.right_order)}});
            break;
        case PrecondKind::ullmann: {
            const SparseMatrix gbar = ullmann_gbar(spec.k_list, spec.g_list);
            impl->left = factorize(spec.k0, "K0");
            impl->right = factorize(gbar, "Gbar");
            impl->left_t = factorize(spec.k0.transpose(), "K0^T");
            impl->right_t = factorize(gbar.transpose(), "Gbar^T");
            impl->forward.emplace(std::vector<KronTerm>{{spec.k0, gbar}});
            break;
        }
        case PrecondKind::sylvester: {
            if (spec.a_s.rows() != spec.a_s.cols() || spec.b_s.rows() != spec.b_s.cols())
                throw ContractError("preconditioner: Sylvester coefficients must be square");
            impl->forward.emplace(std::vector<KronTerm>{{spec.a_s, identity(spec.b_s.rows())},
                                                        {identity(spec.a_s.rows()), spec.b_s}});
            if (spec.strategy == SylvesterStrategy::direct_dense) {
                const Index n = std::max(spec.a_s.rows(), spec.b_s.rows());
                if (n > spec.dense_guard)
                    throw ResourceError("preconditioner: dense Sylvester solve of order " + std::to_string(n) +
                                        " exceeds guard " + std::to_string(spec.dense_guard) +
                                        "; use the inner_krylov strategy");
                impl->sylvester = std::make_unique<SylvesterSolver>(Matrix(spec.a_s), Matrix(spec.b_s));
            }
            break;
        }
        case PrecondKind::inner_krylov:
            if (!spec.inner_op) throw ContractError("preconditioner: inner_krylov needs an operator");
            impl->forward.emplace(*spec.inner_op);
            break;
    }
    if (impl->inner() && spec.inner_iters < 1) throw ContractError("preconditioner: inner_iters must be positive");

    impl->build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Preconditioner p;
    p.impl_ = std::move(impl);
    return p;
}

const PreconditionerSpec& Preconditioner::spec() const { return impl_->spec; }
double Preconditioner::build_seconds() const { return impl_->build_seconds; }

bool Preconditioner::is_linear() const {
    const auto k = impl_->spec.kind;
    return k == PrecondKind::one_term || k == PrecondKind::mean_based || k == PrecondKind::ullmann;
}

bool Preconditioner::has_adjoint() const { return !impl_->inner(); }

const MultitermOperator& Preconditioner::forward_operator() const {
    if (!impl_->forward) throw ContractError("preconditioner: the mean_based forward operator needs the order of the right factor");
    return *impl_->forward;
}

namespace {

Matrix lu_solve(const SparseLu* lu, const Matrix& x) {
    if (!lu || x.cols() == 0) return x;
    return lu->solve(x);
}

}  // namespace

LowRankMatrix Preconditioner::apply_inverse(const LowRankMatrix& v) const {
    if (v.is_zero_rank()) return v;
    const double eps = impl_->spec.eps_precond;
    const LowRankMatrix vt = trunc(v.left(), Matrix::Identity(v.rank(), v.rank()), v.right(), eps).kept;
    if (impl_->sylvester) return impl_->sylvester->solve_lowrank(vt, eps).kept;
    return apply_inverse_exact(vt);
}

LowRankMatrix Preconditioner::apply_inverse_exact(const LowRankMatrix& v) const {
    const Impl& im = *impl_;
    if (im.sylvester) return im.sylvester->solve_lowrank(v, 0.0).kept;
    if (im.inner()) {
        if (v.is_zero_rank()) return v;
        SolverConfig cfg;
        cfg.variant = Variant::gmres;
        cfg.m_max = im.spec.inner_iters;
        cfg.eps = std::max(im.spec.eps_precond, 1e-12);
        cfg.schedule = Schedule::fixed;
        cfg.compute_true_residual = false;
        const MultitermOperator& op =
            im.spec.kind == PrecondKind::inner_krylov ? *im.spec.inner_op : *im.forward;
        // P(Y) = V is P(Y) + (-V_L) V_R^T = 0
        return solve(op, -v.left(), v.right(), cfg).solution;
    }
    return LowRankMatrix(lu_solve(im.left.get(), v.left()), lu_solve(im.right.get(), v.right()));
}

LowRankMatrix Preconditioner::apply_inverse_adjoint(const LowRankMatrix& v) const {
    const Impl& im = *impl_;
    if (im.inner()) throw ContractError("preconditioner: inner Krylov application has no adjoint");
    if (im.sylvester) return im.sylvester->solve_lowrank(v, 0.0, true).kept;
    return LowRankMatrix(lu_solve(im.left_t.get(), v.left()), lu_solve(im.right_t.get(), v.right()));
}

PreconditionerSpec convdiff_mean_precond(const ConvDiffProblem& problem, bool use_psi1) {
    const SparseMatrix& left_coef = use_psi1 ? problem.psi1 : problem.phi1;
    SparseMatrix a_s = problem.nu * problem.t + kPsi1Mean * SparseMatrix(left_coef * problem.b);
    SparseMatrix b_s = problem.nu * problem.t + kPhi2Mean * SparseMatrix(problem.psi2 * problem.b);
    a_s.makeCompressed();
    b_s.makeCompressed();
    return PreconditionerSpec::sylvester(std::move(a_s), std::move(b_s));
}

}  // namespace lrk
