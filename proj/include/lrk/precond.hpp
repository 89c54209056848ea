#pragma once

// Right preconditioners with Kronecker structure.

#include "lrk/kronop.hpp"
#include "lrk/lowrank.hpp"
#include "lrk/problems.hpp"

#include <memory>
#include <string>
#include <vector>

namespace lrk {

enum class PrecondKind { one_term, mean_based, ullmann, sylvester, inner_krylov };
enum class SylvesterStrategy { direct_dense, inner_krylov };

std::string to_string(PrecondKind k);

inline constexpr Index kDefaultSylvesterGuard = 6000;

struct PreconditionerSpec {
    PrecondKind kind = PrecondKind::one_term;
    SparseMatrix t1, p1;                       ///< one_term: X -> T1 X P1^T
    SparseMatrix k0;                           ///< mean_based, ullmann
    Index right_order = 0;                     ///< mean_based: order of the identity factor
    std::vector<SparseMatrix> k_list, g_list;  ///< ullmann
    SparseMatrix a_s, b_s;                     ///< sylvester: A_s Y + Y B_s^T
    SylvesterStrategy strategy = SylvesterStrategy::direct_dense;
    std::shared_ptr<const MultitermOperator> inner_op;  ///< inner_krylov
    int inner_iters = 10;
    double eps_precond = 1e-3;
    Index dense_guard = kDefaultSylvesterGuard;

    static PreconditionerSpec one_term(SparseMatrix t1, SparseMatrix p1);
    /// n_b > 0 also makes the forward operator K0 X available.
    static PreconditionerSpec mean_based(SparseMatrix k0, Index n_b = 0);
    static PreconditionerSpec ullmann(std::vector<SparseMatrix> k_list, std::vector<SparseMatrix> g_list);
    static PreconditionerSpec sylvester(SparseMatrix a_s, SparseMatrix b_s,
                                        SylvesterStrategy strategy = SylvesterStrategy::direct_dense,
                                        int iters = 10);
    static PreconditionerSpec inner_krylov(std::shared_ptr<const MultitermOperator> op, int iters = 10);
};

/// Factorized preconditioner. Immutable and cheap to copy.
class Preconditioner {
public:
    /// Throws FactorizationError naming a singular matrix, ResourceError if a
    /// dense Sylvester solve would exceed the guard.
    static Preconditioner build(const PreconditionerSpec& spec);

    const PreconditionerSpec& spec() const;
    PrecondKind kind() const { return spec().kind; }

    /// Truncate V to eps_precond, then solve P(Y) = V.
    LowRankMatrix apply_inverse(const LowRankMatrix& v) const;
    /// Solve without the pre-truncation. Sylvester results are kept at
    /// numerical rank; inner_krylov is never exact.
    LowRankMatrix apply_inverse_exact(const LowRankMatrix& v) const;
    /// Solve P^*(Y) = V. Not available for inner_krylov kinds.
    LowRankMatrix apply_inverse_adjoint(const LowRankMatrix& v) const;

    /// The operator P itself (multiply back). For inner_krylov, the operator it approximately inverts.
    const MultitermOperator& forward_operator() const;

    /// one_term, mean_based and ullmann: a fixed linear map.
    bool is_linear() const;
    bool has_adjoint() const;
    double build_seconds() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

/// sum_i trace(K_i^T K_0) / trace(K_0^T K_0) G_i. Throws ContractError on
/// mismatched lists or trace(K_0^T K_0) = 0.
SparseMatrix ullmann_gbar(const std::vector<SparseMatrix>& k_list, const std::vector<SparseMatrix>& g_list);

/// Mean values of psi_1(y) = y and phi_2(x) = -2(2x+1) on (0,1).
inline constexpr double kPsi1Mean = 0.5;
inline constexpr double kPhi2Mean = -4.0;

/// Sylvester preconditioner (nu T + psi1_mean Phi1 B) Y + Y (nu T + phi2_mean B^T Psi2) = V.
/// With `use_psi1` the left coefficient uses Psi1 B instead of Phi1 B.
PreconditionerSpec convdiff_mean_precond(const ConvDiffProblem& problem, bool use_psi1 = false);

}  // namespace lrk
