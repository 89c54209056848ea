#pragma once

#include "lrk/krylov.hpp"

#include <cstdint>
#include <optional>

namespace lrk {

struct CgConfig {
    int max_iter = 200;
    double eps = 1e-6;        ///< target relative residual
    double x_tol = 1e-12;     ///< relative truncation of the iterate X
    /// Every truncation (X included) uses this tolerance instead.
    std::optional<double> pinned_tolerance;
    /// Stop when ||X_{k+1} - X_k||_F <= eps.
    bool stagnation_guard = false;
    /// Randomized check <A X, Y> = <X, A Y> before iterating.
    bool check_symmetry = true;
    std::uint64_t seed = 7;
    std::shared_ptr<const Truncator> truncator = default_truncator();

    void validate() const;
};

/// min(eps / min(residual, 1), 1): relative tolerance for R, P, Q and Z.
double cg_threshold(double residual, double eps);

/// Preconditioned low-rank CG for symmetric positive definite operators.
/// Update order per step: X, explicit R, convergence check, truncate R, Z, beta, P, Q.
/// Throws SpdViolation if the operator fails the symmetry check or <P, A P> <= 0.
SolveResult cg_solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, const CgConfig& config,
                     const Preconditioner* precond = nullptr);

}  // namespace lrk
