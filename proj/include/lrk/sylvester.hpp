#pragma once

#include "lrk/lowrank.hpp"

namespace lrk {

/// Dense Bartels-Stewart solver for A Y + Y B^T = C via real Schur forms of
/// A and B, computed once at construction.
class SylvesterSolver {
public:
    /// Throws ContractError for non-square input.
    SylvesterSolver(const Matrix& a, const Matrix& b);

    /// A Y + Y B^T = C. Throws SylvesterSingularError if the spectra of A and -B meet.
    Matrix solve(const Matrix& c) const;
    /// A^T Y + Y B = C.
    Matrix solve_adjoint(const Matrix& c) const;

    /// Right-hand side V_L V_R^T; the solution is compressed by its SVD to
    /// relative tolerance eps (0 keeps the numerical rank).
    TruncationResult solve_lowrank(const LowRankMatrix& v, double eps, bool adjoint = false) const;

    Index rows() const noexcept { return ua_.rows(); }
    Index cols() const noexcept { return ub_.rows(); }

private:
    Matrix core(const Matrix& c_hat, bool adjoint) const;

    Matrix ua_, ta_, ub_, tb_;
    Matrix ta_rev_, tb_rev_;  // J T^T J, used by the adjoint
};

/// T_A Y + Y T_B^T = C for quasi upper triangular T_A, T_B (real Schur forms).
Matrix solve_quasi_triangular_sylvester(const Matrix& ta, const Matrix& tb, const Matrix& c);

}  // namespace lrk
