#pragma once

// Dense reference solvers on the materialized Kronecker system. Small sizes only.

#include "lrk/kronop.hpp"
#include "lrk/lowrank.hpp"

#include <vector>

namespace lrk::oracle {

/// A vec(X) = b with A = sum_i B_i (x) A_i and b = -vec(C1 C2^T).
struct DenseSystem {
    Matrix a;
    Vector b;
};

DenseSystem dense_system(const MultitermOperator& op, const Matrix& c1, const Matrix& c2,
                         std::size_t guard = kDefaultKronGuard);

/// LU solve of the dense system, returned as an n_A x n_B matrix.
/// Throws FactorizationError if the system matrix is singular.
Matrix dense_solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2,
                   std::size_t guard = kDefaultKronGuard);

/// Arnoldi with two-pass Gram-Schmidt and no truncation. Entry m-1 of the
/// vectors describes step m. `residuals` are absolute.
struct DenseKrylov {
    double beta = 0.0;
    Matrix hessenberg;                ///< (m+1) x m, m = steps taken
    std::vector<double> residuals;    ///< GMRES: min ||b - A x||; FOM: h_{m+1,m} |e_m^T y|
    std::vector<double> true_residuals;  ///< ||b - A x_m|| computed directly
    std::vector<Vector> iterates;     ///< x_m
    bool breakdown = false;
};

DenseKrylov dense_gmres(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int m,
                        std::size_t guard = kDefaultKronGuard);
DenseKrylov dense_fom(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int m,
                      std::size_t guard = kDefaultKronGuard);

/// Plain CG; residuals[k] = ||b - A x_{k+1}|| from the recurrence.
struct DenseCg {
    double beta = 0.0;
    std::vector<double> residuals;
    std::vector<Vector> iterates;
};

DenseCg dense_cg(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int max_iter, double rel_tol,
                 std::size_t guard = kDefaultKronGuard);

struct DenseTrunc {
    Matrix kept;
    Index rank = 0;
    double discarded_norm = 0.0;
};

/// Full SVD of L M N^T and the tail rule of the truncation routine.
DenseTrunc dense_trunc_oracle(const Matrix& l, const Matrix& m, const Matrix& n, double eps,
                              std::size_t guard = kDefaultMaterializeGuard);

}  // namespace lrk::oracle
