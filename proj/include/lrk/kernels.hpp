#pragma once

// Data-parallel inner loops of the solvers. Each kernel has an OpenMP
// version used by the library and a serial reference kept for testing and
// benchmarking. Both versions produce bitwise-identical results: the parallel
// split is over independent outputs, never over a reduction.

#include "lrk/lowrank.hpp"

#include <Eigen/Sparse>

#include <span>

namespace lrk {

using SparseMatrix = Eigen::SparseMatrix<double>;

namespace kernels {

/// Blocks [A_1 X, ..., A_p X] (or with A_i^T when `transpose`), written into `out`
/// which is resized to rows(A) x p*cols(X).
void stacked_products_serial(std::span<const SparseMatrix> mats, const Matrix& x, bool transpose,
                             Matrix& out);
void stacked_products_omp(std::span<const SparseMatrix> mats, const Matrix& x, bool transpose,
                          Matrix& out);

/// out_j = <basis_j, w>_F for every basis element.
Vector batched_inner_serial(std::span<const LowRankMatrix> basis, const LowRankMatrix& w);
Vector batched_inner_omp(std::span<const LowRankMatrix> basis, const LowRankMatrix& w);

/// Number of threads the OpenMP kernels will use.
int max_threads();

}  // namespace kernels
}  // namespace lrk
