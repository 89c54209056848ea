#include "lrk/kernels.hpp"

#include "lrk/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <string>

namespace lrk::kernels {

namespace {

void prepare(std::span<const SparseMatrix> mats, const Matrix& x, bool transpose, Matrix& out) {
    if (mats.empty()) throw ContractError("stacked_products: no matrices");
    const Index inner_dim = transpose ? mats[0].rows() : mats[0].cols();
    if (x.rows() != inner_dim) {
        throw ContractError("stacked_products: factor has " + std::to_string(x.rows()) +
                            " rows, operator expects " + std::to_string(inner_dim));
    }
    const Index out_rows = transpose ? mats[0].cols() : mats[0].rows();
    out.resize(out_rows, static_cast<Index>(mats.size()) * x.cols());
}

// One output column; shared by both drivers so results match bit for bit.
inline void product_column(const SparseMatrix& a, const Matrix& x, bool transpose, Index c, Matrix& out,
                           Index dest) {
    if (transpose)
        out.col(dest).noalias() = a.transpose() * x.col(c);
    else
        out.col(dest).noalias() = a * x.col(c);
}

}  // namespace

void stacked_products_serial(std::span<const SparseMatrix> mats, const Matrix& x, bool transpose,
                             Matrix& out) {
    prepare(mats, x, transpose, out);
    const Index k = x.cols();
    const Index total = static_cast<Index>(mats.size()) * k;
    for (Index t = 0; t < total; ++t) product_column(mats[t / k], x, transpose, t % k, out, t);
}

void stacked_products_omp(std::span<const SparseMatrix> mats, const Matrix& x, bool transpose,
                          Matrix& out) {
    prepare(mats, x, transpose, out);
    const Index k = x.cols();
    if (k == 0) return;
    const Index total = static_cast<Index>(mats.size()) * k;
#pragma omp parallel for schedule(static)
    for (Index t = 0; t < total; ++t) product_column(mats[t / k], x, transpose, t % k, out, t);
}

Vector batched_inner_serial(std::span<const LowRankMatrix> basis, const LowRankMatrix& w) {
    Vector out(static_cast<Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) out(static_cast<Index>(j)) = inner(basis[j], w);
    return out;
}

Vector batched_inner_omp(std::span<const LowRankMatrix> basis, const LowRankMatrix& w) {
    const auto m = static_cast<Index>(basis.size());
    // Shape errors must surface here, not inside the parallel region.
    for (const auto& b : basis) {
        if (b.rows() != w.rows() || b.cols() != w.cols())
            throw ContractError("batched_inner: basis element shape differs from the vector");
    }
    Vector out(m);
#pragma omp parallel for schedule(dynamic, 1)
    for (Index j = 0; j < m; ++j) out(j) = inner(basis[static_cast<std::size_t>(j)], w);
    return out;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace lrk::kernels
