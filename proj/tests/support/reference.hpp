#pragma once

// Independent dense references for the tests. Nothing here calls the
// library's own dense code paths.

#include "lrk/kronop.hpp"
#include "lrk/lowrank.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <random>
#include <vector>

namespace ref {

using lrk::Index;
using lrk::Matrix;
using lrk::SparseMatrix;
using lrk::Vector;

inline Matrix gaussian(Index r, Index c, std::mt19937_64& gen) {
    std::normal_distribution<double> d;
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) m(i, j) = d(gen);
    return m;
}

inline lrk::LowRankMatrix random_lr(Index n, Index m, Index k, std::mt19937_64& gen) {
    return lrk::LowRankMatrix(gaussian(n, k, gen), gaussian(m, k, gen));
}

/// Sparse matrix with roughly `density` nonzeros per entry plus `shift` on the diagonal.
inline SparseMatrix random_sparse(Index n, double density, double shift, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> d;
    Matrix m = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (u(gen) < density) m(i, j) = d(gen);
    m.diagonal().array() += shift;
    return m.sparseView();
}

inline Matrix dense(const lrk::LowRankMatrix& x) { return x.left() * x.right().transpose(); }

inline Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

inline Matrix unvec(const Vector& v, Index rows, Index cols) { return Eigen::Map<const Matrix>(v.data(), rows, cols); }

/// sum_i B_i (x) A_i through Eigen's Kronecker product.
inline Matrix kron_matrix(const lrk::MultitermOperator& op) {
    const Index n = op.rows_a() * op.rows_b();
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < op.num_terms(); ++i) {
        const Matrix a = op.a_factors()[i];
        const Matrix b = op.b_factors()[i];
        out += Eigen::kroneckerProduct(b, a).eval();
    }
    return out;
}

/// sum_i A_i X B_i^T densely.
inline Matrix apply_dense(const lrk::MultitermOperator& op, const Matrix& x) {
    Matrix out = Matrix::Zero(op.rows_a(), op.rows_b());
    for (std::size_t i = 0; i < op.num_terms(); ++i)
        out += Matrix(op.a_factors()[i]) * x * Matrix(op.b_factors()[i]).transpose();
    return out;
}

/// Truncated SVD with the tail rule, via JacobiSVD.
struct Trunc {
    Matrix kept;
    Index rank = 0;
};

inline Trunc svd_truncate(const Matrix& p, double eps) {
    Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    const double total = s.norm();
    Trunc t;
    if (total == 0.0) {
        t.kept = Matrix::Zero(p.rows(), p.cols());
        return t;
    }
    Index k = 0;
    while (k < s.size() && s.tail(s.size() - k).norm() > eps * total) ++k;
    t.rank = k;
    t.kept = svd.matrixU().leftCols(k) * s.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
    return t;
}

/// Well-conditioned random p-term operator: A_1, B_1 shifted identities, the rest small.
inline lrk::MultitermOperator random_operator(Index n, int p, std::mt19937_64& gen, double scale = 0.15) {
    std::vector<lrk::KronTerm> terms;
    for (int i = 0; i < p; ++i) {
        SparseMatrix a = random_sparse(n, 0.3, i == 0 ? 3.0 : 0.0, gen);
        SparseMatrix b = random_sparse(n, 0.3, i == 0 ? 3.0 : 0.0, gen);
        if (i > 0) {
            a *= scale;
            b *= scale;
        } else {
            a *= 0.3;
            b *= 0.3;
            SparseMatrix id(n, n);
            id.setIdentity();
            a += 2.0 * id;
            b += 2.0 * id;
        }
        terms.push_back({a, b});
    }
    return lrk::MultitermOperator(std::move(terms));
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double nb = b.norm();
    return nb == 0.0 ? a.norm() : (a - b).norm() / nb;
}

}  // namespace ref
