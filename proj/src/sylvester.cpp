#include "lrk/sylvester.hpp"

#include "lrk/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lrk {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Block {
    Index start;
    Index size;
};

std::vector<Block> diagonal_blocks(const Matrix& t) {
    std::vector<Block> out;
    const Index n = t.rows();
    for (Index i = 0; i < n;) {
        if (i + 1 < n && t(i + 1, i) != 0.0) {
            out.push_back({i, 2});
            i += 2;
        } else {
            out.push_back({i, 1});
            i += 1;
        }
    }
    return out;
}

[[noreturn]] void singular(Index i, Index j) {
    throw SylvesterSingularError("Sylvester operator is singular: eigenvalues of A (block " + std::to_string(i) +
                                 ") and -B (block " + std::to_string(j) + ") coincide");
}

}  // namespace

Matrix solve_quasi_triangular_sylvester(const Matrix& ta, const Matrix& tb, const Matrix& c) {
    const Index n = ta.rows();
    const Index m = tb.rows();
    if (c.rows() != n || c.cols() != m) throw ContractError("solve_quasi_triangular_sylvester: shape mismatch");
    const double scale = std::max(ta.cwiseAbs().maxCoeff(), tb.cwiseAbs().maxCoeff());
    const double tiny = 1e-14 * scale;

    const auto a_blocks = diagonal_blocks(ta);
    const auto b_blocks = diagonal_blocks(tb);
    const RowMatrix ta_rows = ta;  // row slices of T_A are read in the inner loop

    Matrix y = Matrix::Zero(n, m);
    Matrix yj;
    for (auto bj = b_blocks.rbegin(); bj != b_blocks.rend(); ++bj) {
        const Index j = bj->start;
        const Index e = bj->size;
        // Columns right of the block are known: Y(:, k) for k > j contribute Y(:,k) TB(j,k)^T.
        Matrix rhs = c.middleCols(j, e);
        const Index right = m - j - e;
        if (right > 0) rhs.noalias() -= y.rightCols(right) * tb.block(j, j + e, e, right).transpose();
        const Matrix mj = tb.block(j, j, e, e).transpose();  // T_A Z + Z M_j = rhs

        yj.setZero(n, e);
        for (auto ai = a_blocks.rbegin(); ai != a_blocks.rend(); ++ai) {
            const Index i = ai->start;
            const Index d = ai->size;
            Matrix w = rhs.middleRows(i, d);
            const Index below = n - i - d;
            if (below > 0) w.noalias() -= ta_rows.block(i, i + d, d, below) * yj.bottomRows(below);

            if (d == 1 && e == 1) {
                const double den = ta(i, i) + mj(0, 0);
                if (std::abs(den) <= tiny) singular(i, j);
                yj(i, 0) = w(0, 0) / den;
                continue;
            }
            const Index s = d * e;
            Matrix k = Matrix::Zero(s, s);
            const Matrix tii = ta.block(i, i, d, d);
            for (Index q = 0; q < e; ++q) k.block(q * d, q * d, d, d) = tii;
            for (Index q = 0; q < e; ++q)
                for (Index p = 0; p < e; ++p) k.block(q * d, p * d, d, d).diagonal().array() += mj(p, q);
            Eigen::FullPivLU<Matrix> lu(k);
            if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= tiny) singular(i, j);
            const Vector z = lu.solve(Eigen::Map<const Vector>(w.data(), s));
            yj.block(i, 0, d, e) = Eigen::Map<const Matrix>(z.data(), d, e);
        }
        y.middleCols(j, e) = yj;
    }
    return y;
}

SylvesterSolver::SylvesterSolver(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols()) throw ContractError("SylvesterSolver: A and B must be square");
    require_finite(a, "SylvesterSolver: A");
    require_finite(b, "SylvesterSolver: B");
    Eigen::RealSchur<Matrix> sa(a);
    Eigen::RealSchur<Matrix> sb(b);
    if (sa.info() != Eigen::Success) throw FactorizationError("SylvesterSolver: real Schur form of A failed");
    if (sb.info() != Eigen::Success) throw FactorizationError("SylvesterSolver: real Schur form of B failed");
    ua_ = sa.matrixU();
    ta_ = sa.matrixT();
    ub_ = sb.matrixU();
    tb_ = sb.matrixT();
    // T_A^T Y + Y T_B = C becomes quasi upper triangular after reversing rows and columns.
    ta_rev_ = ta_.transpose().reverse();
    tb_rev_ = tb_.transpose().reverse();
}

Matrix SylvesterSolver::core(const Matrix& c_hat, bool adjoint) const {
    if (!adjoint) return solve_quasi_triangular_sylvester(ta_, tb_, c_hat);
    const Matrix rev = c_hat.reverse();
    return solve_quasi_triangular_sylvester(ta_rev_, tb_rev_, rev).reverse();
}

Matrix SylvesterSolver::solve(const Matrix& c) const {
    if (c.rows() != rows() || c.cols() != cols()) throw ContractError("SylvesterSolver::solve: shape mismatch");
    return ua_ * core(ua_.transpose() * c * ub_, false) * ub_.transpose();
}

Matrix SylvesterSolver::solve_adjoint(const Matrix& c) const {
    if (c.rows() != rows() || c.cols() != cols())
        throw ContractError("SylvesterSolver::solve_adjoint: shape mismatch");
    return ua_ * core(ua_.transpose() * c * ub_, true) * ub_.transpose();
}

TruncationResult SylvesterSolver::solve_lowrank(const LowRankMatrix& v, double eps, bool adjoint) const {
    if (v.rows() != rows() || v.cols() != cols())
        throw ContractError("SylvesterSolver::solve_lowrank: shape mismatch");
    TruncationResult res;
    res.kept = LowRankMatrix::zero(rows(), cols());
    if (v.is_zero_rank()) return res;
    const Matrix c_hat = (ua_.transpose() * v.left()) * (ub_.transpose() * v.right()).transpose();
    const Matrix y_hat = core(c_hat, adjoint);

    Eigen::BDCSVD<Matrix> svd(y_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Index r = s.size();
    Vector tail_sq(r + 1);
    tail_sq(r) = 0.0;
    for (Index i = r - 1; i >= 0; --i) tail_sq(i) = tail_sq(i + 1) + s(i) * s(i);
    const double total = std::sqrt(tail_sq(0));
    res.input_norm = total;
    if (total == 0.0) return res;
    Index k = 0;
    if (eps > 0.0) {
        while (k < r && std::sqrt(tail_sq(k)) > eps * total) ++k;
    } else {
        const double cut = static_cast<double>(r) * std::numeric_limits<double>::epsilon() * s(0);
        while (k < r && s(k) > cut) ++k;
    }
    res.kept_rank = k;
    res.eps_rel_used = eps;
    res.discarded_norm = std::sqrt(tail_sq(k));
    res.kept_norm = std::sqrt(std::max(tail_sq(0) - tail_sq(k), 0.0));
    if (k == 0) return res;
    const Vector root = s.head(k).cwiseSqrt();
    res.kept = LowRankMatrix(ua_ * (svd.matrixU().leftCols(k) * root.asDiagonal()),
                             ub_ * (svd.matrixV().leftCols(k) * root.asDiagonal()));
    return res;
}

}  // namespace lrk
