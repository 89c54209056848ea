#include "lrk/oracle.hpp"

#include "lrk/errors.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace lrk::oracle {

namespace {

Vector vec_rhs(const Matrix& c1, const Matrix& c2) {
    const Matrix c = c1 * c2.transpose();
    return -Eigen::Map<const Vector>(c.data(), c.size());
}

struct Arnoldi {
    Matrix v;  // N x (m+1)
    Matrix h;  // (m+1) x m
    int steps = 0;
    bool breakdown = false;
};

Arnoldi arnoldi(const Matrix& a, const Vector& b, int m) {
    const double beta = b.norm();
    Arnoldi out;
    out.v = Matrix::Zero(a.rows(), m + 1);
    out.h = Matrix::Zero(m + 1, m);
    out.v.col(0) = b / beta;
    for (int j = 0; j < m; ++j) {
        Vector w = a * out.v.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            for (int i = 0; i <= j; ++i) {
                const double c = out.v.col(i).dot(w);
                out.h(i, j) += c;
                w -= c * out.v.col(i);
            }
        }
        const double hn = w.norm();
        out.h(j + 1, j) = hn;
        out.steps = j + 1;
        if (hn <= 1e-14 * out.h.col(j).norm()) {
            out.breakdown = true;
            break;
        }
        out.v.col(j + 1) = w / hn;
    }
    return out;
}

}  // namespace

DenseSystem dense_system(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, std::size_t guard) {
    if (c1.rows() != op.rows_a() || c2.rows() != op.rows_b() || c1.cols() != c2.cols())
        throw ContractError("dense_system: right-hand side factors do not conform to the operator");
    return {materialize_kron(op, guard), vec_rhs(c1, c2)};
}

Matrix dense_solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, std::size_t guard) {
    const DenseSystem sys = dense_system(op, c1, c2, guard);
    Eigen::FullPivLU<Matrix> lu(sys.a);
    if (!lu.isInvertible()) throw FactorizationError("dense_solve: Kronecker system matrix is singular");
    const Vector x = lu.solve(sys.b);
    return Eigen::Map<const Matrix>(x.data(), op.rows_a(), op.rows_b());
}

namespace {

DenseKrylov run(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int m, std::size_t guard,
                bool gmres) {
    if (m < 1) throw ContractError("dense krylov: m must be positive");
    const DenseSystem sys = dense_system(op, c1, c2, guard);
    DenseKrylov out;
    out.beta = sys.b.norm();
    if (out.beta == 0.0) return out;
    const Arnoldi ar = arnoldi(sys.a, sys.b, m);
    out.breakdown = ar.breakdown;
    out.hessenberg = ar.h.topLeftCorner(ar.steps + 1, ar.steps);
    for (int k = 1; k <= ar.steps; ++k) {
        const Matrix hk = ar.h.topLeftCorner(k + 1, k);
        Vector rhs = Vector::Zero(k + 1);
        rhs(0) = out.beta;
        Vector y;
        double res;
        if (gmres) {
            y = hk.colPivHouseholderQr().solve(rhs);
            res = (rhs - hk * y).norm();
        } else {
            y = hk.topRows(k).partialPivLu().solve(rhs.head(k));
            res = std::abs(hk(k, k - 1) * y(k - 1));
        }
        const Vector x = ar.v.leftCols(k) * y;
        out.residuals.push_back(res);
        out.true_residuals.push_back((sys.b - sys.a * x).norm());
        out.iterates.push_back(x);
    }
    return out;
}

}  // namespace

DenseKrylov dense_gmres(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int m, std::size_t guard) {
    return run(op, c1, c2, m, guard, true);
}

DenseKrylov dense_fom(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int m, std::size_t guard) {
    return run(op, c1, c2, m, guard, false);
}

DenseCg dense_cg(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, int max_iter, double rel_tol,
                 std::size_t guard) {
    const DenseSystem sys = dense_system(op, c1, c2, guard);
    DenseCg out;
    out.beta = sys.b.norm();
    if (out.beta == 0.0) return out;
    Vector x = Vector::Zero(sys.b.size());
    Vector r = sys.b;
    Vector p = r;
    double rr = r.squaredNorm();
    for (int k = 0; k < max_iter; ++k) {
        const Vector q = sys.a * p;
        const double alpha = rr / p.dot(q);
        x += alpha * p;
        r -= alpha * q;
        out.residuals.push_back(r.norm());
        out.iterates.push_back(x);
        if (r.norm() < rel_tol * out.beta) break;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    return out;
}

DenseTrunc dense_trunc_oracle(const Matrix& l, const Matrix& m, const Matrix& n, double eps, std::size_t guard) {
    const auto entries = static_cast<std::size_t>(l.rows()) * static_cast<std::size_t>(n.rows());
    if (entries > guard)
        throw ResourceError("dense_trunc_oracle: " + std::to_string(entries) + " entries exceed guard");
    const Matrix p = l * m * n.transpose();
    Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Index r = s.size();
    DenseTrunc out;
    const double total = s.norm();
    if (total == 0.0) {
        out.kept = Matrix::Zero(p.rows(), p.cols());
        return out;
    }
    Index k = 0;
    if (eps * total > 0.0) {
        while (k < r && s.tail(r - k).norm() > eps * total) ++k;
    } else {
        const double cut = static_cast<double>(std::max(p.rows(), p.cols())) *
                           std::numeric_limits<double>::epsilon() * s(0);
        while (k < r && s(k) > cut) ++k;
    }
    out.rank = k;
    out.discarded_norm = s.tail(r - k).norm();
    out.kept = svd.matrixU().leftCols(k) * s.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
    return out;
}

}  // namespace lrk::oracle
