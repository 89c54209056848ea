#include "lrk/lowrank.hpp"

#include "lrk/errors.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lrk {

namespace {

constexpr double kMachEps = std::numeric_limits<double>::epsilon();

struct ThinQr {
    Matrix q;  // n x k, k = min(n, r)
    Matrix r;  // k x r
};

ThinQr thin_qr(const Matrix& a) {
    const Index n = a.rows();
    const Index k = std::min(n, a.cols());
    ThinQr out;
    if (k == 0) {
        out.q = Matrix::Zero(n, 0);
        out.r = Matrix::Zero(0, a.cols());
        return out;
    }
    Eigen::HouseholderQR<Matrix> qr(a);
    out.q = qr.householderQ() * Matrix::Identity(n, k);
    out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return out;
}

void check_stack(const Matrix& L, const Matrix& M, const Matrix& N) {
    if (M.rows() != L.cols() || M.cols() != N.cols()) {
        throw ContractError("trunc: middle factor is " + std::to_string(M.rows()) + "x" +
                            std::to_string(M.cols()) + " but outer factors have " +
                            std::to_string(L.cols()) + " and " + std::to_string(N.cols()) +
                            " columns");
    }
    require_finite(L, "trunc: left factor");
    require_finite(M, "trunc: middle factor");
    require_finite(N, "trunc: right factor");
}

}  // namespace

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
}

LowRankMatrix::LowRankMatrix(Matrix left, Matrix right) : left_(std::move(left)), right_(std::move(right)) {
    if (left_.cols() != right_.cols()) {
        throw ContractError("LowRankMatrix: factor column counts differ (" +
                            std::to_string(left_.cols()) + " vs " + std::to_string(right_.cols()) + ")");
    }
    require_finite(left_, "LowRankMatrix left factor");
    require_finite(right_, "LowRankMatrix right factor");
}

LowRankMatrix LowRankMatrix::zero(Index rows, Index cols) {
    return LowRankMatrix(Matrix::Zero(rows, 0), Matrix::Zero(cols, 0));
}

LowRankMatrix LowRankMatrix::scaled(double alpha) const {
    const double s = std::sqrt(std::abs(alpha));
    return LowRankMatrix(left_ * (alpha < 0 ? -s : s), right_ * s);
}

TruncationResult trunc(const Matrix& L, const Matrix& M, const Matrix& N, double eps_rel) {
    return trunc(L, M, N, Tolerance::relative(eps_rel));
}

TruncationResult trunc(const Matrix& L, const Matrix& M, const Matrix& N, const Tolerance& tol) {
    check_stack(L, M, N);
    if (!(tol.value >= 0.0)) throw ContractError("trunc: tolerance must be nonnegative");

    TruncationResult res;
    res.kept = LowRankMatrix::zero(L.rows(), N.rows());
    if (L.cols() == 0 || N.cols() == 0) return res;

    const ThinQr ql = thin_qr(L);
    const ThinQr qn = thin_qr(N);
    const Matrix core = ql.r * M * qn.r.transpose();

    Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const Index r = sigma.size();

    // tail[i] = sqrt(sum_{l >= i} sigma_l^2), accumulated from the small end.
    Vector tail_sq(r + 1);
    tail_sq(r) = 0.0;
    for (Index i = r - 1; i >= 0; --i) tail_sq(i) = tail_sq(i + 1) + sigma(i) * sigma(i);
    const double total = std::sqrt(tail_sq(0));
    res.input_norm = total;
    if (total == 0.0) return res;

    double eps_rel = tol.value;
    if (tol.absolute) eps_rel = std::clamp(tol.value / total, tol.clamp_lo, tol.clamp_hi);
    res.eps_rel_used = eps_rel;

    const double threshold = eps_rel * total;
    Index k = 0;
    if (threshold > 0.0) {
        while (k < r && std::sqrt(tail_sq(k)) > threshold) ++k;
    } else {
        const double cutoff = static_cast<double>(std::max(L.rows(), N.rows())) * kMachEps * sigma(0);
        while (k < r && sigma(k) > cutoff) ++k;
    }

    res.kept_rank = k;
    res.discarded_norm = std::sqrt(tail_sq(k));
    res.kept_norm = std::sqrt(std::max(tail_sq(0) - tail_sq(k), 0.0));
    if (k == 0) return res;

    const Vector root = sigma.head(k).cwiseSqrt();
    Matrix f = ql.q * (svd.matrixU().leftCols(k) * root.asDiagonal());
    Matrix g = qn.q * (svd.matrixV().leftCols(k) * root.asDiagonal());
    res.kept = LowRankMatrix(std::move(f), std::move(g));
    return res;
}

std::shared_ptr<const Truncator> default_truncator() {
    static const auto instance = std::make_shared<const QrSvdTruncator>();
    return instance;
}

double inner(const LowRankMatrix& X, const LowRankMatrix& Y) {
    if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
        throw ContractError("inner: shapes " + std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                            " and " + std::to_string(Y.rows()) + "x" + std::to_string(Y.cols()) + " differ");
    }
    if (X.is_zero_rank() || Y.is_zero_rank()) return 0.0;
    // trace((Y_l^T X_l)(X_r^T Y_r)) = sum_ij (Y_l^T X_l)_ij (Y_r^T X_r)_ij
    const Matrix gl = Y.left().transpose() * X.left();
    const Matrix gr = Y.right().transpose() * X.right();
    return gl.cwiseProduct(gr).sum();
}

double fro_norm_qr(const LowRankMatrix& X) {
    if (X.is_zero_rank()) return 0.0;
    const ThinQr ql = thin_qr(X.left());
    const ThinQr qr = thin_qr(X.right());
    return (ql.r * qr.r.transpose()).norm();
}

double fro_norm(const LowRankMatrix& X) {
    if (X.is_zero_rank()) return 0.0;
    const double sq = inner(X, X);
    // Scale of the summands in the Gram trace; their ratio to the result is
    // the amplification of rounding errors.
    const double scale = X.left().squaredNorm() * X.right().squaredNorm();
    if (sq <= 0.0 || scale > 1e8 * sq) return fro_norm_qr(X);
    return std::sqrt(sq);
}

namespace {

template <typename Getter>
StackedFactors stack_terms(std::size_t count, Getter get) {
    StackedFactors out;
    if (count == 0) throw ContractError("concat_scaled: no terms");
    const LowRankMatrix& first = *get(0).second;
    Index total = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const LowRankMatrix& x = *get(i).second;
        if (x.rows() != first.rows() || x.cols() != first.cols()) {
            throw ContractError("concat_scaled: term " + std::to_string(i) + " has shape " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", expected " +
                                std::to_string(first.rows()) + "x" + std::to_string(first.cols()));
        }
        total += x.rank();
    }
    out.left.resize(first.rows(), total);
    out.right.resize(first.cols(), total);
    out.middle = Matrix::Zero(total, total);
    Index off = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto [c, px] = get(i);
        const Index k = px->rank();
        out.left.middleCols(off, k) = px->left();
        out.right.middleCols(off, k) = px->right();
        out.middle.diagonal().segment(off, k).setConstant(c);
        off += k;
    }
    return out;
}

}  // namespace

StackedFactors concat_scaled(const std::vector<std::pair<double, const LowRankMatrix*>>& terms) {
    return stack_terms(terms.size(), [&](std::size_t i) { return terms[i]; });
}

StackedFactors concat_scaled(const std::vector<std::pair<double, LowRankMatrix>>& terms) {
    return stack_terms(terms.size(), [&](std::size_t i) {
        return std::pair<double, const LowRankMatrix*>(terms[i].first, &terms[i].second);
    });
}

TruncationResult trunc(const StackedFactors& s, double eps_rel) {
    return trunc(s.left, s.middle, s.right, eps_rel);
}

TruncationResult trunc(const StackedFactors& s, const Tolerance& tol) {
    return trunc(s.left, s.middle, s.right, tol);
}

Matrix materialize(const LowRankMatrix& X, std::size_t guard) {
    const auto entries = static_cast<std::size_t>(X.rows()) * static_cast<std::size_t>(X.cols());
    if (entries > guard) {
        throw ResourceError("materialize: " + std::to_string(entries) + " entries exceed guard of " +
                            std::to_string(guard));
    }
    if (X.is_zero_rank()) return Matrix::Zero(X.rows(), X.cols());
    return X.left() * X.right().transpose();
}

}  // namespace lrk
