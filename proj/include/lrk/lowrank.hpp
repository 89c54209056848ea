#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

namespace lrk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A matrix held as left * right^T. Rank 0 (no columns) is the zero matrix.
class LowRankMatrix {
public:
    LowRankMatrix() = default;
    /// Throws ContractError on mismatched column counts, NumericError on non-finite entries.
    LowRankMatrix(Matrix left, Matrix right);

    static LowRankMatrix zero(Index rows, Index cols);

    const Matrix& left() const noexcept { return left_; }
    const Matrix& right() const noexcept { return right_; }

    Index rows() const noexcept { return left_.rows(); }
    Index cols() const noexcept { return right_.rows(); }
    /// Number of factor columns (an upper bound on the true rank).
    Index rank() const noexcept { return left_.cols(); }
    bool is_zero_rank() const noexcept { return left_.cols() == 0; }

    /// Returns alpha * (*this), with the factor of sqrt(|alpha|) put on both sides.
    LowRankMatrix scaled(double alpha) const;

private:
    Matrix left_;
    Matrix right_;
};

/// Outcome of a QR+SVD compression of L * M * N^T.
struct TruncationResult {
    LowRankMatrix kept;
    double discarded_norm = 0.0;  ///< Frobenius norm of the dropped part
    Index kept_rank = 0;
    double input_norm = 0.0;  ///< ||L M N^T||_F
    double kept_norm = 0.0;   ///< ||kept||_F, from the retained singular values
    double eps_rel_used = 0.0;
};

/// How the truncation threshold is specified.
///
/// `relative` is the usual eps_rel of the tail test. An absolute budget is
/// converted to a relative tolerance by dividing by ||L M N^T||_F, then clamped.
struct Tolerance {
    double value = 0.0;
    bool absolute = false;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;

    static Tolerance relative(double eps) { return {eps, false, 0.0, 1.0}; }
    static Tolerance budget(double abs, double lo, double hi) { return {abs, true, lo, hi}; }
};

/// Compress L * M * N^T: thin Householder QR of both outer factors, SVD of
/// R_L M R_N^T, keep the smallest k with sqrt(sum_{i>k} sigma_i^2) <= eps_rel * ||Sigma||_F,
/// and return factors scaled by sqrt(sigma) on both sides.
///
/// M may be rectangular (r_L x r_N). If eps_rel * ||Sigma|| == 0, singular values
/// below n * machine-eps * sigma_1 are dropped. A zero product yields rank 0.
TruncationResult trunc(const Matrix& L, const Matrix& M, const Matrix& N, double eps_rel);
TruncationResult trunc(const Matrix& L, const Matrix& M, const Matrix& N, const Tolerance& tol);

/// Pluggable compression routine. Only the QR+SVD route is shipped.
class Truncator {
public:
    virtual ~Truncator() = default;
    virtual TruncationResult operator()(const Matrix& L, const Matrix& M, const Matrix& N,
                                        const Tolerance& tol) const = 0;
};

class QrSvdTruncator final : public Truncator {
public:
    TruncationResult operator()(const Matrix& L, const Matrix& M, const Matrix& N,
                                const Tolerance& tol) const override {
        return trunc(L, M, N, tol);
    }
};

std::shared_ptr<const Truncator> default_truncator();

/// Frobenius inner product trace(Y^T X) from the small Gram matrices only.
double inner(const LowRankMatrix& X, const LowRankMatrix& Y);

/// ||X||_F. Falls back to the QR route when the Gram evaluation loses more
/// than eight digits to cancellation.
double fro_norm(const LowRankMatrix& X);

/// ||X||_F through thin QR of both factors; accurate for nearly cancelling sums.
double fro_norm_qr(const LowRankMatrix& X);

/// Factors [X1_left, X2_left, ...], blockdiag(c_i I), [X1_right, ...] of sum c_i X_i.
struct StackedFactors {
    Matrix left;
    Matrix middle;
    Matrix right;
};

StackedFactors concat_scaled(const std::vector<std::pair<double, const LowRankMatrix*>>& terms);
StackedFactors concat_scaled(const std::vector<std::pair<double, LowRankMatrix>>& terms);

/// Convenience: trunc applied to the output of concat_scaled.
TruncationResult trunc(const StackedFactors& s, double eps_rel);
TruncationResult trunc(const StackedFactors& s, const Tolerance& tol);

inline constexpr std::size_t kDefaultMaterializeGuard = 1'000'000;

/// Dense left * right^T. Throws ResourceError past `guard` entries.
Matrix materialize(const LowRankMatrix& X, std::size_t guard = kDefaultMaterializeGuard);

/// Throws NumericError naming `what` if `m` has a non-finite entry.
void require_finite(const Matrix& m, const char* what);

}  // namespace lrk
