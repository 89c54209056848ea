#pragma once

#include "lrk/kernels.hpp"
#include "lrk/lowrank.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lrk {

/// One term A X B^T of the multiterm operator.
struct KronTerm {
    SparseMatrix a;
    SparseMatrix b;
};

/// The operator X -> sum_i A_i X B_i^T, i.e. vec form sum_i B_i (x) A_i.
/// Immutable after construction.
class MultitermOperator {
public:
    /// Throws ContractError if the list is empty, a factor is not square, or
    /// the A_i (resp. B_i) disagree in order.
    explicit MultitermOperator(std::vector<KronTerm> terms);
    /// Placeholder with no terms; every application throws.
    MultitermOperator() = default;

    Index rows_a() const noexcept { return n_a_; }
    Index rows_b() const noexcept { return n_b_; }
    std::size_t num_terms() const noexcept { return a_.size(); }

    std::span<const SparseMatrix> a_factors() const noexcept { return a_; }
    std::span<const SparseMatrix> b_factors() const noexcept { return b_; }

    /// True if every A_i and B_i is exactly symmetric.
    bool factors_symmetric() const;

private:
    std::vector<SparseMatrix> a_;
    std::vector<SparseMatrix> b_;
    Index n_a_ = 0;
    Index n_b_ = 0;
};

/// Returns [A_1 X_L, ..., A_p X_L] [B_1 X_R, ..., B_p X_R]^T without compression.
LowRankMatrix apply(const MultitermOperator& op, const LowRankMatrix& x);
/// Same with A_i^T, B_i^T.
LowRankMatrix apply_adjoint(const MultitermOperator& op, const LowRankMatrix& x);

/// Serial reference for apply/apply_adjoint; bitwise equal to the OpenMP path.
LowRankMatrix apply_serial(const MultitermOperator& op, const LowRankMatrix& x, bool adjoint);

/// A linear map on low-rank matrices together with its adjoint.
struct LowRankMap {
    Index rows = 0;
    Index cols = 0;
    std::function<LowRankMatrix(const LowRankMatrix&)> forward;
    std::function<LowRankMatrix(const LowRankMatrix&)> adjoint;
};

LowRankMap as_map(const MultitermOperator& op);

enum class EstimateSource { estimated, user_supplied };

struct SpectralEstimates {
    double sigma_max = 1.0;
    double sigma_min = 1.0;
    EstimateSource source = EstimateSource::estimated;
    int steps_done = 0;

    double condition() const { return sigma_max / sigma_min; }
};

struct LanczosOptions {
    int steps = 20;
    double tol = 1e-8;
    std::uint64_t seed = 42;
};

/// Extreme singular values by Golub-Kahan bidiagonalization with full
/// reorthogonalization. Lanczos vectors are low-rank and compressed to
/// `tol` after every product. Stops early on breakdown.
SpectralEstimates estimate_extremes(const MultitermOperator& op, const LanczosOptions& opts = {});
SpectralEstimates estimate_extremes(const LowRankMap& map, const LanczosOptions& opts = {});

inline constexpr std::size_t kDefaultKronGuard = 40'000;

/// Dense sum_i B_i (x) A_i, consistent with (B (x) A) vec(X) = vec(A X B^T).
Matrix materialize_kron(const MultitermOperator& op, std::size_t guard = kDefaultKronGuard);

}  // namespace lrk
