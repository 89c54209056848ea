#pragma once

#include "lrk/kronop.hpp"
#include "lrk/lowrank.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lrk {

class Preconditioner;

enum class Variant { fom, gmres };
enum class Schedule { relaxed_sigma, relaxed_kappa, fixed };
enum class Termination { converged, max_iters, breakdown };

std::string to_string(Variant v);
std::string to_string(Schedule s);
std::string to_string(Termination t);
/// Throw ContractError on unknown names.
Variant parse_variant(const std::string& s);
Schedule parse_schedule(const std::string& s);

struct SolverConfig {
    Variant variant = Variant::gmres;
    int m_max = 50;
    double eps = 1e-6;  ///< target relative residual
    Schedule schedule = Schedule::relaxed_sigma;
    std::optional<double> c1;            ///< overrides the sigma_min estimate
    std::optional<double> c2;            ///< overrides the condition estimate
    std::optional<double> eps_orth_cap;  ///< default eps / m_max
    /// Every truncation uses this relative tolerance instead of the schedule.
    std::optional<double> pinned_tolerance;
    bool flexible = false;
    /// Tolerance of the final recombination; defaults to eps.
    std::optional<double> recover_eps;
    LanczosOptions lanczos;
    /// Happy breakdown when h_{m+1,m} <= breakdown_tol * ||h_m||.
    double breakdown_tol = 1e-14;
    /// Keep the Arnoldi state in the result (tests).
    bool keep_state = false;
    /// Compute the true residual of the returned solution.
    bool compute_true_residual = true;
    std::shared_ptr<const Truncator> truncator = default_truncator();

    /// Throws ContractError unless 0 < eps < 1 and m_max >= 1.
    void validate() const;
};

struct IterationRecord {
    int iter = 0;
    double computed_residual = 0.0;  ///< relative to beta
    double bound = 0.0;              ///< relative to beta
    double eps_a = 0.0;              ///< absolute budget of the operator truncation
    double eps_orth = 0.0;           ///< relative tolerance of the Gram-Schmidt truncations
    double e_norm = 0.0;
    double f_norm = 0.0;
    double fom_estimate = 0.0;  ///< FOM residual estimate, relative (inf if the iterate does not exist)
    Index basis_rank = 0;       ///< rank of v_{m+1}
    Index z_rank = 0;           ///< rank of z_m (flexible)
    Index cum_columns_s = 0;
    Index cum_columns_z = 0;
};

struct SolveReport {
    std::string method;
    int iterations = 0;
    Termination termination = Termination::max_iters;
    double beta = 0.0;
    std::vector<IterationRecord> history;
    double computed_residual_final = 0.0;  ///< relative
    double bound_final = 0.0;              ///< relative
    double true_residual_final = -1.0;     ///< relative; negative if not computed
    Index solution_rank = 0;
    Index columns_s = 0;
    Index columns_z = 0;
    std::vector<Index> rank_sums;  ///< CG: sum of iterate ranks per iteration
    double orthogonality_loss = 0.0;  ///< max_{i != j} |<v_i, v_j>|
    double normality_loss = 0.0;      ///< max_j | ||v_j|| - 1 |
    std::optional<SpectralEstimates> estimates;
    double wall_time = 0.0;
    double precond_build_time = 0.0;
    int threads = 1;
    std::string message;

    std::vector<double> computed_residuals() const;
    std::vector<double> bounds() const;
};

/// Low-rank vectors and small-matrix data of the Arnoldi process.
struct ArnoldiState {
    double beta = 0.0;
    std::vector<LowRankMatrix> basis;
    std::vector<LowRankMatrix> z_basis;
    std::vector<Vector> hess;   ///< column m has m+1 entries
    std::vector<double> cs, sn;  ///< Givens rotations
    std::vector<Vector> u_cols;  ///< rotated columns, column m has m entries
    Vector g;                    ///< transformed rhs, length m+1
    std::vector<double> e_norms, f_norms, eps_a_used, eps_orth_used;
    double last_pre_diag = 0.0;  ///< u_{m,m} before the last rotation
    double last_pre_g = 0.0;     ///< g_m before the last rotation

    int steps() const { return static_cast<int>(hess.size()); }
    /// Dense (m+1) x m Hessenberg matrix.
    Matrix hessenberg() const;
};

/// Start a state with g = [beta].
ArnoldiState make_state(double beta);

struct GivensOutcome {
    double gmres_residual = 0.0;  ///< |e_{m+1}^T g|
    double fom_residual = 0.0;    ///< infinity if the FOM iterate does not exist
};

/// Append a Hessenberg column (m+1 entries) and update rotations, U and g.
GivensOutcome givens_update(ArnoldiState& state, const Vector& column);

/// Coefficients y of the current iterate. GMRES: U y = g(1:m). FOM: the same
/// system before the last rotation. Empty optional if U is singular.
std::optional<Vector> solve_coefficients(const ArnoldiState& state, Variant variant);

/// ||r|| + sum_j (||E_j|| + ||F_j||) |y_j| with the recorded norms. Absolute.
double residual_bound(const ArnoldiState& state, const Vector& y, double computed_residual);

/// sum_j y_j v_j (z_j if `use_z`), compressed to relative tolerance eps.
TruncationResult recover_solution(const ArnoldiState& state, const Vector& y, double eps, bool use_z);

/// Absolute budget for the truncation of the operator product at step k.
/// prev_residual is the last computed GMRES residual relative to beta (1 at k = 1).
double eps_a_schedule(int k, double prev_residual, const SolverConfig& config, const SpectralEstimates& est);

double eps_orth_value(double eps_a_k, const SolverConfig& config);

struct SolveResult {
    LowRankMatrix solution;
    SolveReport report;
    std::optional<ArnoldiState> state;
};

/// LR-GMRES / LR-FOM for sum_i A_i X B_i^T + C1 C2^T = 0 from a zero initial guess.
/// `precond` is a right preconditioner. Inexact kinds need config.flexible.
SolveResult solve(const MultitermOperator& op, const Matrix& c1, const Matrix& c2, const SolverConfig& config,
                  const Preconditioner* precond = nullptr);

/// ||sum_i A_i X B_i^T + C1 C2^T||_F / ||C1 C2^T||_F by thin QR of the stacked factors.
double true_relative_residual(const MultitermOperator& op, const LowRankMatrix& x, const Matrix& c1,
                              const Matrix& c2);

/// Max off-diagonal |<v_i, v_j>| and max | ||v_j|| - 1 | over a basis.
std::pair<double, double> orthonormality_loss(const std::vector<LowRankMatrix>& basis);

}  // namespace lrk
