#pragma once

// Test problems: convection-diffusion and a synthetic stochastic Galerkin
// diffusion problem, plus Matrix Market and manifest I/O.

#include "lrk/kronop.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lrk {

/// nu T X + nu X T + Phi1 B X Psi1 + Phi2 X B^T Psi2 + C1 C2^T = 0 on a uniform grid of (0,1)^2.
/// C1 = -1, C2 = 1, so that the solver's right-hand side is the all-ones matrix.
struct ConvDiffProblem {
    int n = 0;
    double nu = 0.0;
    SparseMatrix t;     ///< h^-2 tridiag(-1, 2, -1)
    SparseMatrix b;     ///< (2h)^-1 tridiag(-1, 0, 1)
    SparseMatrix phi1;  ///< diag(1 - (2x+1)^2)
    SparseMatrix psi1;  ///< diag(y)
    SparseMatrix phi2;  ///< diag(-2(2x+1))
    SparseMatrix psi2;  ///< diag(1 - y^2)
    MultitermOperator op;
    Matrix c1, c2;
};

/// Throws ParameterError unless n >= 3 and nu > 0.
ConvDiffProblem gen_convdiff(int n, double nu);

/// K0 X G0^T + sum_i Ki X Gi^T = f0 g0^T, emitted as C1 = -f0, C2 = g0.
struct StochasticProblem {
    int n_grid = 0;
    int r = 0;
    int degree = 0;
    double theta = 0.0;
    Index n_x = 0;
    Index n_sigma = 0;
    std::vector<SparseMatrix> k_list;  ///< K_0 .. K_r
    std::vector<SparseMatrix> g_list;  ///< G_0 = I, G_1 .. G_r
    Vector f0, g0;
    MultitermOperator op;
    Matrix c1, c2;
};

/// Throws ParameterError on out-of-range arguments or if theta * sum_i i^-2 >= 1
/// (the diffusion coefficient could vanish).
StochasticProblem gen_stochastic(int n_grid, int r, int degree, double theta);

/// Largest admissible theta for r modes: 1 / sum_{i<=r} i^-2 (infinity for r = 0).
double stochastic_theta_bound(int r);

/// Multi-indices of total degree <= degree in r variables, graded order.
std::vector<std::vector<int>> total_degree_indices(int r, int degree);

/// a_j = (j+1) / sqrt((2j+1)(2j+3)) of the orthonormal Legendre recurrence.
double legendre_coupling(int j);

/// n! / (k! (n-k)!) as an exact integer.
Index binomial(int n, int k);

// Matrix Market

SparseMatrix read_mm(const std::filesystem::path& path);
/// Coordinate real general format, entries written with 17 significant digits.
void write_mm(const std::filesystem::path& path, const SparseMatrix& a);
/// Array format (dense).
Matrix read_mm_dense(const std::filesystem::path& path);
void write_mm_dense(const std::filesystem::path& path, const Matrix& a);

// Manifests

struct NamedTerm {
    std::string a_name;
    SparseMatrix a;
    std::string b_name;
    SparseMatrix b;
};

struct ProblemData {
    std::string kind;  ///< "convdiff", "stochastic" or anything else
    std::map<std::string, double> params;
    std::vector<std::pair<std::string, std::string>> term_files;
    MultitermOperator op;
    Matrix c1, c2;
};

/// Writes every distinct matrix once as <name>.mtx plus `problem.json`. Returns the manifest path.
std::filesystem::path write_problem(const std::filesystem::path& dir, const std::string& kind,
                                    const std::map<std::string, double>& params, const std::vector<NamedTerm>& terms,
                                    const Matrix& c1, const Matrix& c2);

/// Paths in the manifest are relative to its directory. Throws ParseError on
/// malformed files and ValidationError on inconsistent dimensions.
ProblemData read_problem(const std::filesystem::path& manifest);

std::vector<NamedTerm> named_terms(const ConvDiffProblem& p);
std::vector<NamedTerm> named_terms(const StochasticProblem& p);
std::map<std::string, double> params_of(const ConvDiffProblem& p);
std::map<std::string, double> params_of(const StochasticProblem& p);

}  // namespace lrk
