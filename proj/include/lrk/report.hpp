#pragma once

// Convergence reports: CSV history, JSON summary, SVG plot.

#include "lrk/krylov.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace lrk {

/// Header: iter,computed_residual,bound,eps_a_used,eps_orth_used,basis_rank,cum_columns_s,cum_columns_z
std::string history_csv(const SolveReport& report);
void write_history_csv(const std::filesystem::path& path, const SolveReport& report);

/// iterations, rank, columns, residuals, time, termination and estimates.
nlohmann::json summary_json(const SolveReport& report);

/// Semilog plot of computed residual and bound against the iteration.
std::string convergence_svg(const SolveReport& report, const std::string& title);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lrk
