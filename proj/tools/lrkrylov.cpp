// lrkrylov: generate test problems, solve them, compare solver settings.
//
// Exit codes: 0 converged, 2 input error, 3 solver error or breakdown,
// 4 no convergence within the iteration limit.

#include "lrk/errors.hpp"
#include "lrk/krylov.hpp"
#include "lrk/precond.hpp"
#include "lrk/problems.hpp"
#include "lrk/report.hpp"
#include "lrk/shortrec.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace lrk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitNoConvergence = 4;

/// Everything that varies between runs of `solve` and rows of `compare`.
struct RunSpec {
    std::string variant = "gmres";
    double eps = 1e-6;
    std::string schedule = "relaxed_sigma";
    int m_max = 50;
    bool flexible = false;
    std::string precond = "none";
    int inner_iters = 10;
    double eps_precond = 1e-3;
    std::optional<double> c1, c2;
    std::uint64_t seed = 42;
    std::string label;
};

struct RunOutcome {
    std::optional<SolveReport> report;
    std::string error;
    int exit_code = kExitOk;
};

bool is_input_error(const std::exception& e) {
    return dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
           dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const ContractError*>(&e);
}

/// Sylvester preconditioner nu T + 1/2 Phi1 B on the left and nu T - 4 Psi2 B on the
/// right, read off the convection-diffusion terms (nuT, I), (I, nuT), (Phi1B, Psi1), (Phi2, Psi2B).
PreconditionerSpec convdiff_sylvester_from_terms(const MultitermOperator& op) {
    if (op.num_terms() != 4)
        throw ValidationError("sylvester preconditioner: a convection-diffusion manifest has 4 terms, found " +
                              std::to_string(op.num_terms()));
    const auto& a = op.a_factors();
    const auto& b = op.b_factors();
    SparseMatrix as = a[0] + kPsi1Mean * a[2];
    SparseMatrix bs = b[1] + kPhi2Mean * b[3];
    return PreconditionerSpec::sylvester(std::move(as), std::move(bs));
}

std::optional<Preconditioner> make_preconditioner(const ProblemData& pd, const RunSpec& rs) {
    const auto& op = pd.op;
    std::optional<PreconditionerSpec> spec;
    if (rs.precond == "none") return std::nullopt;
    if (rs.precond == "one_term") {
        spec = PreconditionerSpec::one_term(op.a_factors()[0], op.b_factors()[0]);
    } else if (rs.precond == "mean_based") {
        spec = PreconditionerSpec::mean_based(op.a_factors()[0], op.rows_b());
    } else if (rs.precond == "ullmann") {
        spec = PreconditionerSpec::ullmann({op.a_factors().begin(), op.a_factors().end()},
                                           {op.b_factors().begin(), op.b_factors().end()});
    } else if (rs.precond == "sylvester") {
        if (pd.kind != "convdiff")
            throw ValidationError("sylvester preconditioner is defined for convdiff problems, not '" + pd.kind + "'");
        spec = convdiff_sylvester_from_terms(op);
    } else if (rs.precond == "inner") {
        spec = PreconditionerSpec::inner_krylov(std::make_shared<const MultitermOperator>(op), rs.inner_iters);
    } else {
        throw ValidationError("unknown preconditioner '" + rs.precond +
                              "' (expected none, one_term, mean_based, ullmann, sylvester or inner)");
    }
    spec->inner_iters = rs.inner_iters;
    spec->eps_precond = rs.eps_precond;
    return Preconditioner::build(*spec);
}

int exit_code_for(const SolveReport& r) {
    switch (r.termination) {
        case Termination::converged: return kExitOk;
        case Termination::breakdown: return kExitSolver;
        case Termination::max_iters: return kExitNoConvergence;
    }
    return kExitSolver;
}

RunOutcome run_one(const ProblemData& pd, RunSpec rs) {
    RunOutcome out;
    try {
        const auto pc = make_preconditioner(pd, rs);
        if (rs.variant == "cg") {
            CgConfig cfg;
            cfg.eps = rs.eps;
            cfg.max_iter = rs.m_max;
            cfg.seed = rs.seed;
            out.report = cg_solve(pd.op, pd.c1, pd.c2, cfg, pc ? &*pc : nullptr).report;
        } else {
            SolverConfig cfg;
            cfg.variant = parse_variant(rs.variant);
            cfg.eps = rs.eps;
            cfg.schedule = parse_schedule(rs.schedule);
            cfg.m_max = rs.m_max;
            cfg.c1 = rs.c1;
            cfg.c2 = rs.c2;
            cfg.lanczos.seed = rs.seed;
            cfg.flexible = rs.flexible || (pc && !pc->is_linear());
            out.report = solve(pd.op, pd.c1, pd.c2, cfg, pc ? &*pc : nullptr).report;
        }
        out.exit_code = exit_code_for(*out.report);
    } catch (const std::exception& e) {
        out.error = e.what();
        out.exit_code = is_input_error(e) ? kExitInput : kExitSolver;
    }
    return out;
}

nlohmann::json spec_json(const RunSpec& rs) {
    nlohmann::json j = {{"variant", rs.variant},       {"eps", rs.eps},
                        {"schedule", rs.schedule},     {"m_max", rs.m_max},
                        {"flexible", rs.flexible},     {"precond", rs.precond},
                        {"inner_iters", rs.inner_iters}, {"eps_precond", rs.eps_precond},
                        {"seed", rs.seed}};
    if (rs.c1) j["c1"] = *rs.c1;
    if (rs.c2) j["c2"] = *rs.c2;
    return j;
}

void add_run_options(CLI::App* cmd, RunSpec& rs) {
    cmd->add_option("--variant", rs.variant, "gmres, fom or cg")
        ->check(CLI::IsMember({"gmres", "fom", "cg"}));
    cmd->add_option("--eps", rs.eps, "target relative residual");
    cmd->add_option("--schedule", rs.schedule, "relaxed_sigma, relaxed_kappa or fixed")
        ->check(CLI::IsMember({"relaxed_sigma", "relaxed_kappa", "fixed"}));
    cmd->add_option("--m-max", rs.m_max, "iteration limit");
    cmd->add_flag("--flexible", rs.flexible, "flexible variant (implied by sylvester and inner)");
    cmd->add_option("--precond", rs.precond, "none, one_term, mean_based, ullmann, sylvester or inner")
        ->check(CLI::IsMember({"none", "one_term", "mean_based", "ullmann", "sylvester", "inner"}));
    cmd->add_option("--inner-iters", rs.inner_iters, "iterations of the inner solver");
    cmd->add_option("--eps-precond", rs.eps_precond, "truncation before preconditioning");
    cmd->add_option("--c1", rs.c1, "sigma_min override for the schedule");
    cmd->add_option("--c2", rs.c2, "condition number override for the schedule");
    cmd->add_option("--seed", rs.seed, "seed of the spectral estimation");
}

/// key=value[,key=value...] on top of `base`.
RunSpec parse_config(const std::string& text, RunSpec base) {
    base.label = text;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("config entry '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        try {
            if (key == "variant") base.variant = val;
            else if (key == "eps") base.eps = std::stod(val);
            else if (key == "schedule") base.schedule = val;
            else if (key == "m_max" || key == "m-max") base.m_max = std::stoi(val);
            else if (key == "flexible") base.flexible = val == "1" || val == "true";
            else if (key == "precond") base.precond = val;
            else if (key == "inner_iters" || key == "inner-iters") base.inner_iters = std::stoi(val);
            else if (key == "eps_precond" || key == "eps-precond") base.eps_precond = std::stod(val);
            else if (key == "c1") base.c1 = std::stod(val);
            else if (key == "c2") base.c2 = std::stod(val);
            else if (key == "seed") base.seed = std::stoull(val);
            else throw ValidationError("unknown config key '" + key + "'");
        } catch (const std::logic_error&) {
            throw ValidationError("bad value '" + val + "' for config key '" + key + "'");
        }
    }
    return base;
}

std::string fmt(double v) {
    if (v < 0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

void print_summary(std::ostream& os, const SolveReport& r) {
    os << r.method << ": " << to_string(r.termination) << " after " << r.iterations << " iterations\n"
       << "  rank(S1 S2^T) " << r.solution_rank << ", columns s " << r.columns_s << ", columns z " << r.columns_z
       << "\n  bound " << fmt(r.bound_final) << ", true residual " << fmt(r.true_residual_final) << ", time "
       << fmt(r.wall_time) << " s\n";
    if (r.estimates && r.estimates->source == EstimateSource::estimated)
        os << "  note: schedule constants come from a " << r.estimates->steps_done
           << "-step Lanczos estimate (sigma_min " << fmt(r.estimates->sigma_min)
           << "); pass --c1/--c2 to override\n";
    if (!r.message.empty()) os << "  " << r.message << "\n";
}

int cmd_gen_convdiff(int n, double nu, const fs::path& out) {
    const auto p = gen_convdiff(n, nu);
    const auto m = write_problem(out, "convdiff", params_of(p), named_terms(p), p.c1, p.c2);
    std::cout << "wrote " << m.string() << "\n";
    return kExitOk;
}

int cmd_gen_stochastic(int n_grid, int r, int degree, double theta, const fs::path& out) {
    const auto p = gen_stochastic(n_grid, r, degree, theta);
    const auto m = write_problem(out, "stochastic", params_of(p), named_terms(p), p.c1, p.c2);
    std::cout << "wrote " << m.string() << " (n_x " << p.n_x << ", n_sigma " << p.n_sigma << ")\n";
    return kExitOk;
}

int cmd_solve(const fs::path& manifest, RunSpec rs, const std::string& csv, const std::string& summary,
              const std::string& svg) {
    const ProblemData pd = read_problem(manifest);
    if (rs.precond == "sylvester" || rs.precond == "inner") rs.flexible = true;
    const RunOutcome out = run_one(pd, rs);
    if (!out.report) {
        std::cerr << "error: " << out.error << "\n";
        return out.exit_code;
    }
    const SolveReport& r = *out.report;
    print_summary(std::cout, r);
    if (!csv.empty()) write_history_csv(csv, r);
    if (!summary.empty()) {
        nlohmann::json j = summary_json(r);
        j["problem"] = manifest.string();
        j["config"] = spec_json(rs);
        j["seed"] = rs.seed;
        write_text(summary, j.dump(2) + "\n");
    }
    if (!svg.empty()) write_text(svg, convergence_svg(r, manifest.parent_path().filename().string() + " " + r.method));
    return out.exit_code;
}

int thread_cap() {
    if (const char* env = std::getenv("LRKRYLOV_THREADS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (const std::logic_error&) {
            throw ValidationError(std::string("LRKRYLOV_THREADS must be an integer, got '") + env + "'");
        }
    }
    return 1;
}

int cmd_compare(const fs::path& manifest, const RunSpec& base, const std::vector<std::string>& configs,
                const std::string& csv) {
    const ProblemData pd = read_problem(manifest);
    std::vector<RunSpec> specs;
    for (const auto& c : configs) specs.push_back(parse_config(c, base));
    if (specs.empty()) {
        specs.push_back(base);
        specs.back().label = "default";
    }

    std::vector<RunOutcome> outs(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) outs[i] = run_one(pd, specs[i]);
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), specs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream table;
    table << "config,termination,iterations,rank,columns_s,columns_z,bound_final,true_residual_final,wall_time,error\r\n";
    std::size_t failed = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        table << '"' << specs[i].label << '"' << ',';
        if (outs[i].report) {
            const auto& r = *outs[i].report;
            table << to_string(r.termination) << ',' << r.iterations << ',' << r.solution_rank << ',' << r.columns_s
                  << ',' << r.columns_z << ',' << fmt(r.bound_final) << ',' << fmt(r.true_residual_final) << ','
                  << fmt(r.wall_time) << ",\r\n";
        } else {
            ++failed;
            std::string msg = outs[i].error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            table << "error,,,,,,,,\"" << msg << "\"\r\n";
        }
    }
    std::cout << table.str();
    if (!csv.empty()) write_text(csv, table.str());
    return failed == specs.size() ? kExitSolver : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank Krylov solvers for multiterm linear matrix equations"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a test problem");
    gen->require_subcommand(1);
    std::string out_dir = ".";
    auto* gcd = gen->add_subcommand("convdiff", "convection-diffusion problem");
    int n = 200;
    double nu = 0.5;
    gcd->add_option("--n", n, "interior grid points per direction");
    gcd->add_option("--nu", nu, "viscosity");
    gcd->add_option("--out", out_dir, "output directory");
    auto* gst = gen->add_subcommand("stochastic", "synthetic stochastic Galerkin diffusion problem");
    int n_grid = 16, r = 2, degree = 2;
    double theta = 0.5;
    gst->add_option("--n-grid", n_grid, "interior grid points per direction");
    gst->add_option("--r", r, "number of random variables");
    gst->add_option("--degree", degree, "total polynomial degree");
    gst->add_option("--theta", theta, "amplitude of the expansion");
    gst->add_option("--out", out_dir, "output directory");

    RunSpec rs;
    fs::path manifest;
    std::string csv, summary, svg;
    auto* sol = app.add_subcommand("solve", "solve a problem");
    sol->add_option("--problem", manifest, "problem.json written by gen")->required();
    add_run_options(sol, rs);
    sol->add_option("--csv", csv, "convergence history");
    sol->add_option("--summary", summary, "summary record (JSON)");
    sol->add_option("--svg", svg, "semilog convergence plot");

    std::vector<std::string> configs;
    std::string cmp_csv;
    auto* cmp = app.add_subcommand("compare", "run several configurations side by side");
    cmp->add_option("--problem", manifest, "problem.json written by gen")->required();
    add_run_options(cmp, rs);
    cmp->add_option("--config", configs, "key=value[,key=value...] overriding the defaults; repeatable");
    cmp->add_option("--csv", cmp_csv, "write the table here as well");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (gcd->parsed()) return cmd_gen_convdiff(n, nu, out_dir);
        if (gst->parsed()) return cmd_gen_stochastic(n_grid, r, degree, theta, out_dir);
        if (sol->parsed()) return cmd_solve(manifest, rs, csv, summary, svg);
        if (cmp->parsed()) return cmd_compare(manifest, rs, configs, cmp_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_input_error(e) ? kExitInput : kExitSolver;
    }
    return kExitInput;
}
