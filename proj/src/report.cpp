#include "lrk/report.hpp"

#include "lrk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lrk {

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// JSON has no infinity; emit null.
nlohmann::json jnum(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string history_csv(const SolveReport& report) {
    std::ostringstream os;
    os << "iter,computed_residual,bound,eps_a_used,eps_orth_used,basis_rank,cum_columns_s,cum_columns_z\n";
    for (const auto& r : report.history) {
        os << r.iter << ',' << num(r.computed_residual) << ',' << num(r.bound) << ',' << num(r.eps_a) << ','
           << num(r.eps_orth) << ',' << r.basis_rank << ',' << r.cum_columns_s << ',' << r.cum_columns_z << "\r\n";
    }
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("error writing " + path.string());
}

void write_history_csv(const std::filesystem::path& path, const SolveReport& report) {
    write_text(path, history_csv(report));
}

nlohmann::json summary_json(const SolveReport& report) {
    nlohmann::json j;
    j["method"] = report.method;
    j["termination"] = to_string(report.termination);
    j["iterations"] = report.iterations;
    j["rank"] = report.solution_rank;
    j["columns_s"] = report.columns_s;
    j["columns_z"] = report.columns_z;
    j["computed_residual_final"] = jnum(report.computed_residual_final);
    j["bound_final"] = jnum(report.bound_final);
    j["true_residual_final"] = report.true_residual_final < 0 ? nlohmann::json(nullptr)
                                                              : jnum(report.true_residual_final);
    j["orthogonality_loss"] = report.orthogonality_loss;
    j["normality_loss"] = report.normality_loss;
    j["wall_time"] = report.wall_time;
    j["precond_build_time"] = report.precond_build_time;
    j["threads"] = report.threads;
    j["beta"] = report.beta;
    if (report.estimates) {
        j["estimates"] = {{"sigma_min", report.estimates->sigma_min},
                          {"sigma_max", report.estimates->sigma_max},
                          {"source", report.estimates->source == EstimateSource::estimated ? "estimated"
                                                                                           : "user_supplied"},
                          {"steps", report.estimates->steps_done}};
    }
    if (!report.rank_sums.empty()) j["rank_sums"] = report.rank_sums;
    if (!report.message.empty()) j["message"] = report.message;
    return j;
}

std::string convergence_svg(const SolveReport& report, const std::string& title) {
    const double w = 640, h = 420, left = 70, right = 20, top = 40, bottom = 50;
    std::vector<double> xs, rs, bs;
    for (const auto& r : report.history) {
        if (!std::isfinite(r.computed_residual) || r.computed_residual <= 0) continue;
        xs.push_back(r.iter);
        rs.push_back(std::log10(r.computed_residual));
        bs.push_back(std::log10(std::max(r.bound, r.computed_residual)));
    }
    double ylo = -1, yhi = 0;
    if (!rs.empty()) {
        ylo = std::floor(*std::min_element(rs.begin(), rs.end()));
        yhi = std::ceil(std::max(*std::max_element(bs.begin(), bs.end()), 0.0));
        if (yhi <= ylo) yhi = ylo + 1;
    }
    const double xmax = xs.empty() ? 1.0 : std::max(1.0, xs.back());
    auto px = [&](double x) { return left + (w - left - right) * x / xmax; };
    auto py = [&](double y) { return top + (h - top - bottom) * (yhi - y) / (yhi - ylo); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << title << "</text>\n";
    for (double e = ylo; e <= yhi; e += 1) {
        os << "<line x1=\"" << left << "\" x2=\"" << w - right << "\" y1=\"" << py(e) << "\" y2=\"" << py(e)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << e << "</text>\n";
    }
    os << "<line x1=\"" << left << "\" x2=\"" << left << "\" y1=\"" << top << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" x2=\"" << w - right << "\" y1=\"" << h - bottom << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration</text>\n";
    auto poly = [&](const std::vector<double>& ys, const char* color, const char* dash) {
        if (ys.empty()) return;
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" stroke-dasharray=\"" << dash
           << "\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) os << px(xs[i]) << ',' << py(ys[i]) << ' ';
        os << "\"/>\n";
    };
    poly(rs, "#1f5fa8", "none");
    poly(bs, "#c0392b", "5,3");
    os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 14
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f5fa8\">computed residual</text>\n";
    os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 28
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#c0392b\">bound</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace lrk
