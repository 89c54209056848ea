#include "lrk/problems.hpp"

#include "lrk/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

namespace lrk {

namespace {

SparseMatrix tridiag(Index n, double lo, double mid, double hi) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(3 * n));
    for (Index i = 0; i < n; ++i) {
        if (i > 0) t.emplace_back(i, i - 1, lo);
        if (mid != 0.0) t.emplace_back(i, i, mid);
        if (i + 1 < n) t.emplace_back(i, i + 1, hi);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
}

template <typename F>
SparseMatrix diag_of(Index n, double h, F f) {
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = f(static_cast<double>(i + 1) * h);
    SparseMatrix a(n, n);
    a.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Index i = 0; i < n; ++i) a.insert(i, i) = d(i);
    a.makeCompressed();
    return a;
}

SparseMatrix identity(Index n) {
    SparseMatrix i(n, n);
    i.setIdentity();
    return i;
}

SparseMatrix compressed(SparseMatrix a) {
    a.makeCompressed();
    return a;
}

}  // namespace

ConvDiffProblem gen_convdiff(int n, double nu) {
    if (n < 3) throw ParameterError("gen_convdiff: n must be at least 3 (got " + std::to_string(n) + ")");
    if (!(nu > 0.0)) throw ParameterError("gen_convdiff: nu must be positive");
    const Index nn = n;
    const double h = 1.0 / (n + 1);
    SparseMatrix t = tridiag(nn, -1.0, 2.0, -1.0) / (h * h);
    SparseMatrix b = tridiag(nn, -1.0, 0.0, 1.0) / (2.0 * h);
    SparseMatrix phi1 = diag_of(nn, h, [](double x) { return 1.0 - (2.0 * x + 1.0) * (2.0 * x + 1.0); });
    SparseMatrix psi1 = diag_of(nn, h, [](double y) { return y; });
    SparseMatrix phi2 = diag_of(nn, h, [](double x) { return -2.0 * (2.0 * x + 1.0); });
    SparseMatrix psi2 = diag_of(nn, h, [](double y) { return 1.0 - y * y; });
    t.makeCompressed();
    b.makeCompressed();

    const SparseMatrix nut = compressed(nu * t);
    const SparseMatrix id = identity(nn);
    std::vector<KronTerm> terms{{nut, id}, {id, nut}, {compressed(phi1 * b), psi1}, {phi2, compressed(psi2 * b)}};
    ConvDiffProblem p{n, nu, t, b, phi1, psi1, phi2, psi2, MultitermOperator(std::move(terms)),
                      -Matrix::Ones(nn, 1), Matrix::Ones(nn, 1)};
    return p;
}

std::vector<NamedTerm> named_terms(const ConvDiffProblem& p) {
    const auto& ops = p.op;
    std::vector<NamedTerm> out;
    const char* names[4][2] = {{"nuT", "I"}, {"I", "nuT"}, {"Phi1B", "Psi1"}, {"Phi2", "Psi2B"}};
    for (std::size_t i = 0; i < 4; ++i)
        out.push_back({names[i][0], ops.a_factors()[i], names[i][1], ops.b_factors()[i]});
    return out;
}

std::map<std::string, double> params_of(const ConvDiffProblem& p) {
    return {{"n", static_cast<double>(p.n)}, {"nu", p.nu}};
}

double stochastic_theta_bound(int r) {
    double s = 0.0;
    for (int i = 1; i <= r; ++i) s += 1.0 / (static_cast<double>(i) * i);
    return s == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / s;
}

double legendre_coupling(int j) {
    if (j < 0) throw ContractError("legendre_coupling: negative index");
    const double jd = j;
    return (jd + 1.0) / std::sqrt((2.0 * jd + 1.0) * (2.0 * jd + 3.0));
}

Index binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    Index r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<std::vector<int>> total_degree_indices(int r, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(r), 0);
    // All alpha with |alpha| = t, first coordinate varying slowest.
    auto fill = [&](auto& self, int pos, int left) -> void {
        if (pos == r) {
            if (left == 0) out.push_back(cur);
            return;
        }
        for (int v = left; v >= 0; --v) {
            cur[static_cast<std::size_t>(pos)] = v;
            self(self, pos + 1, left - v);
        }
        cur[static_cast<std::size_t>(pos)] = 0;
    };
    for (int t = 0; t <= degree; ++t) {
        if (r == 0) {
            if (t == 0) out.emplace_back();
            continue;
        }
        fill(fill, 0, t);
    }
    return out;
}

namespace {

// Five-point discretization of -div(a grad u), zero Dirichlet data, scaled by h^2.
template <typename Coef>
SparseMatrix diffusion_stencil(int m, double h, Coef a) {
    const Index n = static_cast<Index>(m) * m;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(5 * n));
    auto id = [m](int i, int j) { return static_cast<Index>(i) + static_cast<Index>(m) * j; };
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            const double x = (i + 1) * h;
            const double y = (j + 1) * h;
            const double e = a(x + 0.5 * h, y);
            const double w = a(x - 0.5 * h, y);
            const double nn = a(x, y + 0.5 * h);
            const double s = a(x, y - 0.5 * h);
            const Index k = id(i, j);
            t.emplace_back(k, k, e + w + nn + s);
            if (i + 1 < m) t.emplace_back(k, id(i + 1, j), -e);
            if (i > 0) t.emplace_back(k, id(i - 1, j), -w);
            if (j + 1 < m) t.emplace_back(k, id(i, j + 1), -nn);
            if (j > 0) t.emplace_back(k, id(i, j - 1), -s);
        }
    }
    SparseMatrix k(n, n);
    k.setFromTriplets(t.begin(), t.end());
    k.prune(0.0);
    k.makeCompressed();
    return k;
}

}  // namespace

StochasticProblem gen_stochastic(int n_grid, int r, int degree, double theta) {
    if (n_grid < 2) throw ParameterError("gen_stochastic: n_grid must be at least 2");
    if (r < 0) throw ParameterError("gen_stochastic: r must be nonnegative");
    if (degree < 1) throw ParameterError("gen_stochastic: degree must be at least 1");
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw ParameterError("gen_stochastic: theta must be finite and >= 0");
    if (r > 0 && !(theta < stochastic_theta_bound(r)))
        throw ParameterError("gen_stochastic: theta = " + std::to_string(theta) +
                             " violates positivity of the diffusion coefficient; need theta * sum_{i<=r} i^-2 < 1, "
                             "i.e. theta < " + std::to_string(stochastic_theta_bound(r)));

    const double h = 1.0 / (n_grid + 1);
    const double pi = std::numbers::pi;
    StochasticProblem p{};
    p.n_grid = n_grid;
    p.r = r;
    p.degree = degree;
    p.theta = theta;
    p.k_list.push_back(diffusion_stencil(n_grid, h, [](double, double) { return 1.0; }));
    for (int i = 1; i <= r; ++i) {
        const double amp = theta / (static_cast<double>(i) * i);
        p.k_list.push_back(diffusion_stencil(n_grid, h, [=](double x, double y) {
            return amp * std::cos(i * pi * x) * std::cos(i * pi * y);
        }));
    }
    p.n_x = p.k_list.front().rows();

    const auto idx = total_degree_indices(r, degree);
    p.n_sigma = static_cast<Index>(idx.size());
    p.g_list.push_back(identity(p.n_sigma));
    for (int v = 0; v < r; ++v) {
        std::vector<Eigen::Triplet<double>> t;
        for (Index a = 0; a < p.n_sigma; ++a) {
            for (Index b = 0; b < p.n_sigma; ++b) {
                const auto& ia = idx[static_cast<std::size_t>(a)];
                const auto& ib = idx[static_cast<std::size_t>(b)];
                bool others_equal = true;
                for (int u = 0; u < r && others_equal; ++u)
                    if (u != v && ia[static_cast<std::size_t>(u)] != ib[static_cast<std::size_t>(u)]) others_equal = false;
                if (!others_equal) continue;
                const int da = ia[static_cast<std::size_t>(v)];
                const int db = ib[static_cast<std::size_t>(v)];
                if (db == da + 1) t.emplace_back(a, b, legendre_coupling(da));
                if (db == da - 1) t.emplace_back(a, b, legendre_coupling(db));
            }
        }
        SparseMatrix g(p.n_sigma, p.n_sigma);
        g.setFromTriplets(t.begin(), t.end());
        g.makeCompressed();
        p.g_list.push_back(std::move(g));
    }

    p.f0 = Vector::Constant(p.n_x, h * h);
    p.g0 = Vector::Zero(p.n_sigma);
    p.g0(0) = 1.0;
    std::vector<KronTerm> terms;
    for (std::size_t i = 0; i < p.k_list.size(); ++i) terms.push_back({p.k_list[i], p.g_list[i]});
    p.op = MultitermOperator(std::move(terms));
    p.c1 = -p.f0;
    p.c2 = p.g0;
    return p;
}

std::vector<NamedTerm> named_terms(const StochasticProblem& p) {
    std::vector<NamedTerm> out;
    for (std::size_t i = 0; i < p.k_list.size(); ++i)
        out.push_back({"K" + std::to_string(i), p.k_list[i], "G" + std::to_string(i), p.g_list[i]});
    return out;
}

std::map<std::string, double> params_of(const StochasticProblem& p) {
    return {{"n_grid", static_cast<double>(p.n_grid)},
            {"r", static_cast<double>(p.r)},
            {"degree", static_cast<double>(p.degree)},
            {"theta", p.theta},
            {"n_x", static_cast<double>(p.n_x)},
            {"n_sigma", static_cast<double>(p.n_sigma)}};
}

namespace {

using nlohmann::json;

json columns_of(const Matrix& m) {
    json cols = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
        json c = json::array();
        for (Index i = 0; i < m.rows(); ++i) c.push_back(m(i, j));
        cols.push_back(std::move(c));
    }
    return cols;
}

Matrix matrix_of(const json& cols, Index rows, const std::string& file, const char* what) {
    if (!cols.is_array()) throw ValidationError(file + ": rhs." + what + " must be an array of columns");
    Matrix m(rows, static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const json& c = cols[j];
        if (!c.is_array() || static_cast<Index>(c.size()) != rows)
            throw ValidationError(file + ": rhs." + what + " column " + std::to_string(j) + " must have " +
                                  std::to_string(rows) + " entries");
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!c[i].is_number()) throw ValidationError(file + ": rhs." + what + " has a non-numeric entry");
            m(static_cast<Index>(i), static_cast<Index>(j)) = c[i].get<double>();
        }
    }
    return m;
}

std::size_t line_of_offset(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::filesystem::path write_problem(const std::filesystem::path& dir, const std::string& kind,
                                    const std::map<std::string, double>& params, const std::vector<NamedTerm>& terms,
                                    const Matrix& c1, const Matrix& c2) {
    if (terms.empty()) throw ContractError("write_problem: no terms");
    std::filesystem::create_directories(dir);
    std::set<std::string> written;
    json jterms = json::array();
    auto put = [&](const std::string& name, const SparseMatrix& a) {
        const std::string file = name + ".mtx";
        if (written.insert(name).second) write_mm(dir / file, a);
        return file;
    };
    for (const auto& t : terms) jterms.push_back({{"a", put(t.a_name, t.a)}, {"b", put(t.b_name, t.b)}});

    json j;
    j["format"] = "lrkrylov-problem";
    j["version"] = 1;
    j["kind"] = kind;
    j["params"] = params;
    j["n_a"] = terms.front().a.rows();
    j["n_b"] = terms.front().b.rows();
    j["terms"] = std::move(jterms);
    j["rhs"] = {{"rank", c1.cols()}, {"c1", columns_of(c1)}, {"c2", columns_of(c2)}};

    const auto path = dir / "problem.json";
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("error writing " + path.string());
    return path;
}

ProblemData read_problem(const std::filesystem::path& manifest) {
    const std::string file = manifest.string();
    std::ifstream in(manifest);
    if (!in) throw ParseError(file, 0, "cannot open manifest");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(file, line_of_offset(text, e.byte), e.what());
    }

    auto need = [&](const json& obj, const char* key) -> const json& {
        if (!obj.is_object() || !obj.contains(key)) throw ValidationError(file + ": missing field '" + key + "'");
        return obj.at(key);
    };
    ProblemData d;
    try {
        if (need(j, "format").get<std::string>() != "lrkrylov-problem")
            throw ValidationError(file + ": not a problem manifest");
        d.kind = need(j, "kind").get<std::string>();
        if (j.contains("params"))
            for (const auto& [k, v] : j["params"].items()) d.params[k] = v.get<double>();
        const auto n_a = need(j, "n_a").get<Index>();
        const auto n_b = need(j, "n_b").get<Index>();
        const json& jt = need(j, "terms");
        if (!jt.is_array() || jt.empty()) throw ValidationError(file + ": 'terms' must be a nonempty array");

        const auto base = manifest.parent_path();
        std::map<std::string, SparseMatrix> cache;
        auto load = [&](const std::string& name) -> const SparseMatrix& {
            auto it = cache.find(name);
            if (it == cache.end()) it = cache.emplace(name, read_mm(base / name)).first;
            return it->second;
        };
        std::vector<KronTerm> terms;
        for (std::size_t i = 0; i < jt.size(); ++i) {
            const auto fa = need(jt[i], "a").get<std::string>();
            const auto fb = need(jt[i], "b").get<std::string>();
            const SparseMatrix& a = load(fa);
            const SparseMatrix& b = load(fb);
            if (a.rows() != n_a || a.cols() != n_a)
                throw ValidationError(file + ": term " + std::to_string(i) + " A factor " + fa + " is " +
                                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", expected " +
                                      std::to_string(n_a) + "x" + std::to_string(n_a));
            if (b.rows() != n_b || b.cols() != n_b)
                throw ValidationError(file + ": term " + std::to_string(i) + " B factor " + fb + " is " +
                                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ", expected " +
                                      std::to_string(n_b) + "x" + std::to_string(n_b));
            terms.push_back({a, b});
            d.term_files.emplace_back(fa, fb);
        }
        d.op = MultitermOperator(std::move(terms));
        const json& rhs = need(j, "rhs");
        d.c1 = matrix_of(need(rhs, "c1"), n_a, file, "c1");
        d.c2 = matrix_of(need(rhs, "c2"), n_b, file, "c2");
        if (d.c1.cols() != d.c2.cols()) throw ValidationError(file + ": rhs factors have different ranks");
    } catch (const json::exception& e) {
        throw ValidationError(file + ": " + e.what());
    }
    return d;
}

}  // namespace lrk
