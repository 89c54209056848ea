#include "doctest.h"

#include "lrk/errors.hpp"
#include "lrk/oracle.hpp"
#include "lrk/problems.hpp"
#include "support/reference.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace lrk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("lrk_test_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Orthonormal Legendre polynomials for the uniform density on (-1, 1), degree <= 3.
double legendre_on(int j, double s) {
    double pj = 0.0;
    switch (j) {
        case 0: pj = 1.0; break;
        case 1: pj = s; break;
        case 2: pj = 0.5 * (3 * s * s - 1); break;
        case 3: pj = 0.5 * (5 * s * s * s - 3 * s); break;
        default: FAIL("degree too high"); break;
    }
    return std::sqrt(2.0 * j + 1.0) * pj;
}

// Five-point Gauss-Legendre rule on (-1, 1), weights normalized to the uniform density.
constexpr double kNodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                              0.9061798459386640};
constexpr double kWeights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                0.2369268850561891};

// E[sigma_v psi_a psi_b] over independent uniforms, by tensor quadrature.
double chaos_entry(const std::vector<int>& a, const std::vector<int>& b, int v) {
    double prod = 1.0;
    for (std::size_t u = 0; u < a.size(); ++u) {
        double s = 0.0;
        for (int q = 0; q < 5; ++q) {
            const double x = kNodes[q];
            const double f = (static_cast<int>(u) == v ? x : 1.0) * legendre_on(a[u], x) * legendre_on(b[u], x);
            s += 0.5 * kWeights[q] * f;
        }
        prod *= s;
    }
    return prod;
}

}  // namespace

TEST_CASE("convection-diffusion matrices at n = 3") {
    const auto p = gen_convdiff(3, 1.0);
    Matrix t(3, 3);
    t << 2, -1, 0, -1, 2, -1, 0, -1, 2;
    CHECK(Matrix(p.t) == 16.0 * t);
    Matrix b(3, 3);
    b << 0, 1, 0, -1, 0, 1, 0, -1, 0;
    CHECK(ref::rel_diff(Matrix(p.b), 2.0 * b) < 1e-15);
    CHECK(Matrix(Matrix(p.b) + Matrix(p.b).transpose()).norm() == 0.0);
    CHECK(p.op.num_terms() == 4);
    CHECK(p.c1 == -Matrix::Ones(3, 1));
    CHECK(p.c2 == Matrix::Ones(3, 1));
    CHECK_THROWS_AS(gen_convdiff(2, 1.0), ParameterError);
    CHECK_THROWS_AS(gen_convdiff(5, 0.0), ParameterError);
}

TEST_CASE("T is SPD with the known smallest eigenvalue") {
    for (int n : {4, 9, 15}) {
        const auto p = gen_convdiff(n, 0.5);
        const double h = 1.0 / (n + 1);
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(Matrix(p.t)).eigenvalues();
        const double s = std::sin(std::numbers::pi / (2.0 * (n + 1)));
        CHECK(ev(0) == doctest::Approx(4.0 / (h * h) * s * s).epsilon(1e-12));
        CHECK(ev(0) > 0.0);
        CHECK(Matrix(Matrix(p.b) + Matrix(p.b).transpose()).norm() == 0.0);
    }
}

TEST_CASE("convection-diffusion solution satisfies the five-point scheme") {
    const int n = 16;
    const double nu = 1.0;
    const auto p = gen_convdiff(n, nu);
    const Matrix x = oracle::dense_solve(p.op, p.c1, p.c2);
    const double h = 1.0 / (n + 1);
    auto at = [&](int i, int j) { return (i < 0 || j < 0 || i >= n || j >= n) ? 0.0 : x(i, j); };
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double xi = (i + 1) * h, yj = (j + 1) * h;
            const double w1 = (1 - (2 * xi + 1) * (2 * xi + 1)) * yj;
            const double w2 = -2 * (2 * xi + 1) * (1 - yj * yj);
            const double lap = (4 * at(i, j) - at(i - 1, j) - at(i + 1, j) - at(i, j - 1) - at(i, j + 1)) / (h * h);
            const double conv = w1 * (at(i + 1, j) - at(i - 1, j)) / (2 * h) + w2 * (at(i, j + 1) - at(i, j - 1)) / (2 * h);
            worst = std::max(worst, std::abs(nu * lap + conv - 1.0));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("stochastic problem without random variables") {
    const auto p = gen_stochastic(5, 0, 1, 0.0);
    CHECK(p.op.num_terms() == 1);
    CHECK(p.n_x == 25);
    CHECK(p.n_sigma == 1);
    Matrix t(5, 5);
    t << 2, -1, 0, 0, 0, -1, 2, -1, 0, 0, 0, -1, 2, -1, 0, 0, 0, -1, 2, -1, 0, 0, 0, -1, 2;
    const Matrix id = Matrix::Identity(5, 5);
    const Matrix lap = Eigen::kroneckerProduct(id, t).eval() + Eigen::kroneckerProduct(t, id).eval();
    CHECK(ref::rel_diff(Matrix(p.k_list[0]), lap) < 1e-15);
    CHECK(Matrix(p.g_list[0]) == Matrix::Identity(1, 1));
    const double h = 1.0 / 6.0;
    CHECK(ref::rel_diff(p.f0, Vector::Constant(25, h * h)) < 1e-15);
    CHECK(p.g0(0) == 1.0);
}

TEST_CASE("mode stencils use midpoint coefficients") {
    const int m = 6;
    const double theta = 0.5;
    const auto p = gen_stochastic(m, 2, 1, theta);
    const double h = 1.0 / (m + 1);
    const double pi = std::numbers::pi;
    for (int mode = 1; mode <= 2; ++mode) {
        auto a = [&](double x, double y) { return theta / (mode * mode) * std::cos(mode * pi * x) * std::cos(mode * pi * y); };
        const Matrix k = p.k_list[static_cast<std::size_t>(mode)];
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < m; ++i) {
                const double x = (i + 1) * h, y = (j + 1) * h;
                const Index node = i + m * j;
                const double diag = a(x + h / 2, y) + a(x - h / 2, y) + a(x, y + h / 2) + a(x, y - h / 2);
                CHECK(k(node, node) == doctest::Approx(diag).epsilon(1e-13));
                if (i + 1 < m) CHECK(k(node, node + 1) == doctest::Approx(-a(x + h / 2, y)).epsilon(1e-13));
                if (j + 1 < m) CHECK(k(node, node + m) == doctest::Approx(-a(x, y + h / 2)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("chaos coupling matrices against quadrature") {
    CHECK(legendre_coupling(0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    const auto p1 = gen_stochastic(3, 1, 1, 0.5);
    Matrix g(2, 2);
    g << 0, 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 0;
    CHECK(ref::rel_diff(Matrix(p1.g_list[1]), g) < 1e-15);
    CHECK(chaos_entry({0}, {1}, 0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));

    for (auto [r, deg] : {std::pair{1, 3}, std::pair{2, 2}, std::pair{3, 2}}) {
        const double theta = 0.5 * stochastic_theta_bound(r);
        const auto p = gen_stochastic(3, r, deg, theta);
        const auto idx = total_degree_indices(r, deg);
        CHECK(p.n_sigma == binomial(r + deg, r));
        CHECK(static_cast<Index>(idx.size()) == p.n_sigma);
        CHECK(idx.front() == std::vector<int>(static_cast<std::size_t>(r), 0));
        for (int v = 0; v < r; ++v) {
            const Matrix gv = p.g_list[static_cast<std::size_t>(v + 1)];
            Matrix expect(p.n_sigma, p.n_sigma);
            for (Index a = 0; a < p.n_sigma; ++a)
                for (Index b = 0; b < p.n_sigma; ++b)
                    expect(a, b) = chaos_entry(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)], v);
            CHECK((gv - expect).cwiseAbs().maxCoeff() <= 1e-13);
            CHECK((gv - gv.transpose()).norm() == 0.0);
            CHECK(gv.diagonal().cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("stochastic operator is SPD for admissible theta") {
    const double theta = 0.9 * stochastic_theta_bound(2);
    const auto p = gen_stochastic(8, 2, 2, theta);
    CHECK(p.n_sigma == 6);
    const Matrix k = materialize_kron(p.op);
    CHECK((k - k.transpose()).norm() <= 1e-14 * k.norm());
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (k + k.transpose())).eigenvalues();
    CHECK(ev(0) > 0.0);
}

TEST_CASE("positivity of the diffusion coefficient is enforced") {
    CHECK(stochastic_theta_bound(1) == 1.0);
    CHECK(stochastic_theta_bound(2) == doctest::Approx(0.8));
    CHECK(std::isinf(stochastic_theta_bound(0)));
    CHECK_THROWS_AS(gen_stochastic(4, 2, 2, 0.8), ParameterError);
    CHECK_THROWS_AS(gen_stochastic(4, 1, 0, 0.1), ParameterError);
    CHECK_THROWS_AS(gen_stochastic(1, 1, 1, 0.1), ParameterError);
    CHECK_NOTHROW(gen_stochastic(4, 2, 2, 0.79));
}

TEST_CASE("generators are deterministic") {
    const auto a = gen_stochastic(6, 3, 2, 0.5);
    const auto b = gen_stochastic(6, 3, 2, 0.5);
    for (std::size_t i = 0; i < a.k_list.size(); ++i) {
        CHECK((Matrix(a.k_list[i]).array() == Matrix(b.k_list[i]).array()).all());
        CHECK((Matrix(a.g_list[i]).array() == Matrix(b.g_list[i]).array()).all());
    }
    const auto c = gen_convdiff(11, 0.3);
    const auto d = gen_convdiff(11, 0.3);
    for (std::size_t i = 0; i < c.op.num_terms(); ++i) {
        CHECK((Matrix(c.op.a_factors()[i]).array() == Matrix(d.op.a_factors()[i]).array()).all());
        CHECK((Matrix(c.op.b_factors()[i]).array() == Matrix(d.op.b_factors()[i]).array()).all());
    }
}

TEST_CASE("Matrix Market round trip") {
    TempDir dir("mm");
    const auto p = gen_convdiff(5, 0.7);
    write_mm(dir.path / "t.mtx", p.t);
    const SparseMatrix back = read_mm(dir.path / "t.mtx");
    CHECK((Matrix(back).array() == Matrix(p.t).array()).all());

    std::mt19937_64 gen(71);
    const Matrix dense = ref::gaussian(4, 3, gen);
    write_mm_dense(dir.path / "d.mtx", dense);
    CHECK((read_mm_dense(dir.path / "d.mtx").array() == dense.array()).all());
}

TEST_CASE("Matrix Market variants") {
    TempDir dir("mmv");
    write_file(dir.path / "sym.mtx",
               "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2\n2 1 -1\n3 3 5\n3 2 0.5\n");
    Matrix sym(3, 3);
    sym << 2, -1, 0, -1, 0, 0.5, 0, 0.5, 5;
    CHECK(Matrix(read_mm(dir.path / "sym.mtx")) == sym);

    write_file(dir.path / "skew.mtx", "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n");
    Matrix skew(2, 2);
    skew << 0, -3, 3, 0;
    CHECK(Matrix(read_mm(dir.path / "skew.mtx")) == skew);

    write_file(dir.path / "pat.mtx", "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n");
    Matrix pat(2, 2);
    pat << 0, 1, 1, 0;
    CHECK(Matrix(read_mm(dir.path / "pat.mtx")) == pat);

    write_file(dir.path / "int.mtx", "%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 1 7\n");
    CHECK(Matrix(read_mm(dir.path / "int.mtx"))(0, 0) == 7.0);
}

TEST_CASE("malformed Matrix Market files give parse errors with line numbers") {
    TempDir dir("mmbad");
    write_file(dir.path / "short.mtx", "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 1.0\n2 2 ");
    try {
        read_mm(dir.path / "short.mtx");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    write_file(dir.path / "range.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
    CHECK_THROWS_AS(read_mm(dir.path / "range.mtx"), ParseError);
    write_file(dir.path / "header.mtx", "%%NotMatrixMarket\n1 1 1\n1 1 1\n");
    CHECK_THROWS_AS(read_mm(dir.path / "header.mtx"), ParseError);
    write_file(dir.path / "num.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n");
    CHECK_THROWS_AS(read_mm(dir.path / "num.mtx"), ParseError);
    CHECK_THROWS_AS(read_mm(dir.path / "missing.mtx"), Error);
}

TEST_CASE("manifest round trip reproduces the operator") {
    TempDir dir("manifest");
    std::mt19937_64 gen(72);
    const auto p = gen_stochastic(4, 1, 2, 0.5);
    const fs::path manifest = write_problem(dir.path, "stochastic", params_of(p), named_terms(p), p.c1, p.c2);
    CHECK(fs::exists(manifest));
    CHECK(fs::exists(dir.path / "K0.mtx"));
    CHECK(fs::exists(dir.path / "G1.mtx"));
    const ProblemData back = read_problem(manifest);
    CHECK(back.kind == "stochastic");
    CHECK(back.params.at("r") == 1.0);
    CHECK(back.op.num_terms() == 2);
    CHECK((back.c1.array() == p.c1.array()).all());
    CHECK((back.c2.array() == p.c2.array()).all());
    const auto x = ref::random_lr(p.n_x, p.n_sigma, 2, gen);
    CHECK(ref::rel_diff(ref::dense(apply(back.op, x)), ref::dense(apply(p.op, x))) == 0.0);

    TempDir cd("manifest_cd");
    const auto q = gen_convdiff(6, 0.5);
    write_problem(cd.path, "convdiff", params_of(q), named_terms(q), q.c1, q.c2);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(cd.path)) files += e.path().extension() == ".mtx";
    CHECK(files == 6);
}

TEST_CASE("manifest errors") {
    TempDir dir("manifest_bad");
    const auto p = gen_convdiff(4, 0.5);
    const fs::path manifest = write_problem(dir.path, "convdiff", params_of(p), named_terms(p), p.c1, p.c2);
    std::ifstream in(manifest);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    write_file(dir.path / "cut.json", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_problem(dir.path / "cut.json"), ParseError);

    // a term whose A factor has the wrong order
    write_mm(dir.path / "small.mtx", SparseMatrix(3, 3));
    std::string bad = text;
    const auto pos = bad.find("\"nuT.mtx\"");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 9, "\"small.mtx\"");
    write_file(dir.path / "bad.json", bad);
    CHECK_THROWS_AS(read_problem(dir.path / "bad.json"), ValidationError);

    write_file(dir.path / "fmt.json", R"({"format": "other", "version": 1})");
    CHECK_THROWS_AS(read_problem(dir.path / "fmt.json"), ValidationError);
}
