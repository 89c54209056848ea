#include "lrk/kronop.hpp"

#include "lrk/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace lrk {

MultitermOperator::MultitermOperator(std::vector<KronTerm> terms) {
    if (terms.empty()) throw ContractError("MultitermOperator: at least one term required");
    n_a_ = terms.front().a.rows();
    n_b_ = terms.front().b.rows();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        auto& t = terms[i];
        if (t.a.rows() != t.a.cols() || t.b.rows() != t.b.cols())
            throw ContractError("MultitermOperator: term " + std::to_string(i) + " has a non-square factor");
        if (t.a.rows() != n_a_ || t.b.rows() != n_b_)
            throw ContractError("MultitermOperator: term " + std::to_string(i) + " has order (" +
                                std::to_string(t.a.rows()) + ", " + std::to_string(t.b.rows()) +
                                "), expected (" + std::to_string(n_a_) + ", " + std::to_string(n_b_) + ")");
        t.a.makeCompressed();
        t.b.makeCompressed();
        a_.push_back(std::move(t.a));
        b_.push_back(std::move(t.b));
    }
}

bool MultitermOperator::factors_symmetric() const {
    auto sym = [](const SparseMatrix& m) {
        const SparseMatrix t = m.transpose();
        return SparseMatrix(m - t).norm() == 0.0;
    };
    return std::all_of(a_.begin(), a_.end(), sym) && std::all_of(b_.begin(), b_.end(), sym);
}

namespace {

void check_shape(const MultitermOperator& op, const LowRankMatrix& x, const char* who) {
    if (x.rows() != op.rows_a() || x.cols() != op.rows_b()) {
        throw ContractError(std::string(who) + ": operand is " + std::to_string(x.rows()) + "x" +
                            std::to_string(x.cols()) + ", operator acts on " + std::to_string(op.rows_a()) +
                            "x" + std::to_string(op.rows_b()));
    }
}

}  // namespace

LowRankMatrix apply(const MultitermOperator& op, const LowRankMatrix& x) {
    check_shape(op, x, "apply");
    Matrix left, right;
    kernels::stacked_products_omp(op.a_factors(), x.left(), false, left);
    kernels::stacked_products_omp(op.b_factors(), x.right(), false, right);
    return LowRankMatrix(std::move(left), std::move(right));
}

LowRankMatrix apply_adjoint(const MultitermOperator& op, const LowRankMatrix& x) {
    check_shape(op, x, "apply_adjoint");
    Matrix left, right;
    kernels::stacked_products_omp(op.a_factors(), x.left(), true, left);
    kernels::stacked_products_omp(op.b_factors(), x.right(), true, right);
    return LowRankMatrix(std::move(left), std::move(right));
}

LowRankMatrix apply_serial(const MultitermOperator& op, const LowRankMatrix& x, bool adjoint) {
    check_shape(op, x, "apply_serial");
    Matrix left, right;
    kernels::stacked_products_serial(op.a_factors(), x.left(), adjoint, left);
    kernels::stacked_products_serial(op.b_factors(), x.right(), adjoint, right);
    return LowRankMatrix(std::move(left), std::move(right));
}

LowRankMap as_map(const MultitermOperator& op) {
    LowRankMap map;
    map.rows = op.rows_a();
    map.cols = op.rows_b();
    map.forward = [&op](const LowRankMatrix& x) { return apply(op, x); };
    map.adjoint = [&op](const LowRankMatrix& x) { return apply_adjoint(op, x); };
    return map;
}

namespace {

// w - sum_i <q_i, w> q_i, twice, compressed at `tol`. Returns the result and its norm.
std::pair<LowRankMatrix, double> orthogonalize(const LowRankMatrix& w, const std::vector<LowRankMatrix>& qs,
                                               double tol) {
    LowRankMatrix cur = w;
    double norm = fro_norm(w);
    for (int pass = 0; pass < 2; ++pass) {
        const Vector c = kernels::batched_inner_omp(qs, cur);
        std::vector<std::pair<double, const LowRankMatrix*>> terms;
        terms.reserve(qs.size() + 1);
        terms.emplace_back(1.0, &cur);
        for (std::size_t i = 0; i < qs.size(); ++i) terms.emplace_back(-c(static_cast<Index>(i)), &qs[i]);
        auto res = trunc(concat_scaled(terms), tol);
        cur = std::move(res.kept);
        norm = res.kept_norm;
    }
    return {std::move(cur), norm};
}

}  // namespace

SpectralEstimates estimate_extremes(const MultitermOperator& op, const LanczosOptions& opts) {
    return estimate_extremes(as_map(op), opts);
}

SpectralEstimates estimate_extremes(const LowRankMap& map, const LanczosOptions& opts) {
    if (opts.steps < 2) throw ContractError("estimate_extremes: steps must be >= 2");

    std::mt19937_64 gen(opts.seed);
    std::normal_distribution<double> dist;
    Matrix l(map.rows, 1), r(map.cols, 1);
    for (Index i = 0; i < l.rows(); ++i) l(i, 0) = dist(gen);
    for (Index i = 0; i < r.rows(); ++i) r(i, 0) = dist(gen);
    LowRankMatrix v0(std::move(l), std::move(r));
    v0 = v0.scaled(1.0 / fro_norm(v0));

    std::vector<LowRankMatrix> us, vs{v0};
    std::vector<double> alpha, beta;  // B = upper bidiagonal(alpha; beta)

    // Compress a raw product at the carrier tolerance before orthogonalizing.
    auto compress = [&](const LowRankMatrix& x) {
        return trunc(x.left(), Matrix::Identity(x.rank(), x.rank()), x.right(), opts.tol).kept;
    };

    double scale = 0.0;
    for (int j = 0; j < opts.steps; ++j) {
        auto [w, a] = orthogonalize(compress(map.forward(vs.back())), us, opts.tol);
        scale = std::max(scale, a);
        if (a <= 1e-12 * scale) break;
        alpha.push_back(a);
        us.push_back(w.scaled(1.0 / a));

        auto [z, b] = orthogonalize(compress(map.adjoint(us.back())), vs, opts.tol);
        scale = std::max(scale, b);
        if (b <= 1e-12 * scale || j + 1 == opts.steps) break;
        beta.push_back(b);
        vs.push_back(z.scaled(1.0 / b));
    }

    const auto k = static_cast<Index>(alpha.size());
    if (k == 0) throw NumericError("estimate_extremes: operator annihilates the start vector");
    Matrix bidiag = Matrix::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
        bidiag(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < k) bidiag(i, i + 1) = beta[static_cast<std::size_t>(i)];
    }
    const Vector sv = Eigen::JacobiSVD<Matrix>(bidiag).singularValues();

    SpectralEstimates est;
    est.sigma_max = sv(0);
    est.sigma_min = sv(k - 1);
    est.steps_done = static_cast<int>(k);
    est.source = EstimateSource::estimated;
    if (!(est.sigma_min > 0.0)) throw NumericError("estimate_extremes: zero Ritz singular value");
    return est;
}

Matrix materialize_kron(const MultitermOperator& op, std::size_t guard) {
    const Index na = op.rows_a();
    const Index nb = op.rows_b();
    const auto n = static_cast<std::size_t>(na) * static_cast<std::size_t>(nb);
    if (n > guard) {
        throw ResourceError("materialize_kron: order " + std::to_string(n) + " exceeds guard of " +
                            std::to_string(guard));
    }
    Matrix out = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t t = 0; t < op.num_terms(); ++t) {
        const SparseMatrix& a = op.a_factors()[t];
        const SparseMatrix& b = op.b_factors()[t];
        for (Index kb = 0; kb < b.outerSize(); ++kb) {
            for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib) {
                const Index jb = ib.row();
                for (Index ka = 0; ka < a.outerSize(); ++ka) {
                    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia) {
                        out(jb * na + ia.row(), kb * na + ka) += ib.value() * ia.value();
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace lrk
