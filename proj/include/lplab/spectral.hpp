#pragma once

#include <optional>
#include <set>

#include <Eigen/Eigenvalues>

#include "op_norm.hpp"

namespace lplab {

struct EigenPair {
    cplx lambda{0.0};
    SpVector vector;
    double residual = 0.0;
    bool converged = true;
};

// ---------------------------------------------------------------------------
// dense eigen-solve (Hessenberg reduction + shifted QR inside Eigen)

inline constexpr Index kMaxDenseEig = 256;

struct DenseEigs {
    std::vector<cplx> values;
    Mat vectors;  // unit 2-norm columns
    std::vector<double> residuals;
    std::vector<bool> ok;
};

inline DenseEigs eigs_dense_raw(const Mat& M, Index max_dim = kMaxDenseEig) {
    require(M.rows() == M.cols(), "eigs_dense: square matrix required");
    if (M.rows() > max_dim) throw DimensionTooLarge("eigs_dense: dimension above limit");
    DenseEigs out;
    if (M.rows() == 0) return out;
    Eigen::ComplexEigenSolver<Mat> es(M, true);
    if (es.info() != Eigen::Success) throw NonConvergence("eigs_dense: QR iteration did not converge");
    const double scale = std::max(sigma_max(M), 1e-300);
    out.vectors = es.eigenvectors();
    // Back-substitution overflows on defective clusters; fall back to the smallest right
    // singular vector of M - lambda, computed once per distinct eigenvalue.
    std::vector<std::pair<cplx, Vec>> fallback;
    auto null_vector = [&](cplx l) -> Vec {
        for (auto& [fl, fv] : fallback)
            if (std::abs(fl - l) <= 1e-14 * scale) return fv;
        Mat Ml = M - l * Mat::Identity(M.rows(), M.rows());
        Eigen::BDCSVD<Mat> svd(Ml, Eigen::ComputeThinV);
        Vec v = svd.matrixV().col(M.rows() - 1);
        fallback.emplace_back(l, v);
        return v;
    };
    for (Index i = 0; i < M.rows(); ++i) {
        Vec v = out.vectors.col(i);
        cplx l = es.eigenvalues()(i);
        double nv = v.norm();
        if (nv > 0.0 && std::isfinite(nv)) v /= nv;
        if (!v.allFinite() || nv == 0.0 || (M * v - l * v).norm() > 1e-8 * scale) v = null_vector(l);
        out.vectors.col(i) = v;
        double r = (M * v - l * v).norm();
        out.values.push_back(l);
        out.residuals.push_back(r);
        out.ok.push_back(r <= 1e-8 * scale);
    }
    return out;
}

inline std::vector<EigenPair> eigs_dense(const Mat& M, Index offset = 0) {
    auto raw = eigs_dense_raw(M);
    std::vector<EigenPair> out;
    for (std::size_t i = 0; i < raw.values.size(); ++i)
        out.push_back({raw.values[i], to_spvector(raw.vectors.col(static_cast<Index>(i)), offset), raw.residuals[i],
                       raw.ok[i]});
    return out;
}

// ---------------------------------------------------------------------------
// weighted shifts S_{A,omega} on l_p(Z)

// omega_j = vals[j - lo] on [lo, hi], `left` below lo, `right` above hi.
struct WeightSeq {
    Index lo = 0, hi = -1;
    std::vector<double> vals;
    double left = 1.0, right = 1.0;

    static WeightSeq constant(double w) { return {0, -1, {}, w, w}; }
    double operator()(Index j) const {
        if (j < lo) return left;
        if (j > hi) return right;
        return vals[static_cast<std::size_t>(j - lo)];
    }
    void validate() const {
        require(hi < lo || static_cast<Index>(vals.size()) == hi - lo + 1, "WeightSeq: size mismatch");
        require(left > 0.0 && right > 0.0, "WeightSeq: weights must be positive");
        for (double v : vals) require(v > 0.0 && std::isfinite(v), "WeightSeq: weights must be positive");
    }
    double sup_outside(Index a, Index b) const {
        double s = std::max(left, right);
        for (Index j = lo; j <= hi; ++j)
            if (j < a || j > b) s = std::max(s, (*this)(j));
        return s;
    }
    double sup_on(Index a, Index b) const {
        double s = 0.0;
        if (a < lo) s = std::max(s, left);
        if (b > hi) s = std::max(s, right);
        for (Index j = std::max(a, lo); j <= std::min(b, hi); ++j) s = std::max(s, (*this)(j));
        return s;
    }
};

struct LambdaSets {
    cplx lambda{0.0};
    std::vector<Index> minus, plus;
    double left_ratio = 0.0, right_ratio = 0.0;  // limiting moduli of the two series
};

// The left series has eventual ratio omega_left/|lambda|, the right one |lambda|/omega_right;
// convergence iff that ratio is < 1 (ratio 1 is divergent). Finite products never vanish
// because weights are positive, so membership is all-or-nothing on [-N, N].
inline LambdaSets lambda_sets(const WeightSeq& w, Index N, cplx lambda, double p) {
    w.validate();
    require(p >= 1.0, "lambda_sets: p >= 1");
    LambdaSets s;
    s.lambda = lambda;
    double a = std::abs(lambda);
    s.right_ratio = a / w.right;
    s.left_ratio = a == 0.0 ? std::numeric_limits<double>::infinity() : w.left / a;
    bool in_minus = a > 0.0 && s.left_ratio < 1.0;
    bool in_plus = s.right_ratio < 1.0;
    for (Index k = -N; k <= N; ++k) {
        if (in_minus) s.minus.push_back(k);
        if (in_plus) s.plus.push_back(k);
    }
    return s;
}

// Partial sums of the two series, for cross-checking the ratio test.
inline std::pair<double, double> lambda_series_partial(const WeightSeq& w, Index N, Index k, cplx lambda, double p,
                                                       int terms) {
    const Index d = 2 * N + 1;
    double sm = 0.0, sp = 0.0, prodm = 1.0, prodp = 1.0;
    double a = std::abs(lambda);
    for (int i = 1; i <= terms; ++i) {
        prodm *= w(k - (i - 1) * d) / a;
        prodp *= a / w(k + (i - 1) * d);
        sm += std::pow(prodm, p);
        sp += std::pow(prodp, p);
    }
    return {sm, sp};
}

// Eigenvector of S_{A,omega} from its central block u, via (S y)_j = omega_j y_{j+d} + (A P y)_j.
// Rows outside `plus` are forced to vanish by feasibility and are zeroed exactly.
inline SpVector saomega_eigenvector(const Mat& A, const WeightSeq& w, Index N, cplx lambda, const Vec& u,
                                    const std::vector<Index>& plus) {
    const Index d = 2 * N + 1;
    std::map<Index, cplx> y;
    for (Index k = -N; k <= N; ++k) y[k] = u(k + N);
    Vec r = (A - lambda * Mat::Identity(d, d)) * u;
    for (Index k = -N; k <= N; ++k) y[k + d] = 0.0;
    for (Index k : plus) y[k + d] = -r(k + N) / w(k);
    // forward: y_{j+d} = lambda y_j / omega_j for j >= N+1, until omega is constant
    Index F = std::max(w.hi + 1, N + 1);
    for (Index j = 3 * N + 2; j < F + d; ++j) y[j] = lambda * y[j - d] / w(j - d);
    // backward: y_{j} = omega_j y_{j+d} / lambda for j <= -N-1
    Index G = std::min(w.lo - 1, -N - 1);
    for (Index j = -N - 1; j > G - d; --j) y[j] = w(j) * y[j + d] / lambda;
    std::map<Index, cplx> f;
    std::vector<GeoTail> ts;
    for (auto& [j, v] : y) {
        if (v == 0.0) continue;
        if (j >= F) {
            ts.push_back({j, d, v, lambda / w.right});
        } else if (j <= G) {
            ts.push_back({j, -d, v, w.left / lambda});
        } else if (v != 0.0) {
            f[j] = v;
        }
    }
    return SpVector::from_parts(std::move(f), std::move(ts));
}

struct SAomegaEigen {
    EigenPair pair;
    double window_residual = 0.0;
    double exact_residual = 0.0;
    Index window = 0;
};

StructuredOperator build_S_A_omega(const Mat& A, const WeightSeq& w, PNorm n);

// Finite feasibility: u in span{f_k : k in minus}, P_{[-N,N] \ plus} (A - lambda) u = 0.
inline std::optional<SAomegaEigen> point_spectrum_SAomega(const Mat& A, const WeightSeq& w, cplx lambda, double p,
                                                          Index window = 200) {
    const Index d = A.rows();
    require(d == A.cols() && d % 2 == 1, "point_spectrum_SAomega: A must be (2N+1)x(2N+1)");
    const Index N = (d - 1) / 2;
    if (lambda == 0.0) return std::nullopt;
    auto sets = lambda_sets(w, N, lambda, p);
    if (sets.minus.empty()) return std::nullopt;
    std::set<Index> plus(sets.plus.begin(), sets.plus.end());
    std::vector<Index> rows;
    for (Index k = -N; k <= N; ++k)
        if (!plus.count(k)) rows.push_back(k);
    const Index m = static_cast<Index>(sets.minus.size());
    Mat Al = A - lambda * Mat::Identity(d, d);
    Vec u = Vec::Zero(d);
    if (rows.empty()) {
        u(sets.minus.front() + N) = 1.0;
    } else {
        Mat C(static_cast<Index>(rows.size()), m);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (Index c = 0; c < m; ++c) C(static_cast<Index>(i), c) = Al(rows[i] + N, sets.minus[static_cast<std::size_t>(c)] + N);
        Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
        const double tol = 1e-10 * std::max(1.0, svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
        Index rank = 0;
        for (Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > tol) ++rank;
        if (rank >= m) return std::nullopt;
        Vec z = svd.matrixV().col(m - 1);
        for (Index c = 0; c < m; ++c) u(sets.minus[static_cast<std::size_t>(c)] + N) = z(c);
    }
    SAomegaEigen out;
    out.pair.lambda = lambda;
    out.pair.vector = saomega_eigenvector(A, w, N, lambda, u, sets.plus);
    PNorm n = PNorm::Lp(p);
    double ny = norm(out.pair.vector, n);
    out.pair.vector = (1.0 / ny) * out.pair.vector;
    auto S = build_S_A_omega(A, w, n);
    SpVector res = apply(S, out.pair.vector) - lambda * out.pair.vector;
    out.exact_residual = norm(res, n);
    Vec rw = to_dense(res, -window, 2 * window + 1);
    out.window_residual = vec_norm(rw, n);
    out.window = window;
    out.pair.residual = out.window_residual;
    return out;
}

// ---------------------------------------------------------------------------
// approximate point spectrum probe

namespace detail {

inline Mat shifted_rect(const StructuredOperator& T, cplx lambda, Index D, std::vector<Index>* row_idx = nullptr) {
    auto [lo, n] = truncation_window(T.domain, D);
    std::set<Index> rows;
    for (Index c = 0; c < n; ++c) {
        rows.insert(lo + c);
        auto col = T.column(lo + c);
        for (auto& [r, v] : col.entries()) rows.insert(r);
    }
    std::vector<Index> ridx(rows.begin(), rows.end());
    std::map<Index, Index> pos;
    for (std::size_t i = 0; i < ridx.size(); ++i) pos[ridx[i]] = static_cast<Index>(i);
    Mat R = Mat::Zero(static_cast<Index>(ridx.size()), n);
    for (Index c = 0; c < n; ++c) {
        auto col = T.column(lo + c);
        for (auto& [r, v] : col.entries()) R(pos[r], c) += v;
        R(pos[lo + c], c) -= lambda;
    }
    if (row_idx) *row_idx = ridx;
    return R;
}

}  // namespace detail

// Upper bound on inf ||(T - lambda) x|| over unit x supported in the truncation window.
inline double min_gain(const StructuredOperator& T, cplx lambda, const PNorm& n, Index D, std::uint64_t seed = 1,
                       Vec* argmin = nullptr) {
    require(D >= 1 && D <= 512, "min_gain: 1 <= D <= 512");
    Mat R = detail::shifted_rect(T, lambda, D);
    const Index nc = R.cols();
    Eigen::BDCSVD<Mat> svd(R, Eigen::ComputeThinV);
    if (!n.is_c0() && n.p == 2.0) {
        if (argmin) *argmin = svd.matrixV().col(nc - 1);
        return svd.singularValues()(nc - 1);
    }
    auto f = [&](const Vec& x) { return vec_norm(R * x, n) / vec_norm(x, n); };
    // smooth surrogate exponent for the descent; the true objective is evaluated throughout
    const double ps = n.is_c0() ? 32.0 : std::max(1.05, n.p);
    std::vector<Vec> starts;
    for (Index k = 0; k < std::min<Index>(4, nc); ++k) starts.push_back(svd.matrixV().col(nc - 1 - k));
    Rng rng(seed);
    for (int s = 0; s < 4; ++s) {
        Vec x(nc);
        for (Index i = 0; i < nc; ++i) x(i) = rng.cnormal();
        starts.push_back(x);
    }
    std::vector<double> vals(starts.size());
    std::vector<Vec> xs(starts.size());
    parallel_for(starts.size(), [&](std::size_t si) {
        Vec x = starts[si];
        double fx = f(x);
        double step = 0.1;
        for (int it = 0; it < 300 && step > 1e-9; ++it) {
            Vec y = R * x;
            double ny = vec_norm(y, PNorm::Lp(ps));
            if (ny == 0.0) break;
            // Wirtinger gradient of log||Rx||_ps - log||x||_ps
            Vec gy(y.size());
            for (Index i = 0; i < y.size(); ++i) {
                double a = std::abs(y(i));
                gy(i) = a == 0.0 ? cplx(0.0) : y(i) * std::pow(a / ny, ps - 2.0) / (ny * ny);
            }
            double nx = vec_norm(x, PNorm::Lp(ps));
            Vec gx(nc);
            for (Index i = 0; i < nc; ++i) {
                double a = std::abs(x(i));
                gx(i) = a == 0.0 ? cplx(0.0) : x(i) * std::pow(a / nx, ps - 2.0) / (nx * nx);
            }
            Vec g = R.adjoint() * gy - gx;
            double gn = g.norm();
            if (gn == 0.0) break;
            Vec xn = x - (step * x.norm() / gn) * g;
            double fn = f(xn);
            if (fn < fx) {
                x = xn;
                fx = fn;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        vals[si] = fx;
        xs[si] = x / vec_norm(x, n);
    });
    std::size_t bi = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
        if (vals[i] < vals[bi]) bi = i;
    double best = vals[bi];
    Vec bestx = xs[bi];
    if (argmin) *argmin = bestx;
    return best;
}

// ||T^n x|| for n = 0..n_max; a rise beyond 1e-12 relative slack means the contraction
// certificate was wrong.
inline std::vector<double> orbit_decay(const StructuredOperator& T, const SpVector& x, Index n_max,
                                       const PNorm& n) {
    std::vector<double> out;
    SpVector y = x;
    out.push_back(norm(y, n));
    for (Index k = 1; k <= n_max; ++k) {
        y = apply(T, y);
        double v = norm(y, n);
        if (v > out.back() + 1e-12 * std::max(1.0, out.back()))
            throw MonotonicityViolation("orbit_decay: ||T^n x|| increased at n = " + std::to_string(k));
        out.push_back(v);
        if (y.empty()) {
            out.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
            break;
        }
    }
    return out;
}

inline std::vector<double> orbit_decay(const StructuredOperator& T, const SpVector& x, Index n_max) {
    return orbit_decay(T, x, n_max, T.ambient);
}

// ---------------------------------------------------------------------------

// S_{A,omega} f_k = A f_k [|k| <= N] + omega_{k-d} f_{k-d}, d = 2N+1, on l_p(Z).
inline StructuredOperator build_S_A_omega(const Mat& A, const WeightSeq& w, PNorm n) {
    w.validate();
    const Index d = A.rows();
    require(d == A.cols() && d % 2 == 1, "build_S_A_omega: A must be (2N+1)x(2N+1)");
    const Index N = (d - 1) / 2;
    StructuredOperator S = StructuredOperator::zero(n, IndexDomain::AllInts);
    // explicit columns: the central block, and every column whose weight is not yet constant
    Index KR = std::max(N + 1, w.hi + d + 1);
    Index KL = std::min(-N - 1, w.lo + d - 1);
    for (Index k = KL + 1; k < KR; ++k) {
        S.block.cols[k];
        if (std::abs(k) <= N)
            for (Index r = -N; r <= N; ++r) S.block.add(r, k, A(r + N, k + N));
        S.block.add(k - d, k, w(k - d));
    }
    S.rules.push_back({KR, 1, -1, {{RowMap::affine(1, -d), w.right, 0.0, 0.0}}});
    S.rules.push_back({KL, -1, -1, {{RowMap::affine(1, -d), w.left, 0.0, 0.0}}});
    return S;
}

}  // namespace lplab
