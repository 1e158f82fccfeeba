#pragma once

#include "polynomials.hpp"
#include "spectral.hpp"

namespace lplab {

// ---------------------------------------------------------------------------
// Gram-Schmidt on the Krylov sequence (T^j f0)

struct Triangularization {
    Mat U;  // unitary, R = U T U^{-1}
    Mat R;  // upper Hessenberg, positive subdiagonal
    double min_subdiag = 0.0;
    double unitarity = 0.0;  // ||U U^* - I||_max
};

// Orthonormalising T^j f0 one step at a time is the Arnoldi recursion; span{f_0..f_j} equals the
// Krylov span, and each new vector gets a positive coefficient, which is the subdiagonal of R.
inline Triangularization gram_schmidt_triangularize(const Mat& T, const Vec& f0, double tol = 1e-10) {
    require(T.rows() == T.cols() && f0.size() == T.rows(), "gram_schmidt_triangularize: shapes");
    const Index D = T.rows();
    double f0n = f0.norm();
    require(f0n > 0.0, "gram_schmidt_triangularize: f0 != 0");
    const double scale = std::max(1.0, sigma_max(T));
    Mat Q = Mat::Zero(D, D);
    Q.col(0) = f0 / f0n;
    Triangularization out;
    out.min_subdiag = std::numeric_limits<double>::infinity();
    for (Index j = 0; j + 1 < D; ++j) {
        Vec w = T * Q.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i <= j; ++i) w -= Q.col(i).dot(w) * Q.col(i);
        double h = w.norm();
        if (!(h > tol * scale))
            throw KrylovDegenerate("gram_schmidt_triangularize: Krylov vectors dependent at step " +
                                   std::to_string(j + 1));
        out.min_subdiag = std::min(out.min_subdiag, h);
        Q.col(j + 1) = w / h;
    }
    out.U = Q.adjoint();
    out.R = out.U * T * Q;
    // the subdiagonal is real positive by construction; clear rounding noise below it
    for (Index c = 0; c < D; ++c)
        for (Index r = c + 2; r < D; ++r) out.R(r, c) = 0.0;
    out.unitarity = (out.U * out.U.adjoint() - Mat::Identity(D, D)).cwiseAbs().maxCoeff();
    return out;
}

inline bool is_upper_hessenberg_positive(const Mat& R, double tol = 0.0) {
    for (Index c = 0; c < R.cols(); ++c) {
        for (Index r = c + 2; r < R.rows(); ++r)
            if (std::abs(R(r, c)) > tol) return false;
        if (c + 1 < R.rows() && !(R(c + 1, c).real() > 0.0 && std::abs(R(c + 1, c).imag()) <= tol)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// commutant witness: T = B P_N + S (I - P_N) on l2, B real and in T1

struct CommutantWitness {
    Index N = 0;
    Mat B;  // (N+2) x (N+1), columns e_0..e_N
    double b_N = 0.0;
    StructuredOperator T;
    std::vector<cplx> lambdas;
    Mat V;  // eigenvectors of B_N^T, columns
    std::vector<cplx> betas;
    Poly p, q, r, s;
    double bezout_residual = 0.0;
    double division_remainder = 0.0;
    SpVector x0;
    int retries = 0;
};

inline StructuredOperator commutant_operator(const Mat& B, Index N) {
    auto T = StructuredOperator::zero(PNorm::Lp(2.0));
    for (Index j = 0; j <= N; ++j) {
        T.block.cols[j];
        for (Index i = 0; i < B.rows(); ++i) T.block.add(i, j, B(i, j));
    }
    T.rules.push_back({N + 1, 1, -1, {{RowMap::affine(1, 1), 1.0, 0.0, 0.0}}});
    return T;
}

namespace detail {

inline bool commutant_try(CommutantWitness& w) {
    const Index N = w.N, d = N + 1;
    Mat BNt = w.B.topRows(d).transpose();
    auto eig = eigs_dense_raw(BNt);
    const double scale = std::max(1.0, sigma_max(BNt));
    for (Index i = 0; i < d; ++i) {
        if (!eig.ok[static_cast<std::size_t>(i)]) return false;
        for (Index k = 0; k < i; ++k)
            if (std::abs(eig.values[static_cast<std::size_t>(i)] - eig.values[static_cast<std::size_t>(k)]) <
                1e-6 * scale)
                return false;
    }
    w.lambdas = eig.values;
    w.V = eig.vectors;
    Vec eN = Vec::Zero(d);
    eN(N) = 1.0;
    Eigen::FullPivLU<Mat> lu(w.V);
    if (!lu.isInvertible()) return false;
    Vec beta = lu.solve(eN);
    w.betas.assign(beta.data(), beta.data() + d);
    for (Index n = 0; n < d; ++n)
        if (std::abs(beta(n)) < 1e-8 || std::abs(w.V(0, n)) < 1e-8) return false;

    w.p = poly_from_roots(w.lambdas);
    // q(w) = <f_w, e_0> = b_N sum_n beta_n <v_n, e_0> prod_{k != n} (w - lambda_k)
    w.q = {0.0};
    for (Index n = 0; n < d; ++n) {
        std::vector<cplx> others;
        for (Index k = 0; k < d; ++k)
            if (k != n) others.push_back(w.lambdas[static_cast<std::size_t>(k)]);
        w.q = poly_add(w.q, poly_scale(poly_from_roots(others), w.b_N * beta(n) * w.V(0, n)));
    }
    std::vector<cplx> sv;
    for (auto l : w.lambdas) {
        cplx ql = poly_eval(w.q, l);
        if (std::abs(ql) < 1e-12) return false;
        sv.push_back(1.0 / ql);
    }
    w.s = lagrange(w.lambdas, sv);
    auto [rq, rem] = poly_divmod(poly_sub({1.0}, poly_mul(w.s, w.q)), w.p);
    w.r = rq;
    w.division_remainder = poly_coeff_norm(rem);
    Poly bez = poly_sub(poly_add(poly_mul(w.r, w.p), poly_mul(w.s, w.q)), {1.0});
    w.bezout_residual = poly_coeff_norm(bez);
    return w.division_remainder < 1e-8 && w.bezout_residual < 1e-8;
}

}  // namespace detail

inline CommutantWitness build_commutant_witness(const Mat& B, Index N, std::uint64_t seed = 1,
                                                int max_retries = 100) {
    require(N >= 0 && B.rows() == N + 2 && B.cols() == N + 1, "build_commutant_witness: B is (N+2) x (N+1)");
    for (Index i = 0; i < B.rows(); ++i)
        for (Index j = 0; j < B.cols(); ++j) {
            require(B(i, j).imag() == 0.0, "build_commutant_witness: B must be real");
            require(i <= j + 1 || B(i, j) == 0.0, "build_commutant_witness: B not in T1");
        }
    for (Index j = 0; j <= N; ++j)
        require(B(j + 1, j).real() > 0.0, "build_commutant_witness: positive subdiagonal required");
    CommutantWitness w;
    w.N = N;
    w.B = B;
    Rng rng(seed);
    const double jitter = 1e-3 * std::max(1.0, B.cwiseAbs().maxCoeff());
    for (int t = 0; t <= max_retries; ++t) {
        w.b_N = w.B(N + 1, N).real();
        if (detail::commutant_try(w)) {
            w.retries = t;
            w.T = commutant_operator(w.B, N);
            w.x0 = poly_apply(w.T, w.r, SpVector::basis(N + 1)) + poly_apply(w.T, w.s, SpVector::basis(0));
            return w;
        }
        // perturb inside T1, keeping entries real and the subdiagonal positive
        w.B = B;
        for (Index j = 0; j <= N; ++j)
            for (Index i = 0; i <= j + 1; ++i) {
                double v = w.B(i, j).real() + jitter * rng.normal();
                if (i == j + 1) v = std::max(v, 0.5 * B(i, j).real());
                w.B(i, j) = v;
            }
    }
    throw DegenerateSpectrum("build_commutant_witness: degenerate after retries");
}

// f_w = p(w) g_w with p(w)/(w - lambda_n) expanded, so every w in the disk is admissible.
inline SpVector eval_f_w(const CommutantWitness& wit, cplx w, Index window = 200, double* residual = nullptr) {
    require(std::abs(w) < 1.0, "eval_f_w: |w| < 1");
    const Index d = wit.N + 1;
    Vec head = Vec::Zero(d);
    for (Index n = 0; n < d; ++n) {
        cplx pr = 1.0;
        for (Index k = 0; k < d; ++k)
            if (k != n) pr *= w - wit.lambdas[static_cast<std::size_t>(k)];
        head += wit.b_N * wit.betas[static_cast<std::size_t>(n)] * pr * wit.V.col(n);
    }
    std::map<Index, cplx> f;
    for (Index i = 0; i < d; ++i)
        if (head(i) != 0.0) f[i] = head(i);
    std::vector<GeoTail> tails;
    cplx pw = poly_eval(wit.p, w);
    if (w == 0.0) {
        if (pw != 0.0) f[wit.N + 1] += pw;
    } else {
        tails.push_back({wit.N + 1, 1, pw, w});
    }
    SpVector fw = SpVector::from_parts(std::move(f), std::move(tails));
    auto Ts = adjoint(wit.T);
    SpVector res = apply(Ts, fw) - w * fw;
    double r_win = vec_norm(to_dense(res, 0, window), PNorm::Lp(2.0));
    double r_full = norm(res, PNorm::Lp(2.0));
    double r = std::max(r_win, r_full);
    if (residual) *residual = r;
    if (!(r < 1e-8)) throw NonConvergence("eval_f_w: eigen-residual above 1e-8");
    return fw;
}

// Rank of the Krylov matrix [x0, T x0, ..., T^{m-1} x0] over rows [0, rows).
inline Index krylov_rank(const StructuredOperator& T, const SpVector& x0, Index m, Index rows,
                         double rel_tol = 1e-10) {
    Mat K(rows, m);
    SpVector y = x0;
    for (Index j = 0; j < m; ++j) {
        K.col(j) = to_dense(y, 0, rows);
        y = apply(T, y);
    }
    Eigen::JacobiSVD<Mat> svd(K);
    const auto& sv = svd.singularValues();
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0)) ++r;
    return r;
}

}  // namespace lplab
