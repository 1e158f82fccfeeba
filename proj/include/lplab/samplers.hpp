#pragma once

#include "constructions.hpp"

namespace lplab {

// Random inputs shared by the test suites, the acceptance battery and verify-all.

inline Mat random_dense(Rng& rng, Index r, Index c) {
    Mat M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = rng.cnormal();
    return M;
}

inline Mat random_real(Rng& rng, Index r, Index c) {
    Mat M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = rng.normal();
    return M;
}

// Columns rescaled to l1 norm uniform in [lo, hi].
inline Mat random_l1_columns(Rng& rng, Index r, Index c, double lo, double hi) {
    Mat M = random_dense(rng, r, c);
    for (Index j = 0; j < c; ++j) M.col(j) *= rng.uniform(lo, hi) / M.col(j).cwiseAbs().sum();
    return M;
}

inline Mat scaled_to_norm(const Mat& M, const PNorm& n, double target) {
    return M * (target / dense_op_norm(M, n).value);
}

// (n+1) x n, supported on i <= j+1 with positive subdiagonal, column l1 norms equal to `norm`.
inline Mat random_T1_l1_block(Rng& rng, Index n, double norm) {
    Mat M = Mat::Zero(n + 1, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i <= j; ++i) M(i, j) = rng.cnormal();
        M(j + 1, j) = rng.uniform(0.2, 1.0);
        M.col(j) *= norm / M.col(j).cwiseAbs().sum();
    }
    return M;
}

// D x D real upper Hessenberg with positive subdiagonal, scaled to spectral norm `norm`.
inline Mat random_T1_real(Rng& rng, Index D, double norm = 1.0) {
    Mat M = Mat::Zero(D, D);
    for (Index j = 0; j < D; ++j) {
        for (Index i = 0; i <= j; ++i) M(i, j) = rng.normal();
        if (j + 1 < D) M(j + 1, j) = rng.uniform(0.2, 1.0);
    }
    return M * (norm / sigma_max(M));
}

// (N+2) x (N+1) real block in T1, as taken by build_commutant_witness.
inline Mat random_commutant_block(Rng& rng, Index N) {
    Mat B = Mat::Zero(N + 2, N + 1);
    for (Index j = 0; j <= N; ++j) {
        for (Index i = 0; i <= j; ++i) B(i, j) = 0.5 * rng.normal();
        B(j + 1, j) = rng.uniform(0.3, 0.8);
    }
    return B;
}

inline Mat random_contraction(Rng& rng, Index d, const PNorm& n, double norm = 1.0) {
    return scaled_to_norm(random_dense(rng, d, d), n, norm);
}

// T0 for the kernel greedy: columns 0..ncols-1 with three entries in rows [0, rows), l1 norms in (1/2, 1].
inline StructuredOperator random_dq_seed(Rng& rng, Index ncols, Index rows) {
    auto T = StructuredOperator::zero(PNorm::Lp(1.0));
    for (Index j = 0; j < ncols; ++j) {
        T.block.cols[j];
        std::map<Index, cplx> c;
        while (c.size() < 3) c[rng.uniform_int(0, rows - 1)] = rng.cnormal();
        double s = 0.0;
        for (auto& [r, v] : c) s += std::abs(v);
        double target = rng.uniform(0.5 + 1e-9, 1.0);
        for (auto& [r, v] : c) T.block.add(r, j, v * target / s);
    }
    return T;
}

inline std::vector<double> halving_alpha(Index n) {
    std::vector<double> a(static_cast<std::size_t>(n), 1.0);
    for (Index j = 2; j < n; ++j) a[static_cast<std::size_t>(j)] = std::ldexp(1.0, static_cast<int>(1 - j));
    return a;
}

}  // namespace lplab
