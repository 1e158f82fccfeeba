#pragma once

#include <functional>

#include "spectral.hpp"

namespace lplab {

// ---------------------------------------------------------------------------
// small weights for S_{A,omega}

struct WeightDelta {
    double delta = 0.0;
    double c1 = 0.0, c2 = 0.0;
    int widenings = 0;
};

// (a+b)^p <= a^p + c1 b^p + c2 a^{p-1} b on the grid [0, hi]^2.
inline bool split_constants_valid(double p, double c1, double c2, double hi = 10.0, double h = 1e-2) {
    const int n = static_cast<int>(std::lround(hi / h));
    for (int i = 0; i <= n; ++i) {
        double a = i * h;
        double ap = std::pow(a, p), ap1 = std::pow(a, p - 1.0);
        for (int j = 0; j <= n; ++j) {
            double b = j * h;
            double lhs = std::pow(a + b, p);
            double rhs = ap + c1 * std::pow(b, p) + c2 * ap1 * b;
            if (lhs > rhs * (1.0 + 1e-12) + 1e-300) return false;
        }
    }
    return true;
}

inline WeightDelta small_weight_delta_full(double eps, double normA, double p) {
    require(eps > 0.0 && p > 1.0 && normA >= 0.0, "small_weight_delta: eps > 0, p > 1");
    WeightDelta w;
    w.c1 = std::pow(2.0, p - 1.0);
    w.c2 = p * std::pow(2.0, p - 1.0);
    while (!split_constants_valid(p, w.c1, w.c2)) {
        w.c1 *= 2.0;
        w.c2 *= 2.0;
        require(++w.widenings < 20, "small_weight_delta: constants never validated");
    }
    const double target = std::pow(eps, p);
    auto g = [&](double d) { return (w.c1 + 1.0) * std::pow(d, p) + w.c2 * std::pow(normA, p - 1.0) * d; };
    double lo = 0.0, hi = 1.0;
    while (g(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (g(mid) < target ? lo : hi) = mid;
    }
    w.delta = 0.99 * lo;
    return w;
}

inline double small_weight_delta(double eps, double normA, double p) {
    return small_weight_delta_full(eps, normA, p).delta;
}

// ---------------------------------------------------------------------------
// l1 co-isometries

namespace detail {

inline StructuredOperator compress_columns(const StructuredOperator& A, Index N, PNorm n) {
    StructuredOperator T = StructuredOperator::zero(n);
    for (Index j = 0; j <= N; ++j) {
        T.block.cols[j];
        auto col = A.column(j);
        for (auto& [r, v] : col.entries())
            if (r >= 0 && r <= N) T.block.add(r, j, v);
    }
    return T;
}

}  // namespace detail

// T_N = P_N A P_N + B_N (I - P_N), B_N e_{N+1+k} = e_k.
inline StructuredOperator build_coisometry_l1(const StructuredOperator& A, Index N) {
    require(N >= 0, "build_coisometry_l1: N >= 0");
    double nA = column_l1_sup(A);
    if (nA > 1.0 + 1e-12) throw PreconditionError("build_coisometry_l1: ||A||_1 > 1");
    auto T = detail::compress_columns(A, N, PNorm::Lp(1.0));
    T.rules.push_back({N + 1, 1, -1, {{RowMap::affine(1, -(N + 1)), 1.0, 0.0, 0.0}}});
    return T;
}

// eps_n = c rho^n
struct GeometricEps {
    double c = 0.25, rho = 0.5;
    double operator()(Index n) const { return c * std::pow(rho, static_cast<double>(n)); }
};

inline bool in_T1(const StructuredOperator& T, Index upto, double tol = 0.0) {
    for (Index j = 0; j < upto; ++j) {
        auto col = T.column(j);
        if (col.has_tail()) return false;
        for (auto& [r, v] : col.entries())
            if (r > j + 1 || r < 0) return false;
        cplx s = col.get(j + 1);
        if (!(s.real() > tol) || std::abs(s.imag()) > 0.0) return false;
    }
    return true;
}

// T_N = P_N A P_N + eps_0 e_N* (x) e_{N+1} + B~_N (I - P_N) with
// B~_N e_{N+1+k} = (1 - eps_{1+k}) e_{phi(k)} + eps_{1+k} e_{N+2+k}, phi the diagonal enumeration.
inline StructuredOperator build_T1_coisometry_l1(const StructuredOperator& A, Index N, GeometricEps eps) {
    require(N >= 0, "build_T1_coisometry_l1: N >= 0");
    require(eps.c > 0.0 && eps.rho > 0.0 && eps.rho < 1.0, "build_T1_coisometry_l1: eps_n = c rho^n, 0 < rho < 1");
    double nA = column_l1_sup(A);
    if (!(nA < 1.0)) throw PreconditionError("build_T1_coisometry_l1: ||A|| < 1 required");
    if (nA + eps.c > 1.0) throw PreconditionError("build_T1_coisometry_l1: ||A|| + eps_n <= 1 required");
    if (!in_T1(A, N + 1)) throw PreconditionError("build_T1_coisometry_l1: A not in T1");
    auto T = detail::compress_columns(A, N, PNorm::Lp(1.0));
    T.block.add(N + 1, N, eps(0));
    const double c1 = eps.c * eps.rho;
    T.rules.push_back({N + 1, 1, -1,
                       {{RowMap::enumeration(0), 1.0, -c1, eps.rho}, {RowMap::affine(1, 1), 0.0, c1, eps.rho}}});
    return T;
}

// sup_j |<x*, T e_j>| over columns j <= max_col.
inline double dual_norm_by_columns(const StructuredOperator& T, const SpVector& xs, Index max_col) {
    double s = 0.0;
    for (Index j = 0; j <= max_col; ++j) s = std::max(s, std::abs(pair(xs, T.column(j))));
    return s;
}

// ---------------------------------------------------------------------------
// D_q witnesses on l1 and the kernel greedy

using IndexSeq = std::function<Index(Index)>;

struct DqWitness {
    StructuredOperator T;
    std::vector<std::vector<Index>> sigma;  // enumerated Sigma_q
    std::vector<Index> fresh;               // i_k, one per sigma_k
    Index q = 0, r = 0;
};

inline DqWitness dq_witness(const StructuredOperator& T0, Index q, const std::vector<double>& alpha,
                            const IndexSeq& Nseq, Index r) {
    require(q >= 0 && r >= q, "dq_witness: r >= q >= 0");
    require(static_cast<Index>(alpha.size()) >= q + 2, "dq_witness: alpha too short");
    require(alpha[0] == 1.0 && alpha[1] == 1.0, "dq_witness: alpha_0 = alpha_1 = 1");
    for (double a : alpha) require(a > 0.0, "dq_witness: alpha positive");
    require(Nseq(0) == 0, "dq_witness: N_0 = 0");
    for (Index i = 1; i <= r; ++i) require(Nseq(i) > Nseq(i - 1), "dq_witness: N strictly increasing");
    require(column_l1_sup(T0) <= 1.0 + 1e-12, "dq_witness: ||T0|| <= 1");

    // dense images of T0 e_{N_i}, i <= q, over their joint support
    std::map<Index, Index> rowpos;
    std::vector<SpVector> cols;
    for (Index i = 0; i <= q; ++i) {
        cols.push_back(T0.column(Nseq(i)));
        for (auto& [rr, v] : cols.back().entries()) rowpos.emplace(rr, 0);
    }
    std::vector<Index> rows;
    for (auto& [rr, pos] : rowpos) {
        pos = static_cast<Index>(rows.size());
        rows.push_back(rr);
    }
    const Index nr = static_cast<Index>(rows.size());
    std::vector<Vec> dense;
    for (auto& c : cols) {
        Vec v = Vec::Zero(nr);
        for (auto& [rr, x] : c.entries()) v(rowpos[rr]) = x;
        dense.push_back(v);
    }

    DqWitness out;
    out.q = q;
    out.r = r;
    std::vector<Index> tuple;
    std::vector<Vec> sums;  // sums[l] = T0(sum_{j<=l} alpha_j e_{N_{i_j}})
    std::vector<Vec> images;
    std::function<void(Index)> dfs = [&](Index from) {
        for (Index i = from; i <= q; ++i) {
            const std::size_t l = tuple.size();
            Vec s = (l == 0 ? Vec::Zero(nr) : sums.back()) + alpha[l] * dense[static_cast<std::size_t>(i)];
            tuple.push_back(i);
            sums.push_back(s);
            if (s.cwiseAbs().sum() <= alpha[l + 1]) {
                out.sigma.push_back(tuple);
                images.push_back(s);
            }
            if (static_cast<Index>(tuple.size()) + 1 < static_cast<Index>(alpha.size())) dfs(i + 1);
            tuple.pop_back();
            sums.pop_back();
        }
    };
    dfs(0);

    StructuredOperator T = StructuredOperator::zero(PNorm::Lp(1.0));
    const Index Nr = Nseq(r);
    for (Index n = 0; n <= Nr; ++n) {
        auto col = T0.column(n);
        require(!col.has_tail(), "dq_witness: T0 columns must be finitely supported");
        T.block.cols[n];
        for (auto& [rr, v] : col.entries()) T.block.add(rr, n, v);
    }
    for (std::size_t k = 0; k < out.sigma.size(); ++k) {
        Index ik = r + 1 + static_cast<Index>(k);
        out.fresh.push_back(ik);
        Index col = Nseq(ik);
        require(col > Nr, "dq_witness: N not increasing past N_r");
        double a = alpha[out.sigma[k].size()];
        T.block.cols[col];
        for (Index t = 0; t < nr; ++t) T.block.add(rows[static_cast<std::size_t>(t)], col, -images[k](t) / a);
    }
    out.T = std::move(T);
    return out;
}

struct KernelTrace {
    std::vector<Index> indices;  // i_0 < i_1 < ...
    std::vector<double> norms;   // ||T(sum_{j<=l} alpha_j e_{N_{i_j}})||
    SpVector partial;
};

inline KernelTrace kernel_vector_greedy(const StructuredOperator& T, const std::vector<double>& alpha,
                                        const IndexSeq& Nseq, Index max_l, Index search_cap) {
    require(static_cast<Index>(alpha.size()) >= max_l + 2, "kernel_vector_greedy: alpha too short");
    require(Nseq(0) == 0, "kernel_vector_greedy: N_0 = 0");
    const PNorm n = PNorm::Lp(1.0);
    KernelTrace tr;
    SpVector img = alpha[0] * T.column(0);
    if (!(norm(img, n) <= alpha[1])) throw SearchExhausted("kernel_vector_greedy: ||T e_0|| > alpha_1", 0);
    tr.indices.push_back(0);
    tr.norms.push_back(norm(img, n));
    tr.partial = SpVector::basis(0, alpha[0]);
    for (Index l = 1; l <= max_l; ++l) {
        bool found = false;
        for (Index i = tr.indices.back() + 1; i <= search_cap; ++i) {
            SpVector cand = img + alpha[l] * T.column(Nseq(i));
            double v = norm(cand, n);
            if (v < alpha[l + 1]) {
                img = cand;
                tr.indices.push_back(i);
                tr.norms.push_back(v);
                tr.partial = tr.partial + SpVector::basis(Nseq(i), alpha[l]);
                found = true;
                break;
            }
        }
        if (!found) throw SearchExhausted("kernel_vector_greedy: no admissible index within the cap", l);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// injectivity witnesses (l_p with p > 2, and c0)

struct InjectivityWitness {
    StructuredOperator A;
    double eps = 0.0, delta1 = 0.0, delta2 = 0.0;
    Index N = 0, M = 0, r1 = 0, r2 = 0, k = 0;
    double norm = 0.0;
    double slack_i = 0.0;   // eps 10^{-(k+1)} minus the tail row norms
    double slack_ii = 0.0;  // min over the sample of lhs - rhs in (ii)
    Index samples = 0;
};

// |u+v|^p + |u-v|^p vs 2|u|^p + p|u|^{p-2}|v|^2: strict > for p > 2, strict < for 0 < p < 2.
inline bool kan_check(cplx u, cplx v, double p) {
    require(p > 0.0 && p != 2.0, "kan_check: p in (0,2) or (2,inf)");
    double au = std::abs(u), av = std::abs(v);
    double lhs = std::pow(std::abs(u + v), p) + std::pow(std::abs(u - v), p);
    if (p > 2.0) {
        require(av > 0.0, "kan_check: v != 0");
        return lhs > 2.0 * std::pow(au, p) + p * std::pow(au, p - 2.0) * av * av;
    }
    require(au > 0.0, "kan_check: u != 0");
    return lhs < 2.0 * std::pow(au, p) + p * std::pow(au, p - 2.0) * av * av;
}

namespace detail {

inline Mat injectivity_matrix(const Mat& B, Index N, Index M, double eps, Index k, double dN1, double dN2,
                              double scale) {
    Mat A = Mat::Zero(M + 3, N + 1);
    for (Index j = 0; j < N; ++j)
        for (Index i = 0; i < B.rows(); ++i) A(i, j) = scale * B(i, j);
    A(M + 1, k) += eps;
    A(M + 1, N) = dN1;
    A(M + 2, N) = dN2;
    return A;
}

inline double injectivity_slack_ii(const InjectivityWitness& w, const Mat& A, const PNorm& n, Rng& rng,
                                   Index nsamples, Index* count) {
    const Index d = w.N + 1;
    const double margin = w.eps * std::pow(10.0, -static_cast<double>(w.k + 1));
    double worst = std::numeric_limits<double>::infinity();
    auto eval = [&](Vec x) {
        double nx = vec_norm(x, n);
        if (nx > 1.0) x /= nx;
        Vec y = A * x;
        double s1 = std::abs(y(w.r1)) - (std::abs(w.eps * x(w.k)) - std::abs(w.delta1 * x(w.N)) - margin);
        double s2 = std::abs(y(w.r2)) - (std::abs(w.delta2 * x(w.N)) - margin);
        worst = std::min({worst, s1, s2});
        ++*count;
    };
    // extremal structure: e_k, e_N, and the combinations cancelling row r1
    for (cplx ph : {cplx(1.0), cplx(-1.0), cplx(0.0, 1.0)}) {
        Vec x = Vec::Zero(d);
        x(w.k) = 1.0;
        eval(x);
        x(w.N) = ph;
        eval(x);
        x(w.N) = -ph * w.eps / std::max(w.delta1, 1e-300);
        eval(x);
        Vec e = Vec::Zero(d);
        e(w.N) = ph;
        eval(e);
    }
    for (Index s = 0; s < nsamples; ++s) {
        Vec x(d);
        for (Index i = 0; i < d; ++i) x(i) = rng.cnormal();
        x /= vec_norm(x, n);
        x *= std::pow(rng.uniform(), 0.25);
        eval(x);
    }
    return worst;
}

}  // namespace detail

// A differs from B on e_k and e_N only; delta1, delta2 witness the A_k conditions at r1 = M+1, r2 = M+2.
inline InjectivityWitness build_injectivity_witness(const Mat& B, Index N, Index M, double eps, Index k,
                                                    const PNorm& space, std::uint64_t seed = 1,
                                                    Index nsamples = 4000) {
    require(space.is_c0() || space.p > 2.0, "build_injectivity_witness: l_p with p > 2, or c0");
    require(k >= 0 && N > k && M >= 0, "build_injectivity_witness: N > k >= 0");
    require(eps > 0.0 && eps < 0.25, "build_injectivity_witness: 0 < eps < 1/4");
    require(B.rows() <= M + 1 && B.cols() >= N, "build_injectivity_witness: range(B) in E_M, B defined on E_{N-1}");
    Mat Bn = B.leftCols(N);
    if (!(dense_op_norm(Bn, space).value < 1.0))
        throw PreconditionError("build_injectivity_witness: ||B|| < 1 required");

    InjectivityWitness w;
    w.eps = eps;
    w.N = N;
    w.M = M;
    w.k = k;
    w.r1 = M + 1;
    w.r2 = M + 2;
    Mat A;
    if (space.is_c0()) {
        A = detail::injectivity_matrix(B, N, M, eps, k, 1.0 - eps, 1.0, 1.0);
        w.delta1 = 1.0 - eps;
        w.delta2 = 1.0;
        w.norm = max_row_l1(A);
    } else {
        auto normA = [&](double d) {
            return dense_op_norm(detail::injectivity_matrix(B, N, M, eps, k, d, d, 1.0 - 2.0 * eps), space).value;
        };
        double lo = 0.0, hi = 1.0;
        if (!(normA(lo) < 1.0)) throw NonConvergence("build_injectivity_witness: ||A|| >= 1 at delta = 0");
        while (normA(hi) < 1.0) hi *= 2.0;
        for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
            double mid = 0.5 * (lo + hi);
            (normA(mid) < 1.0 ? lo : hi) = mid;
        }
        double d = std::abs(normA(lo) - 1.0) <= std::abs(normA(hi) - 1.0) ? lo : hi;
        A = detail::injectivity_matrix(B, N, M, eps, k, d, d, 1.0 - 2.0 * eps);
        w.delta1 = w.delta2 = d;
        w.norm = dense_op_norm(A, space).value;
        if (std::abs(w.norm - 1.0) > 1e-8) throw NonConvergence("build_injectivity_witness: root-find missed ||A|| = 1");
    }
    w.A = StructuredOperator::from_dense(A, space);

    // (i): A P_(N,inf) = 0 structurally; measured on the rows' entries past column N
    const double margin = eps * std::pow(10.0, -static_cast<double>(k + 1));
    double tail = 0.0;
    for (auto& [c, col] : w.A.block.cols)
        if (c > N)
            for (auto& [r, v] : col)
                if (r == w.r1 || r == w.r2) tail = std::max(tail, std::abs(v));
    require(w.A.rules.empty(), "build_injectivity_witness: unexpected rules");
    w.slack_i = margin - tail;
    Rng rng(seed);
    w.slack_ii = detail::injectivity_slack_ii(w, A, space, rng, nsamples, &w.samples);
    if (!(w.slack_i > 0.0) || !(w.slack_ii > 0.0))
        throw PreconditionError("build_injectivity_witness: witness conditions fail");
    return w;
}

}  // namespace lplab
