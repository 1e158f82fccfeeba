#pragma once

#include "constructions.hpp"

namespace lplab {

// Norming vectors, absolutely exposing perturbations, evenly distributed blocks and the
// B_{eta,delta} doubling, all on E_N = span{e_0..e_N} with the l_p norm, 1 < p < infinity.

// Extra fixed-point steps after convergence; drives coordinates that should vanish to zero.
inline Vec boyd_polish(const Mat& M, Vec x, double p, int iters) {
    const double q = p / (p - 1.0);
    const PNorm n = PNorm::Lp(p);
    for (int it = 0; it < iters; ++it) {
        Vec w = M.transpose() * duality_dense(M * x, p);
        if (w.cwiseAbs().maxCoeff() == 0.0) break;
        Vec xn = duality_dense(w, q);
        xn /= vec_norm(xn, n);
        if (vec_norm(M * xn, n) < vec_norm(M * x, n) * (1.0 - 1e-12)) break;
        x = xn;
    }
    return x;
}

// min over theta of ||x - e^{i theta} x0||_p
inline double dist_to_circle(const Vec& x, const Vec& x0, double p) {
    const PNorm n = PNorm::Lp(p);
    auto f = [&](double t) { return vec_norm(x - std::polar(1.0, t) * x0, n); };
    double best_t = 0.0, best = f(0.0);
    for (int i = 1; i < 64; ++i) {
        double t = 2.0 * kPi * i / 64.0;
        double v = f(t);
        if (v < best) best = v, best_t = t;
    }
    double a = best_t - 2.0 * kPi / 64.0, b = best_t + 2.0 * kPi / 64.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 80; ++it) {
        double c = b - g * (b - a), d = a + g * (b - a);
        (f(c) < f(d) ? b : a) = (f(c) < f(d) ? d : c);
    }
    return std::min(best, f(0.5 * (a + b)));
}

struct NormingData {
    double value = 0.0;
    Vec x;                      // unit norming vector
    std::vector<Vec> near;      // other near-maximisers found by the multistart
    double spread = 0.0;        // max distance of `near` to the circle through x
};

inline NormingData norming_data(const Mat& M, double p, const BoydOptions& opt = {}, int polish = 300) {
    require(p > 1.0 && std::isfinite(p), "norming_data: 1 < p < inf");
    const PNorm n = PNorm::Lp(p);
    const Index nc = M.cols();
    std::vector<Vec> starts;
    for (Index j = 0; j < nc; ++j) {
        Vec e = Vec::Zero(nc);
        e(j) = 1.0;
        starts.push_back(e);
    }
    {
        Vec v;
        sigma_max(M, &v);
        starts.push_back(v);
    }
    Rng rng(opt.seed ^ 0x9e37u);
    while (static_cast<int>(starts.size()) < std::max<int>(opt.starts, static_cast<int>(nc) + 1)) {
        Vec x(nc);
        for (Index j = 0; j < nc; ++j) x(j) = rng.cnormal();
        starts.push_back(x);
    }
    std::vector<BoydTrace> tr(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        tr[i] = boyd_iterate(M, starts[i], p, opt.max_iter, opt.tol);
        tr[i].x = boyd_polish(M, tr[i].x, p, polish);
        tr[i].value = vec_norm(M * tr[i].x, n);
    });
    std::size_t b = 0;
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i].value > tr[b].value) b = i;
    NormingData d;
    d.value = tr[b].value;
    d.x = tr[b].x;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i == b || tr[i].value < d.value - 1e-9 * std::max(1.0, d.value)) continue;
        d.near.push_back(tr[i].x);
        d.spread = std::max(d.spread, dist_to_circle(tr[i].x, d.x, p));
    }
    return d;
}

// A_delta = A + delta <x0*, .> A x0
inline Mat make_absolutely_exposing(const Mat& A, double delta, double p, double* norm_out = nullptr) {
    require(delta >= 0.0, "make_absolutely_exposing: delta >= 0");
    if (delta == 0.0) {
        if (norm_out) *norm_out = dense_op_norm(A, PNorm::Lp(p)).value;
        return A;
    }
    auto nd = norming_data(A, p);
    require(nd.value > 0.0, "make_absolutely_exposing: A != 0");
    Vec x0 = nd.x;
    Vec x0s = duality_dense(x0, p);  // <x0*, x0> = ||x0||^p = 1
    Mat Ad = A + delta * (A * x0) * x0s.transpose();
    double nAd = norming_data(Ad, p).value;
    if (std::abs(nAd - (1.0 + delta) * nd.value) > 1e-8)
        throw NonConvergence("make_absolutely_exposing: ||A_delta|| != (1+delta)||A||");
    if (!(nAd < 1.0)) throw PreconditionError("make_absolutely_exposing: ||A_delta|| >= 1");
    if (norm_out) *norm_out = nAd;
    return Ad;
}

struct ExposureProbe {
    Index accepted = 0;  // near-norming samples
    double max_dist = 0.0;
};

// Random unit starts pushed up by the fixed-point map; those within tol of the norm are measured
// against the circle through x0.
inline ExposureProbe exposure_probe(const Mat& A, const Vec& x0, double p, Index samples, std::uint64_t seed,
                                    double tol = 1e-6) {
    const PNorm n = PNorm::Lp(p);
    double nA = vec_norm(A * x0, n);
    ExposureProbe pr;
    std::vector<double> d(static_cast<std::size_t>(samples), -1.0);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t s) {
        Rng rng = Rng(seed).split(s);
        Vec x(A.cols());
        for (Index j = 0; j < A.cols(); ++j) x(j) = rng.cnormal();
        auto t = boyd_iterate(A, x, p, 2000, 1e-15);
        if (t.value >= nA - tol) d[s] = dist_to_circle(t.x, x0, p);
    });
    for (double v : d)
        if (v >= 0.0) {
            ++pr.accepted;
            pr.max_dist = std::max(pr.max_dist, v);
        }
    return pr;
}

struct EvenDistribution {
    bool even = false;
    Vec x1;
    double gamma = 0.0;  // min_j |<e_j*, B x1>|
    double min_x = 0.0;  // min_j |<e_j*, x1>|
    double norm = 0.0;
};

inline EvenDistribution check_evenly_distributed(const Mat& B, double p, double tol = 1e-10) {
    auto nd = norming_data(B, p);
    if (nd.spread > 1e-3)
        throw ExposednessUndetermined("check_evenly_distributed: far-apart near-norming vectors");
    EvenDistribution e;
    e.x1 = nd.x;
    e.norm = nd.value;
    e.min_x = nd.x.cwiseAbs().minCoeff();
    e.gamma = (B * nd.x).cwiseAbs().minCoeff();
    e.even = e.min_x > tol && e.gamma > tol;
    return e;
}

// Jitter + absolutely exposing perturbation until the result is evenly distributed.
inline Mat make_evenly_distributed(const Mat& A, double p, Rng& rng, int attempts = 100, double jitter = 1e-2,
                                   int* used = nullptr) {
    const double nA = dense_op_norm(A, PNorm::Lp(p)).value;
    require(nA > 0.0 && nA < 1.0, "make_evenly_distributed: 0 < ||A|| < 1");
    for (int t = 0; t < attempts; ++t) {
        Mat J = A;
        for (Index i = 0; i < A.rows(); ++i)
            for (Index j = 0; j < A.cols(); ++j) J(i, j) += jitter * nA * rng.cnormal();
        double nJ = dense_op_norm(J, PNorm::Lp(p)).value;
        J *= nA / nJ;
        double delta = std::min(0.1, 0.5 * (1.0 / nA - 1.0));
        try {
            Mat E = make_absolutely_exposing(J, delta, p);
            if (check_evenly_distributed(E, p).even) {
                if (used) *used = t + 1;
                return E;
            }
        } catch (const ExposednessUndetermined&) {
        } catch (const NonConvergence&) {
        }
    }
    throw SearchExhausted("make_evenly_distributed: no evenly distributed perturbation found", attempts);
}

struct BEtaDelta {
    Mat B;
    double delta = 0.0;
    double eta = 0.0;
    Vec u0;
    double norm = 0.0;        // computed ||B||
    double closed_form = 0.0; // (1+eta^p)^{1/p} (1+delta^p')^{1/p'} ||A||
    double norm_u0 = 0.0;     // ||B u0||
    EvenDistribution even;
};

// B = [[A, delta A], [eta A, eta delta A]] on E_{2N+1} = E_N (+) S_N E_N.
inline BEtaDelta build_B_eta_delta(const Mat& A, double eta, double p) {
    require(A.rows() == A.cols(), "build_B_eta_delta: square block");
    require(p > 1.0 && std::isfinite(p) && eta > 0.0, "build_B_eta_delta: 1 < p < inf, eta > 0");
    const double q = p / (p - 1.0);
    const PNorm n = PNorm::Lp(p);
    auto ea = check_evenly_distributed(A, p);
    if (!(ea.norm < 1.0)) throw PreconditionError("build_B_eta_delta: ||A|| < 1 required");
    if (!ea.even) throw PreconditionError("build_B_eta_delta: A not evenly distributed");
    const double s = std::pow(1.0 + std::pow(eta, p), 1.0 / p);
    if (!(s * ea.norm < 1.0)) throw PreconditionError("build_B_eta_delta: (1+eta^p)^{1/p}||A|| >= 1");
    BEtaDelta out;
    out.eta = eta;
    out.delta = std::pow(std::pow(1.0 / (ea.norm * s), q) - 1.0, 1.0 / q);
    const Index d = A.rows();
    out.B = Mat::Zero(2 * d, 2 * d);
    out.B.topLeftCorner(d, d) = A;
    out.B.topRightCorner(d, d) = out.delta * A;
    out.B.bottomLeftCorner(d, d) = eta * A;
    out.B.bottomRightCorner(d, d) = eta * out.delta * A;
    out.u0 = Vec::Zero(2 * d);
    out.u0.head(d) = ea.x1;
    out.u0.tail(d) = std::pow(out.delta, q - 1.0) * ea.x1;
    out.u0 /= std::pow(1.0 + std::pow(out.delta, q), 1.0 / p);
    out.closed_form = s * std::pow(1.0 + std::pow(out.delta, q), 1.0 / q) * ea.norm;
    out.norm = norming_data(out.B, p).value;
    out.norm_u0 = vec_norm(out.B * out.u0, n) / vec_norm(out.u0, n);
    if (std::abs(out.norm - 1.0) > 1e-6) throw NonConvergence("build_B_eta_delta: ||B|| != 1");
    if (std::abs(out.norm_u0 - 1.0) > 1e-9) throw NonConvergence("build_B_eta_delta: ||B u0|| != 1");
    out.even = check_evenly_distributed(out.B, p);
    return out;
}

inline double kan_constant(double p) {
    require(p > 2.0, "kan_constant: p > 2");
    return std::pow(2.0 * p / (p - 2.0), (p - 2.0) / p);
}

// delta from the localisation estimate; B acts on E_M, which has B.rows() = M+1 coordinates.
inline double delta_for_B(const Mat& B, double eps, double p, double gamma) {
    require(p > 2.0, "delta_for_B: p > 2");
    require(eps > 0.0 && gamma > 0.0, "delta_for_B: eps, gamma > 0");
    const double K = kan_constant(p);
    const double dim = static_cast<double>(B.rows());
    double base = eps / (std::sqrt(K) * std::pow(dim, 1.0 / p) * std::pow(2.0 / gamma, (p - 2.0) / 2.0));
    return std::min(gamma / 2.0, std::pow(base, 2.0 * p / (p - 2.0)));
}

}  // namespace lplab
