#pragma once

#include "op_norm.hpp"

namespace lplab {

// Coefficients in ascending order: c[0] + c[1] z + ...
using Poly = std::vector<cplx>;

inline Poly poly_trim(Poly a, double tol = 0.0) {
    while (a.size() > 1 && std::abs(a.back()) <= tol) a.pop_back();
    if (a.empty()) a.push_back(0.0);
    return a;
}

inline cplx poly_eval(const Poly& a, cplx z) {
    cplx s = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) s = s * z + *it;
    return s;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
    Poly c(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) c[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) c[i] += b[i];
    return c;
}

inline Poly poly_scale(const Poly& a, cplx s) {
    Poly c = a;
    for (auto& x : c) x *= s;
    return c;
}

inline Poly poly_sub(const Poly& a, const Poly& b) { return poly_add(a, poly_scale(b, -1.0)); }

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {0.0};
    Poly c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

inline Poly poly_from_roots(const std::vector<cplx>& roots) {
    Poly p{1.0};
    for (auto r : roots) p = poly_mul(p, {-r, 1.0});
    return p;
}

// a = q b + r with deg r < deg b
inline std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b) {
    Poly bt = poly_trim(b);
    require(!(bt.size() == 1 && bt[0] == 0.0), "poly_divmod: division by zero polynomial");
    Poly r = a;
    const std::size_t db = bt.size() - 1;
    if (r.size() <= db) return {{0.0}, poly_trim(r)};
    Poly q(r.size() - db, 0.0);
    for (std::size_t k = q.size(); k-- > 0;) {
        cplx c = r[k + db] / bt.back();
        q[k] = c;
        for (std::size_t j = 0; j <= db; ++j) r[k + j] -= c * bt[j];
    }
    r.resize(std::max<std::size_t>(db, 1));
    return {q, r};
}

// Unique polynomial of degree < n through (nodes[i], values[i]).
inline Poly lagrange(const std::vector<cplx>& nodes, const std::vector<cplx>& values) {
    require(nodes.size() == values.size() && !nodes.empty(), "lagrange: matching non-empty inputs");
    Poly s{0.0};
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        Poly l{1.0};
        cplx den = 1.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (k == n) continue;
            l = poly_mul(l, {-nodes[k], 1.0});
            den *= nodes[n] - nodes[k];
        }
        require(den != 0.0, "lagrange: repeated node");
        s = poly_add(s, poly_scale(l, values[n] / den));
    }
    return s;
}

inline double poly_coeff_norm(const Poly& a) {
    double s = 0.0;
    for (auto c : a) s = std::max(s, std::abs(c));
    return s;
}

// p(T) x by Horner
inline SpVector poly_apply(const StructuredOperator& T, const Poly& a, const SpVector& x) {
    SpVector y;
    for (auto it = a.rbegin(); it != a.rend(); ++it) y = apply(T, y) + (*it) * x;
    return y;
}

// ---------------------------------------------------------------------------
// Rudin-Shapiro

inline constexpr int kMaxRudinShapiro = 20;

inline std::vector<int> rudin_shapiro(int k, std::vector<int>* q_out = nullptr) {
    require(k >= 0 && k <= kMaxRudinShapiro, "rudin_shapiro: 0 <= k <= 20");
    std::vector<int> P{1}, Q{1};
    for (int j = 0; j < k; ++j) {
        std::vector<int> P2(P), Q2(P);
        P2.insert(P2.end(), Q.begin(), Q.end());
        for (int c : Q) Q2.push_back(-c);
        P.swap(P2);
        Q.swap(Q2);
    }
    if (q_out) *q_out = Q;
    return P;
}

// (P_k(z), Q_k(z)) in O(k) from the recursion
inline std::pair<cplx, cplx> rudin_shapiro_eval(int k, cplx z) {
    cplx P = 1.0, Q = 1.0, zp = z;
    for (int j = 0; j < k; ++j) {
        cplx Pn = P + zp * Q, Qn = P - zp * Q;
        P = Pn;
        Q = Qn;
        zp *= zp;
    }
    return {P, Q};
}

inline double rudin_shapiro_sup_sample(int k, int points = 4096) {
    double s = 0.0;
    for (int i = 0; i < points; ++i)
        s = std::max(s, std::abs(rudin_shapiro_eval(k, std::polar(1.0, 2.0 * kPi * i / points)).first));
    return s;
}

struct ShiftPolyGap {
    double column = 0.0;  // ||p_d(S) e_0||_p via the structured shift
    double sup = 0.0;     // sampled sup of |p_d| on the circle
    double ratio = 0.0;   // column / sup
    double floor = 0.0;   // (1/sqrt2) (d+1)^{1/p - 1/2}
    Index degree = 0;
};

inline ShiftPolyGap shift_poly_gap(double p, int k, int points = 4096) {
    require(p >= 1.0 && p < 2.0, "shift_poly_gap: 1 <= p < 2");
    auto c = rudin_shapiro(k);
    Poly a(c.begin(), c.end());
    ShiftPolyGap g;
    g.degree = static_cast<Index>(c.size()) - 1;
    auto S = StructuredOperator::forward_shift(PNorm::Lp(p));
    g.column = norm(poly_apply(S, a, SpVector::basis(0)), PNorm::Lp(p));
    g.sup = rudin_shapiro_sup_sample(k, points);
    g.ratio = g.column / g.sup;
    g.floor = std::pow(static_cast<double>(g.degree + 1), 1.0 / p - 0.5) / std::sqrt(2.0);
    if (!(g.ratio >= g.floor)) throw PreconditionError("shift_poly_gap: sampled ratio below the analytic floor");
    return g;
}

}  // namespace lplab
