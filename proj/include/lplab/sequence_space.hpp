#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace lplab {

// {start + m*step : 0 <= m < count}; count < 0 means unbounded.
struct Progression {
    Index start = 0;
    Index step = 1;
    Index count = -1;

    bool infinite() const { return count < 0; }
    Index at(Index m) const { return start + m * step; }
    // Smallest and largest member; the unbounded side is clamped to the int64 range.
    Index lo() const {
        if (step > 0) return start;
        return infinite() ? std::numeric_limits<Index>::min() : start + (count - 1) * step;
    }
    Index hi() const {
        if (step < 0) return start;
        return infinite() ? std::numeric_limits<Index>::max() : start + (count - 1) * step;
    }
    bool contains(Index j) const {
        Index d = j - start;
        if (d % step != 0) return false;
        Index m = d / step;
        return m >= 0 && (infinite() || m < count);
    }
    Index index_of(Index j) const { return (j - start) / step; }
};

namespace detail {

inline Index floor_div(Index a, Index b) {
    Index q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline Index mod_pos(Index a, Index m) {
    Index r = a % m;
    return r < 0 ? r + m : r;
}

// Solve x = r1 mod m1, x = r2 mod m2. Returns (x0, lcm) or nullopt.
inline std::optional<std::pair<Index, Index>> crt(Index r1, Index m1, Index r2, Index m2) {
    Index g = std::gcd(m1, m2);
    if (mod_pos(r2 - r1, g) != 0) return std::nullopt;
    // extended Euclid on (m1/g, m2/g)
    __int128 a = m1 / g, b = m2 / g, x0 = 1, x1 = 0, aa = a, bb = b;
    while (bb != 0) {
        __int128 q = aa / bb;
        __int128 t = aa - q * bb;
        aa = bb;
        bb = t;
        t = x0 - q * x1;
        x0 = x1;
        x1 = t;
    }
    __int128 l = static_cast<__int128>(m1) / g * m2;
    __int128 k = (static_cast<__int128>(r2 - r1) / g) * x0 % b;
    __int128 x = r1 + static_cast<__int128>(m1) * k;
    x %= l;
    if (x < 0) x += l;
    return std::make_pair(static_cast<Index>(x), static_cast<Index>(l));
}

}  // namespace detail

// Intersection as a sub-progression enumerated in p's direction.
inline std::optional<Progression> intersect(const Progression& p, const Progression& q) {
    Index ap = std::abs(p.step), aq = std::abs(q.step);
    auto c = detail::crt(detail::mod_pos(p.start, ap), ap, detail::mod_pos(q.start, aq), aq);
    if (!c) return std::nullopt;
    auto [x0, L] = *c;
    Index lo = std::max(p.lo(), q.lo());
    Index hi = std::min(p.hi(), q.hi());
    if (lo > hi) return std::nullopt;
    const Index kMin = std::numeric_limits<Index>::min(), kMax = std::numeric_limits<Index>::max();
    Progression r;
    if (p.step > 0) {
        if (lo == kMin) throw PreconditionError("intersect: unbounded below in forward direction");
        Index first = lo + detail::mod_pos(x0 - lo, L);
        if (first > hi) return std::nullopt;
        r.start = first;
        r.step = L;
        r.count = (hi == kMax) ? -1 : (hi - first) / L + 1;
    } else {
        if (hi == kMax) throw PreconditionError("intersect: unbounded above in backward direction");
        Index first = hi - detail::mod_pos(hi - x0, L);
        if (first < lo) return std::nullopt;
        r.start = first;
        r.step = -L;
        r.count = (lo == kMin) ? -1 : (first - lo) / L + 1;
    }
    return r;
}

// coeff * ratio^m at index start + m*step, m >= 0, with |ratio| < 1.
struct GeoTail {
    Index start = 0;
    Index step = 1;
    cplx coeff{0.0};
    cplx ratio{0.0};

    Progression prog() const { return {start, step, -1}; }
    cplx value_at_m(Index m) const { return coeff * std::pow(ratio, static_cast<double>(m)); }
};

inline constexpr Index kMaterializeCap = 10'000'000;

// Index sets accepted by project().
struct IndexSet {
    enum class Kind { Finite, Interval, Complement, RayAbove, RayBelow };
    Kind kind = Kind::Finite;
    std::set<Index> points;
    Index a = 0, b = 0;

    static IndexSet finite(std::set<Index> s) { return {Kind::Finite, std::move(s), 0, 0}; }
    static IndexSet interval(Index lo, Index hi) { return {Kind::Interval, {}, lo, hi}; }
    static IndexSet complement(std::set<Index> s) { return {Kind::Complement, std::move(s), 0, 0}; }
    // (N, inf) and (-inf, N)
    static IndexSet above(Index n) { return {Kind::RayAbove, {}, n, 0}; }
    static IndexSet below(Index n) { return {Kind::RayBelow, {}, n, 0}; }

    bool contains(Index j) const {
        switch (kind) {
            case Kind::Finite: return points.count(j) > 0;
            case Kind::Interval: return j >= a && j <= b;
            case Kind::Complement: return points.count(j) == 0;
            case Kind::RayAbove: return j > a;
            case Kind::RayBelow: return j < a;
        }
        return false;
    }
};

// Sparse complex sequence: finitely many explicit entries plus pairwise disjoint
// geometric tails. Explicit entries override tail values at their index.
class SpVector {
public:
    SpVector() = default;

    static SpVector basis(Index j, cplx v = 1.0) {
        SpVector x;
        if (v != 0.0) x.entries_[j] = v;
        return x;
    }
    static SpVector geometric(Index start, cplx coeff, cplx ratio, Index step = 1) {
        return from_parts({}, {GeoTail{start, step, coeff, ratio}});
    }
    static SpVector from_dense(const std::vector<cplx>& v, Index offset = 0) {
        SpVector x;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] != 0.0) x.entries_[offset + static_cast<Index>(i)] = v[i];
        return x;
    }

    // value = sum(finite) + sum(tails); merges aligned tails, rejects overlapping ones.
    static SpVector from_parts(std::map<Index, cplx> finite, std::vector<GeoTail> tails);

    const std::map<Index, cplx>& entries() const { return entries_; }
    const std::vector<GeoTail>& tails() const { return tails_; }
    bool has_tail() const { return !tails_.empty(); }
    bool empty() const { return entries_.empty() && tails_.empty(); }

    // (tail number, position index) if j lies on a tail progression.
    std::optional<std::pair<std::size_t, Index>> on_tail(Index j) const {
        for (std::size_t t = 0; t < tails_.size(); ++t)
            if (tails_[t].prog().contains(j)) return std::make_pair(t, tails_[t].prog().index_of(j));
        return std::nullopt;
    }
    cplx tail_value(Index j) const {
        auto ot = on_tail(j);
        return ot ? tails_[ot->first].value_at_m(ot->second) : cplx(0.0);
    }
    cplx get(Index j) const {
        auto it = entries_.find(j);
        if (it != entries_.end()) return it->second;
        return tail_value(j);
    }
    cplx operator[](Index j) const { return get(j); }

    void set(Index j, cplx v);

    // Entries minus the tail values they override: x = finite_part() + sum of full tails.
    std::map<Index, cplx> finite_part() const {
        std::map<Index, cplx> f;
        for (auto& [j, v] : entries_) {
            cplx d = v - tail_value(j);
            if (d != 0.0) f[j] = d;
        }
        return f;
    }

    Index min_index() const;
    Index max_index() const;  // largest explicit or tail-start index; tails may extend beyond

    std::vector<cplx> window(Index lo, Index n) const {
        std::vector<cplx> w(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = get(lo + i);
        return w;
    }

    void validate(IndexDomain dom) const {
        for (auto& t : tails_) {
            require(std::abs(t.ratio) < 1.0, "SpVector: tail ratio must satisfy |w| < 1");
            require(t.step != 0, "SpVector: zero tail step");
        }
        for (auto& [j, v] : entries_) require(v != 0.0, "SpVector: explicit zero entry");
        if (dom == IndexDomain::NonNegInts) {
            for (auto& [j, v] : entries_) require(j >= 0, "SpVector: negative index on Z+");
            for (auto& t : tails_) require(t.start >= 0 && t.step > 0, "SpVector: tail leaves Z+");
        }
    }

    friend SpVector operator*(cplx a, const SpVector& x);
    friend SpVector operator+(const SpVector& x, const SpVector& y);
    friend SpVector operator-(const SpVector& x, const SpVector& y) { return x + (-1.0) * y; }
    SpVector conjugate() const;

private:
    std::map<Index, cplx> entries_;
    std::vector<GeoTail> tails_;
};

inline Index SpVector::min_index() const {
    Index m = std::numeric_limits<Index>::max();
    if (!entries_.empty()) m = entries_.begin()->first;
    for (auto& t : tails_) m = std::min(m, t.step > 0 ? t.start : std::numeric_limits<Index>::min());
    return m;
}

inline Index SpVector::max_index() const {
    Index m = std::numeric_limits<Index>::min();
    if (!entries_.empty()) m = entries_.rbegin()->first;
    for (auto& t : tails_) m = std::max(m, t.step < 0 ? t.start : std::numeric_limits<Index>::max());
    return m;
}

namespace detail {

inline bool same_ratio(cplx a, cplx b) {
    return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a));
}

// Materialize tail positions m in [0, upto) into f (additive).
inline void materialize_prefix(const GeoTail& t, Index upto, std::map<Index, cplx>& f) {
    if (upto > kMaterializeCap) throw UnrepresentableImage("tail prefix exceeds materialization cap");
    cplx v = t.coeff;
    for (Index m = 0; m < upto; ++m) {
        f[t.start + m * t.step] += v;
        v *= t.ratio;
    }
}

}  // namespace detail

inline SpVector SpVector::from_parts(std::map<Index, cplx> finite, std::vector<GeoTail> tails) {
    // Degenerate tails become entries or vanish.
    std::vector<GeoTail> ts;
    for (auto& t : tails) {
        if (t.coeff == 0.0) continue;
        require(t.step != 0, "tail step must be nonzero");
        if (std::abs(t.ratio) >= 1.0) throw PreconditionError("tail ratio must satisfy |w| < 1");
        if (t.ratio == 0.0) {
            finite[t.start] += t.coeff;
            continue;
        }
        ts.push_back(t);
    }
    // Merge tails along a common progression with the same ratio.
    std::vector<GeoTail> merged;
    for (auto& t : ts) {
        bool done = false;
        for (auto& u : merged) {
            if (u.step != t.step || !detail::same_ratio(u.ratio, t.ratio)) continue;
            if (detail::mod_pos(u.start - t.start, std::abs(t.step)) != 0) continue;
            // Put the earlier-starting tail in `first`.
            GeoTail first = u, second = t;
            if ((t.step > 0 && t.start < u.start) || (t.step < 0 && t.start > u.start)) std::swap(first, second);
            Index m0 = (second.start - first.start) / first.step;
            detail::materialize_prefix(first, m0, finite);
            GeoTail g{second.start, second.step, second.coeff + first.value_at_m(m0), second.ratio};
            u = g;
            done = true;
            break;
        }
        if (!done) merged.push_back(t);
    }
    std::vector<GeoTail> kept;
    for (auto& u : merged) {
        double scale = std::abs(u.coeff);
        if (scale > 0.0) kept.push_back(u);
    }
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t b = a + 1; b < kept.size(); ++b)
            if (intersect(kept[a].prog(), kept[b].prog()))
                throw UnrepresentableImage("overlapping tails with different ratios");
    SpVector x;
    x.tails_ = kept;
    std::vector<Index> zeros;
    for (auto& [j, v] : finite) {
        cplx total = v + x.tail_value(j);
        if (total != 0.0)
            x.entries_[j] = total;
        else if (x.on_tail(j))
            zeros.push_back(j);
    }
    for (Index j : zeros) x.set(j, 0.0);
    return x;
}

inline void SpVector::set(Index j, cplx v) {
    if (v != 0.0) {
        entries_[j] = v;
        return;
    }
    entries_.erase(j);
    auto ot = on_tail(j);
    if (!ot) return;
    // Split the tail around j, keeping overriding entries as they are.
    GeoTail t = tails_[ot->first];
    Index m = ot->second;
    tails_.erase(tails_.begin() + static_cast<std::ptrdiff_t>(ot->first));
    std::map<Index, cplx> pre;
    detail::materialize_prefix(t, m, pre);
    for (auto& [i, val] : pre)
        if (!entries_.count(i) && val != 0.0) entries_[i] = val;
    GeoTail rest{t.start + (m + 1) * t.step, t.step, t.value_at_m(m + 1), t.ratio};
    if (rest.coeff != 0.0) tails_.push_back(rest);
}

inline SpVector operator*(cplx a, const SpVector& x) {
    SpVector y;
    if (a == 0.0) return y;
    for (auto& [j, v] : x.entries_) y.entries_[j] = a * v;
    for (auto t : x.tails_) {
        t.coeff *= a;
        y.tails_.push_back(t);
    }
    return y;
}

inline SpVector operator+(const SpVector& x, const SpVector& y) {
    auto f = x.finite_part();
    for (auto& [j, v] : y.finite_part()) f[j] += v;
    std::vector<GeoTail> ts = x.tails_;
    ts.insert(ts.end(), y.tails_.begin(), y.tails_.end());
    return SpVector::from_parts(std::move(f), std::move(ts));
}

inline SpVector SpVector::conjugate() const {
    SpVector y;
    for (auto& [j, v] : entries_) y.entries_[j] = std::conj(v);
    for (auto t : tails_) {
        t.coeff = std::conj(t.coeff);
        t.ratio = std::conj(t.ratio);
        y.tails_.push_back(t);
    }
    return y;
}

// ---------------------------------------------------------------------------
// norms, duality, pairing, projection

inline double norm(const SpVector& v, const PNorm& n) {
    if (n.is_c0()) {
        double m = 0.0;
        for (auto& [j, x] : v.entries()) m = std::max(m, std::abs(x));
        for (auto& t : v.tails()) {
            // first tail position not overridden by an entry dominates the rest
            Index k = 0;
            while (v.entries().count(t.start + k * t.step)) ++k;
            m = std::max(m, std::abs(t.value_at_m(k)));
        }
        return m;
    }
    const double p = n.p;
    double s = 0.0;
    for (auto& t : v.tails()) s += powabs(t.coeff, p) / (1.0 - powabs(t.ratio, p));
    for (auto& [j, x] : v.entries()) {
        auto ot = v.on_tail(j);
        if (ot) s -= powabs(v.tails()[ot->first].value_at_m(ot->second), p);
        s += powabs(x, p);
    }
    return std::pow(std::max(s, 0.0), 1.0 / p);
}

// J(x) = sum conj(x_j)|x_j|^{p-2} e_j^*, represented as a sequence.
inline SpVector duality_map(const SpVector& v, double p) {
    require(p > 1.0, "duality_map: p = 1 has no single-valued duality map");
    auto J = [p](cplx z) { return std::conj(z) * std::pow(std::abs(z), p - 2.0); };
    std::map<Index, cplx> f;
    std::vector<GeoTail> ts;
    for (auto& t : v.tails()) ts.push_back({t.start, t.step, J(t.coeff), J(t.ratio)});
    SpVector tails_only = SpVector::from_parts({}, ts);
    for (auto& [j, x] : v.entries()) f[j] = J(x) - tails_only.get(j);
    return SpVector::from_parts(std::move(f), std::move(ts));
}

// Bilinear pairing sum_j f_j x_j.
inline cplx pair(const SpVector& f, const SpVector& x) {
    auto Ff = f.finite_part();
    auto Fx = x.finite_part();
    cplx s = 0.0;
    for (auto& [j, v] : Ff) s += v * x.get(j);
    for (auto& t : f.tails())
        for (auto& [j, v] : Fx)
            if (t.prog().contains(j)) s += t.value_at_m(t.prog().index_of(j)) * v;
    for (auto& t : f.tails()) {
        for (auto& u : x.tails()) {
            auto I = intersect(t.prog(), u.prog());
            if (!I) continue;
            Index mt = t.prog().index_of(I->start), mu = u.prog().index_of(I->start);
            Index dt = I->step / t.step, du = I->step / u.step;  // du < 0 when directions differ
            cplx first = t.value_at_m(mt) * u.value_at_m(mu);
            if (I->infinite()) {
                cplx r = std::pow(t.ratio, static_cast<double>(dt)) * std::pow(u.ratio, static_cast<double>(du));
                s += first / (1.0 - r);
            } else {
                for (Index k = 0; k < I->count; ++k)
                    s += t.value_at_m(mt + k * dt) * u.value_at_m(mu + k * du);
            }
        }
    }
    return s;
}

inline SpVector project(const SpVector& v, const IndexSet& I) {
    using K = IndexSet::Kind;
    if (I.kind == K::Finite) {
        SpVector y;
        for (Index j : I.points) y.set(j, v.get(j));
        return y;
    }
    if (I.kind == K::Complement) {
        SpVector y = v;
        for (Index j : I.points) y.set(j, 0.0);
        return y;
    }
    const Index kMin = std::numeric_limits<Index>::min(), kMax = std::numeric_limits<Index>::max();
    Index lo = kMin, hi = kMax;
    if (I.kind == K::Interval) lo = I.a, hi = I.b;
    if (I.kind == K::RayAbove) lo = I.a + 1;
    if (I.kind == K::RayBelow) hi = I.a - 1;
    std::map<Index, cplx> f;
    for (auto& [j, x] : v.finite_part())
        if (j >= lo && j <= hi) f[j] = x;
    std::vector<GeoTail> ts;
    for (auto& t : v.tails()) {
        Progression win;
        if (lo == kMin && hi == kMax) {
            ts.push_back(t);
            continue;
        }
        if (lo == kMin) win = {hi, -1, -1};
        else if (hi == kMax) win = {lo, 1, -1};
        else win = {lo, 1, hi - lo + 1};
        auto J = intersect(t.prog(), win);
        if (!J) continue;
        Index m0 = t.prog().index_of(J->start);
        if (J->infinite()) {
            ts.push_back({J->start, t.step, t.value_at_m(m0), t.ratio});
        } else {
            if (J->count > kMaterializeCap) throw UnrepresentableImage("project: window too large");
            cplx val = t.value_at_m(m0);
            for (Index k = 0; k < J->count; ++k) {
                f[J->start + k * t.step] += val;
                val *= t.ratio;
            }
        }
    }
    return SpVector::from_parts(std::move(f), std::move(ts));
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const SpVector& v) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (auto& [k, x] : v.entries()) j["entries"].push_back({k, x.real(), x.imag()});
    auto& ts = v.tails();
    if (ts.size() == 1 && ts[0].step == 1) {
        auto& t = ts[0];
        j["tail"] = {{"s", t.start}, {"c_re", t.coeff.real()}, {"c_im", t.coeff.imag()},
                     {"w_re", t.ratio.real()}, {"w_im", t.ratio.imag()}};
    } else if (!ts.empty()) {
        j["tails"] = nlohmann::json::array();
        for (auto& t : ts)
            j["tails"].push_back({{"s", t.start}, {"step", t.step}, {"c_re", t.coeff.real()},
                                  {"c_im", t.coeff.imag()}, {"w_re", t.ratio.real()}, {"w_im", t.ratio.imag()}});
    }
    return j;
}

inline SpVector spvector_from_json(const nlohmann::json& j) {
    std::map<Index, cplx> f;
    std::vector<GeoTail> ts;
    auto read_tail = [&](const nlohmann::json& t) {
        ts.push_back({t.at("s").get<Index>(), t.value("step", Index{1}),
                      {t.at("c_re").get<double>(), t.at("c_im").get<double>()},
                      {t.at("w_re").get<double>(), t.at("w_im").get<double>()}});
    };
    if (j.contains("tail")) read_tail(j["tail"]);
    if (j.contains("tails"))
        for (auto& t : j["tails"]) read_tail(t);
    SpVector tails_only = SpVector::from_parts({}, ts);
    for (auto& e : j.at("entries")) {
        Index k = e.at(0).get<Index>();
        cplx x{e.at(1).get<double>(), e.at(2).get<double>()};
        f[k] = x - tails_only.get(k);
    }
    return SpVector::from_parts(std::move(f), std::move(ts));
}

}  // namespace lplab
