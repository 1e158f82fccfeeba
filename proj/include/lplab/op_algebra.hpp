#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sequence_space.hpp"

namespace lplab {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// 0,0,1,0,1,2,0,1,2,3,... takes every value infinitely often and phi(k) <= k.
inline Index diagonal_enumeration(Index k) {
    Index n = static_cast<Index>((std::sqrt(8.0 * static_cast<double>(k) + 1.0) - 1.0) / 2.0);
    while (n * (n + 1) / 2 > k) --n;
    while ((n + 1) * (n + 2) / 2 <= k) ++n;
    return k - n * (n + 1) / 2;
}

struct RowMap {
    enum class Kind { Affine, Enumeration };
    Kind kind = Kind::Affine;
    Index a = 1, b = 0;  // Affine: row = a*col + b. Enumeration: row = b + phi(m + phase)
    Index phase = 0;

    static RowMap affine(Index a, Index b) { return {Kind::Affine, a, b, 0}; }
    static RowMap enumeration(Index b, Index phase = 0) { return {Kind::Enumeration, 0, b, phase}; }
    Index row(Index col, Index m) const {
        return kind == Kind::Affine ? a * col + b : b + diagonal_enumeration(m + phase);
    }
};

// weight(m) = base + coeff * ratio^m, m the progression index of the column.
struct RuleEntry {
    RowMap row;
    cplx base{0.0};
    cplx coeff{0.0};
    cplx ratio{0.0};

    cplx weight(Index m) const {
        if (coeff == 0.0) return base;
        return base + coeff * std::pow(ratio, static_cast<double>(m));
    }
    // Weight is constant along the rule.
    bool constant() const { return coeff == 0.0 || ratio == 1.0; }
    cplx limit() const { return ratio == 1.0 ? base + coeff : base; }
};

struct ColumnRule {
    Index start = 0;
    Index step = 1;
    Index count = -1;
    std::vector<RuleEntry> entries;

    Progression prog() const { return {start, step, count}; }
};

// Sparse finite block, column-major.
struct SparseBlock {
    std::map<Index, std::map<Index, cplx>> cols;

    void add(Index r, Index c, cplx v) {
        if (v == 0.0) return;
        auto& col = cols[c];
        col[r] += v;
        if (col[r] == 0.0) col.erase(r);
    }
    void set(Index r, Index c, cplx v) {
        if (v == 0.0) {
            auto it = cols.find(c);
            if (it != cols.end()) it->second.erase(r);
            return;
        }
        cols[c][r] = v;
    }
    cplx get(Index r, Index c) const {
        auto it = cols.find(c);
        if (it == cols.end()) return 0.0;
        auto jt = it->second.find(r);
        return jt == it->second.end() ? cplx(0.0) : jt->second;
    }
    bool has_col(Index c) const { return cols.count(c) > 0; }
    std::size_t nnz() const {
        std::size_t n = 0;
        for (auto& [c, col] : cols) n += col.size();
        return n;
    }
};

class StructuredOperator {
public:
    SparseBlock block;
    std::vector<ColumnRule> rules;
    IndexDomain domain = IndexDomain::NonNegInts;
    PNorm ambient = PNorm::Lp(2.0);

    static StructuredOperator zero(PNorm n = PNorm::Lp(2.0), IndexDomain d = IndexDomain::NonNegInts) {
        StructuredOperator T;
        T.ambient = n;
        T.domain = d;
        return T;
    }
    static StructuredOperator from_dense(const Mat& M, PNorm n = PNorm::Lp(2.0), Index row_off = 0,
                                         Index col_off = 0, IndexDomain d = IndexDomain::NonNegInts) {
        StructuredOperator T = zero(n, d);
        for (Index c = 0; c < M.cols(); ++c) {
            T.block.cols[col_off + c];  // keep explicit (possibly zero) block columns
            for (Index r = 0; r < M.rows(); ++r) T.block.add(row_off + r, col_off + c, M(r, c));
        }
        return T;
    }
    static StructuredOperator identity(Index n, PNorm nm = PNorm::Lp(2.0)) {
        return from_dense(Mat::Identity(n, n), nm);
    }
    // e_j -> e_{j+1} on Z+
    static StructuredOperator forward_shift(PNorm n = PNorm::Lp(2.0)) {
        StructuredOperator T = zero(n);
        T.rules.push_back({0, 1, -1, {{RowMap::affine(1, 1), 1.0, 0.0, 0.0}}});
        return T;
    }
    // e_j -> e_{j-1}, e_0 -> 0
    static StructuredOperator backward_shift(PNorm n = PNorm::Lp(2.0)) {
        StructuredOperator T = zero(n);
        T.rules.push_back({1, 1, -1, {{RowMap::affine(1, -1), 1.0, 0.0, 0.0}}});
        return T;
    }

    bool block_only() const { return rules.empty(); }

    const ColumnRule* rule_for(Index col, Index* m = nullptr) const {
        for (auto& r : rules)
            if (r.prog().contains(col)) {
                if (m) *m = r.prog().index_of(col);
                return &r;
            }
        return nullptr;
    }

    SpVector column(Index j) const {
        std::map<Index, cplx> f;
        auto it = block.cols.find(j);
        if (it != block.cols.end()) {
            for (auto& [r, v] : it->second) f[r] += v;
        } else {
            Index m = 0;
            if (auto* R = rule_for(j, &m))
                for (auto& e : R->entries) f[e.row.row(j, m)] += e.weight(m);
        }
        return SpVector::from_parts(std::move(f), {});
    }
    cplx entry(Index r, Index c) const { return column(c).get(r); }

    void validate() const {
        for (auto& R : rules) {
            require(R.step != 0, "ColumnRule: zero step");
            require(R.entries.size() <= 2, "ColumnRule: at most two entries");
            for (auto& e : R.entries) {
                require(std::abs(e.ratio) <= 1.0 + 1e-15, "ColumnRule: |rho| <= 1 required");
                if (std::abs(e.ratio) >= 1.0 - 1e-15)
                    require(e.ratio == 1.0 || e.base == 0.0 || e.coeff == 0.0,
                            "ColumnRule: unimodular rho needs base = 0");
            }
            for (auto& [c, col] : block.cols)
                require(!R.prog().contains(c), "block and rule columns overlap");
            if (domain == IndexDomain::NonNegInts)
                require(R.start >= 0 && (R.step > 0 || R.count >= 0), "rule leaves Z+");
        }
        for (std::size_t a = 0; a < rules.size(); ++a)
            for (std::size_t b = a + 1; b < rules.size(); ++b)
                require(!intersect(rules[a].prog(), rules[b].prog()), "rules overlap");
    }
};

// ---------------------------------------------------------------------------
// apply

inline SpVector apply(const StructuredOperator& T, const SpVector& v) {
    std::map<Index, cplx> f;
    std::vector<GeoTail> out;
    auto add_col = [&](Index j, cplx x) {
        if (x == 0.0) return;
        auto it = T.block.cols.find(j);
        if (it != T.block.cols.end()) {
            for (auto& [r, w] : it->second) f[r] += w * x;
            return;
        }
        Index m = 0;
        if (auto* R = T.rule_for(j, &m))
            for (auto& e : R->entries) f[e.row.row(j, m)] += e.weight(m) * x;
    };
    for (auto& [j, x] : v.finite_part()) add_col(j, x);
    for (auto& t : v.tails()) {
        if (T.domain == IndexDomain::NonNegInts && t.step < 0)
            throw PreconditionError("apply: backward tail on Z+");
        for (auto& [j, col] : T.block.cols)
            if (t.prog().contains(j)) add_col(j, t.value_at_m(t.prog().index_of(j)));
        for (auto& R : T.rules) {
            auto I = intersect(t.prog(), R.prog());
            if (!I) continue;
            Index mt = t.prog().index_of(I->start), mR = R.prog().index_of(I->start);
            Index dt = I->step / t.step, dR = I->step / R.step;
            if (!I->infinite()) {
                if (I->count > kMaterializeCap) throw UnrepresentableImage("apply: intersection too long");
                for (Index k = 0; k < I->count; ++k) add_col(I->start + k * I->step, t.value_at_m(mt + k * dt));
                continue;
            }
            cplx rt = std::pow(t.ratio, static_cast<double>(dt));
            cplx c0 = t.value_at_m(mt);
            for (auto& e : R.entries) {
                if (e.row.kind != RowMap::Kind::Affine)
                    throw UnrepresentableImage("apply: tail meets a non-affine row map");
                // two geometric pieces: constant weight and the decaying one
                cplx cb = e.constant() ? e.limit() : e.base;
                cplx cc = e.constant() ? cplx(0.0) : e.coeff * std::pow(e.ratio, static_cast<double>(mR));
                cplx rc = e.constant() ? cplx(0.0) : std::pow(e.ratio, static_cast<double>(dR));
                Index row0 = e.row.a * I->start + e.row.b;
                Index rstep = e.row.a * I->step;
                if (rstep == 0) {
                    f[row0] += c0 * (cb / (1.0 - rt) + cc / (1.0 - rt * rc));
                    continue;
                }
                if (cb != 0.0 && cc != 0.0) throw UnrepresentableImage("apply: two-ratio image on one progression");
                if (cb != 0.0) out.push_back({row0, rstep, c0 * cb, rt});
                if (cc != 0.0) out.push_back({row0, rstep, c0 * cc, rt * rc});
            }
        }
    }
    return SpVector::from_parts(std::move(f), std::move(out));
}

// ---------------------------------------------------------------------------
// adjoint: conjugate transpose, pairing <f, x> = sum conj(f_j) x_j

inline cplx inner(const SpVector& f, const SpVector& x) { return pair(f.conjugate(), x); }

namespace detail {

inline void materialize_rule_column(const ColumnRule& R, Index m, SparseBlock& B) {
    Index col = R.start + m * R.step;
    B.cols[col];
    for (auto& e : R.entries) B.add(e.row.row(col, m), col, e.weight(m));
}

// Drop progression positions [0, m0) from R (weights and phase re-indexed).
inline ColumnRule restart_rule(const ColumnRule& R, Index m0) {
    ColumnRule S = R;
    S.start = R.start + m0 * R.step;
    if (R.count >= 0) S.count = std::max<Index>(0, R.count - m0);
    for (auto& e : S.entries) {
        if (!e.constant()) e.coeff *= std::pow(e.ratio, static_cast<double>(m0));
        if (e.row.kind == RowMap::Kind::Enumeration) e.row.phase += m0;
    }
    return S;
}

}  // namespace detail

inline StructuredOperator adjoint(const StructuredOperator& T) {
    StructuredOperator A;
    A.domain = T.domain;
    A.ambient = T.ambient.dual();
    for (auto& [c, col] : T.block.cols)
        for (auto& [r, v] : col) A.block.add(c, r, std::conj(v));
    // Rows of the original block become adjoint columns; keep them explicit.
    for (auto& [c, col] : T.block.cols)
        for (auto& [r, v] : col) A.block.cols[r];
    std::vector<ColumnRule> rs;
    for (auto& R : T.rules) {
        for (auto& e : R.entries) {
            if (e.row.kind != RowMap::Kind::Affine || std::abs(e.row.a) != 1)
                throw PreconditionError("adjoint: rule row pattern is not invertible");
            Index a = e.row.a, b = e.row.b;
            ColumnRule S;
            S.start = a * R.start + b;
            S.step = a * R.step;
            S.count = R.count;
            S.entries.push_back({RowMap::affine(a, -a * b), std::conj(e.base), std::conj(e.coeff), std::conj(e.ratio)});
            rs.push_back(S);
        }
    }
    // Resolve collisions of the new rules with the block: materialize a prefix and restart.
    for (auto& S : rs) {
        Index last = -1;
        for (auto& [c, col] : A.block.cols)
            if (S.prog().contains(c)) last = std::max(last, S.prog().index_of(c));
        if (last < 0) {
            A.rules.push_back(S);
            continue;
        }
        for (Index m = 0; m <= last; ++m) {
            Index col = S.start + m * S.step;
            for (auto& e : S.entries) A.block.add(e.row.row(col, m), col, e.weight(m));
        }
        ColumnRule rest = detail::restart_rule(S, last + 1);
        if (rest.count != 0) A.rules.push_back(rest);
    }
    for (std::size_t a = 0; a < A.rules.size(); ++a)
        for (std::size_t b = a + 1; b < A.rules.size(); ++b)
            if (intersect(A.rules[a].prog(), A.rules[b].prog()))
                throw PreconditionError("adjoint: transposed rules collide");
    return A;
}

// ---------------------------------------------------------------------------
// truncation

// Index window of truncate(): [0, D) on Z+, [-D, D] on Z.
inline std::pair<Index, Index> truncation_window(IndexDomain d, Index D) {
    return d == IndexDomain::NonNegInts ? std::make_pair(Index{0}, D) : std::make_pair(-D, 2 * D + 1);
}

inline Mat truncate(const StructuredOperator& T, Index D) {
    require(D >= 1, "truncate: D >= 1");
    auto [lo, n] = truncation_window(T.domain, D);
    Mat M = Mat::Zero(n, n);
    for (Index c = 0; c < n; ++c) {
        auto col = T.column(lo + c);
        for (auto& [r, v] : col.entries())
            if (r >= lo && r < lo + n) M(r - lo, c) = v;
    }
    return M;
}

// Rectangular P_rows T P_cols for arbitrary windows.
inline Mat window_matrix(const StructuredOperator& T, Index row_lo, Index nrows, Index col_lo, Index ncols) {
    Mat M = Mat::Zero(nrows, ncols);
    for (Index c = 0; c < ncols; ++c) {
        auto col = T.column(col_lo + c);
        for (auto& [r, v] : col.entries())
            if (r >= row_lo && r < row_lo + nrows) M(r - row_lo, c) = v;
    }
    return M;
}

inline StructuredOperator scaled(const StructuredOperator& T, cplx a) {
    StructuredOperator S = T;
    for (auto& [c, col] : S.block.cols)
        for (auto& [r, v] : col) v *= a;
    for (auto& R : S.rules)
        for (auto& e : R.entries) {
            e.base *= a;
            e.coeff *= a;
        }
    return S;
}

// T - lambda I on the block window only is not representable in general; this adds
// lambda*I on an explicit finite set of columns that lie in the block.
inline StructuredOperator add_block(const StructuredOperator& T, const Mat& M, Index off = 0) {
    StructuredOperator S = T;
    for (Index c = 0; c < M.cols(); ++c) {
        require(!T.rule_for(off + c), "add_block: column covered by a rule");
        S.block.cols[off + c];
        for (Index r = 0; r < M.rows(); ++r) S.block.add(off + r, off + c, M(r, c));
    }
    return S;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const StructuredOperator& T) {
    nlohmann::json j;
    j["domain"] = T.domain == IndexDomain::NonNegInts ? "Z+" : "Z";
    j["ambient"] = T.ambient.is_c0() ? nlohmann::json("c0") : nlohmann::json(T.ambient.p);
    auto& blk = j["block"];
    blk = nlohmann::json::array();
    // row-major order of (row, col, re, im)
    std::map<std::pair<Index, Index>, cplx> rm;
    for (auto& [c, col] : T.block.cols)
        for (auto& [r, v] : col) rm[{r, c}] = v;
    for (auto& [rc, v] : rm) blk.push_back({rc.first, rc.second, v.real(), v.imag()});
    j["block_cols"] = nlohmann::json::array();
    for (auto& [c, col] : T.block.cols) j["block_cols"].push_back(c);
    j["rules"] = nlohmann::json::array();
    for (auto& R : T.rules) {
        nlohmann::json r{{"start", R.start}, {"step", R.step}, {"count", R.count}};
        r["entries"] = nlohmann::json::array();
        for (auto& e : R.entries) {
            r["entries"].push_back({{"row", e.row.kind == RowMap::Kind::Affine ? "affine" : "enumeration"},
                                    {"a", e.row.a}, {"b", e.row.b}, {"phase", e.row.phase},
                                    {"base", {e.base.real(), e.base.imag()}},
                                    {"coeff", {e.coeff.real(), e.coeff.imag()}},
                                    {"ratio", {e.ratio.real(), e.ratio.imag()}}});
        }
        j["rules"].push_back(r);
    }
    return j;
}

inline StructuredOperator operator_from_json(const nlohmann::json& j) {
    StructuredOperator T;
    T.domain = j.value("domain", std::string("Z+")) == "Z" ? IndexDomain::AllInts : IndexDomain::NonNegInts;
    if (j.contains("ambient")) {
        auto& a = j["ambient"];
        T.ambient = a.is_string() ? PNorm::C0() : PNorm::Lp(a.get<double>());
    }
    auto cx = [](const nlohmann::json& z) { return cplx(z.at(0).get<double>(), z.at(1).get<double>()); };
    if (j.contains("block_cols"))
        for (auto& c : j["block_cols"]) T.block.cols[c.get<Index>()];
    if (j.contains("block")) {
        auto& b = j["block"];
        if (b.is_array() && !b.empty() && b[0].is_array() && b[0].size() == 4 && !b[0][0].is_array()) {
            for (auto& e : b) T.block.add(e[0].get<Index>(), e[1].get<Index>(), {e[2].get<double>(), e[3].get<double>()});
        } else if (b.is_array()) {
            // dense row-major [[ [re,im], ... ], ...]
            for (std::size_t r = 0; r < b.size(); ++r)
                for (std::size_t c = 0; c < b[r].size(); ++c) {
                    T.block.cols[static_cast<Index>(c)];
                    auto& z = b[r][c];
                    cplx v = z.is_array() ? cx(z) : cplx(z.get<double>(), 0.0);
                    T.block.add(static_cast<Index>(r), static_cast<Index>(c), v);
                }
        }
    }
    if (j.contains("rules"))
        for (auto& r : j["rules"]) {
            ColumnRule R{r.at("start").get<Index>(), r.value("step", Index{1}), r.value("count", Index{-1}), {}};
            for (auto& e : r.at("entries")) {
                RuleEntry E;
                bool aff = e.value("row", std::string("affine")) == "affine";
                E.row = aff ? RowMap::affine(e.value("a", Index{1}), e.value("b", Index{0}))
                            : RowMap::enumeration(e.value("b", Index{0}), e.value("phase", Index{0}));
                E.base = e.contains("base") ? cx(e["base"]) : cplx(0.0);
                E.coeff = e.contains("coeff") ? cx(e["coeff"]) : cplx(0.0);
                E.ratio = e.contains("ratio") ? cx(e["ratio"]) : cplx(0.0);
                R.entries.push_back(E);
            }
            T.rules.push_back(R);
        }
    T.validate();
    return T;
}

}  // namespace lplab
