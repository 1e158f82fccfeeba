#pragma once

#include <chrono>
#include <functional>

#include "banach_mazur.hpp"
#include "commutant.hpp"
#include "exposing.hpp"
#include "polynomials.hpp"
#include "report.hpp"
#include "samplers.hpp"

namespace lplab {

// The acceptance battery behind `verify-all`: criteria 1..12, one report section each.
// Records hold counts and worst-case values only; wall-clock time goes to the caller so the
// report stays a pure function of the seed.

namespace battery {

struct Tally {
    Index instances = 0, failures = 0;
    double worst = 0.0;
    nlohmann::json first_failure;

    void see(bool ok, double value = 0.0, const nlohmann::json& where = {}) {
        ++instances;
        worst = std::max(worst, value);
        if (!ok && failures++ == 0) first_failure = where.is_null() ? nlohmann::json(value) : where;
    }
    bool ok() const { return instances > 0 && failures == 0; }
    nlohmann::json to_json() const {
        nlohmann::json j = {{"instances", instances}, {"failures", failures}, {"worst", worst}};
        if (failures) j["first_failure"] = first_failure;
        return j;
    }
};

inline Status all_ok(std::initializer_list<const Tally*> ts) {
    for (auto* t : ts)
        if (!t->ok()) return Status::Fail;
    return Status::Pass;
}

// 200 complex matrices with 1 <= rows, cols <= 3 per norm.
inline Section norm_engine(Rng rng) {
    Tally smooth, exact;
    for (auto n : {PNorm::Lp(1), PNorm::Lp(1.5), PNorm::Lp(2), PNorm::Lp(3), PNorm::Lp(4), PNorm::C0()}) {
        const bool ex = n.is_c0() || n.p == 1.0;
        for (int s = 0; s < 200; ++s) {
            Mat M = random_dense(rng, rng.uniform_int(1, 3), rng.uniform_int(1, 3));
            double a = dense_op_norm(M, n).value, b = op_norm_oracle(M, n).value;
            double err = std::abs(a - b);
            if (ex)
                exact.see(err <= 1e-12 * std::max(1.0, b), err, {{"space", n.name()}, {"sample", s}, {"err", err}});
            else
                smooth.see(err <= 1e-4, err, {{"space", n.name()}, {"sample", s}, {"err", err}});
        }
    }
    return {"norm engine vs oracle", all_ok({&smooth, &exact}),
            {{"p_1_5_2_3_4_within_1e-4", smooth.to_json()}, {"p1_c0_within_1e-12", exact.to_json()}}};
}

inline Section kan_inequality(Rng rng) {
    Tally strict, reversed;
    for (double p : {2.5, 3.0, 4.0, 8.0, 0.5, 1.2, 1.8}) {
        Tally& t = p > 2.0 ? strict : reversed;
        for (int s = 0; s < 1000; ++s) {
            cplx u = rng.cnormal(), v = rng.cnormal();
            bool ok = false;
            try {
                ok = kan_check(u, v, p);
            } catch (const Error&) {
            }
            t.see(ok, 0.0, {{"p", p}, {"sample", s}});
        }
    }
    return {"Kan inequality", all_ok({&strict, &reversed}),
            {{"strict_p_gt_2", strict.to_json()}, {"reversed_p_lt_2", reversed.to_json()}}};
}

inline Section b_eta_delta(Rng rng) {
    Tally norm1, u0, even;
    for (int s = 0; s < 50; ++s) {
        const double p = std::array<double, 3>{1.5, 2.0, 3.0}[static_cast<std::size_t>(s % 3)];
        const Index d = rng.uniform_int(1, 4);
        nlohmann::json where = {{"sample", s}, {"p", p}, {"dim", d}};
        try {
            Mat A = make_evenly_distributed(random_contraction(rng, d, PNorm::Lp(p), 0.5), p, rng);
            auto b = build_B_eta_delta(A, rng.uniform(0.1, 0.9), p);
            double e1 = std::abs(dense_op_norm(b.B, PNorm::Lp(p)).value - 1.0);
            double e2 = std::abs(b.norm_u0 - 1.0);
            norm1.see(e1 <= 1e-6, e1, where);
            u0.see(e2 <= 1e-9, e2, where);
            even.see(b.even.even, 0.0, where);
        } catch (const Error& e) {
            where["error"] = e.what();
            norm1.see(false, 0.0, where);
        }
    }
    return {"B_eta_delta norming", all_ok({&norm1, &u0, &even}),
            {{"norm_B_eq_1_within_1e-6", norm1.to_json()},
             {"norm_Bu0_eq_1_within_1e-9", u0.to_json()},
             {"evenly_distributed", even.to_json()}}};
}

namespace detail {

// X = (B + D) / max(1, ||B + D||) with ||D|| < delta/2, so ||X - B|| < delta; then the largest s in [0, 1]
// with ||[[X, sC], [sE, sF]]|| <= 1, by bisection on the Boyd estimate.
inline Mat contraction_near(const Mat& B, double delta, Index window, double p, Rng& rng) {
    const Index m = B.rows();
    PNorm n = PNorm::Lp(p);
    Mat D = random_dense(rng, m, m);
    D *= 0.5 * delta * rng.uniform(0.0, 0.999) / dense_op_norm(D, n).value;
    Mat X = B + D;
    X /= std::max(1.0, dense_op_norm(X, n).value);
    Mat R = random_dense(rng, window, window);
    auto build = [&](double s) {
        Mat T = s * R;
        T.topLeftCorner(m, m) = X;
        return T;
    };
    BoydOptions opt;
    opt.starts = 6;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 30; ++it) {
        double mid = 0.5 * (lo + hi);
        (dense_op_norm(build(mid), n, opt).value <= 1.0 ? lo : hi) = mid;
    }
    return build(lo);
}

}  // namespace detail

// 100 contractions per p; A of size 1..4 so M = 2 dim(A) - 1 <= 7.
inline Section localization(Rng rng) {
    Tally t;
    nlohmann::json deltas = nlohmann::json::array();
    for (double p : {3.0, 4.0}) {
        const double eps = 0.1;
        for (Index d = 1; d <= 4; ++d) {
            Mat A = make_evenly_distributed(random_contraction(rng, d, PNorm::Lp(p), 0.5), p, rng);
            auto b = build_B_eta_delta(A, 0.5, p);
            const Index M = b.B.rows() - 1;
            double delta = delta_for_B(b.B, eps, p, b.even.gamma);
            deltas.push_back({{"p", p}, {"M", M}, {"delta", delta}});
            for (int s = 0; s < 25; ++s) {
                Mat T = detail::contraction_near(b.B, delta, 4 * M, p, rng);
                double corner = dense_op_norm(T.topRightCorner(M + 1, T.cols() - M - 1), PNorm::Lp(p)).value;
                t.see(corner < eps, corner, {{"p", p}, {"M", M}, {"sample", s}, {"corner", corner}});
            }
        }
    }
    return {"localization bound", all_ok({&t}), {{"corner_lt_eps_0.1", t.to_json()}, {"configs", deltas}}};
}

// Weights below delta on [-(3N+1), N] and 1 outside: no eigenvalue in the closed disk.
inline Section saomega_circle(Rng rng) {
    Tally none, bound;
    std::vector<cplx> grid;
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 20; ++b) grid.push_back(std::polar(a / 9.0, 2.0 * kPi * b / 20.0));
    const double eps = 0.1, nA = 0.9;
    for (double p : {2.0, 3.0})
        for (Index N : {1, 2}) {
            PNorm n = PNorm::Lp(p);
            Mat A = scaled_to_norm(random_dense(rng, 2 * N + 1, 2 * N + 1), n, nA);
            double delta = small_weight_delta(eps, nA, p);
            WeightSeq w;
            w.lo = -(3 * N + 1);
            w.hi = N;
            for (Index j = w.lo; j <= w.hi; ++j) w.vals.push_back(delta * rng.uniform(0.01, 0.999));
            w.left = w.right = 1.0;
            for (std::size_t i = 0; i < grid.size(); ++i)
                none.see(!point_spectrum_SAomega(A, w, grid[i], p).has_value(), 0.0,
                         {{"p", p}, {"N", N}, {"lambda", {grid[i].real(), grid[i].imag()}}});
            auto S = build_S_A_omega(A, w, n);
            double got = dense_op_norm(truncate(S, 200), n).value;
            double rhs = std::max(std::pow(std::pow(nA, p) + std::pow(eps, p), 1.0 / p), 1.0);
            bound.see(got <= rhs + 1e-8, got - rhs, {{"p", p}, {"N", N}, {"norm", got}, {"bound", rhs}});
        }
    return {"S_A_omega spectrum in circle", all_ok({&none, &bound}),
            {{"grid_points", grid.size()},
             {"no_eigenvalue_on_grid", none.to_json()},
             {"norm_bound_truncation_200", bound.to_json()}}};
}

namespace detail {

inline SpVector random_dual(Rng& rng, Index lo, Index hi) {
    std::map<Index, cplx> f;
    for (Index i = lo; i <= hi; ++i)
        if (rng.uniform() < 0.6) f[i] = rng.cnormal();
    if (f.empty()) f[lo] = 1.0;
    return SpVector::from_parts(std::move(f), {});
}

inline double sup_abs(const SpVector& x) {
    double s = 0.0;
    for (auto& [i, v] : x.entries()) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace detail

inline Section l1_coisometry(Rng rng) {
    Tally norm1, dual, t1norm, t1dual, t1shape;
    const PNorm l1 = PNorm::Lp(1.0);
    for (int a = 0; a < 20; ++a) {
        const Index N = std::array<Index, 4>{1, 2, 3, 7}[static_cast<std::size_t>(a % 4)];
        auto A = StructuredOperator::from_dense(random_l1_columns(rng, N + 1, N + 1, 0.2, 1.0), l1);
        auto T = build_coisometry_l1(A, N);
        double e = std::abs(op_norm(T, l1).value - 1.0);
        norm1.see(e <= 1e-15, e, {{"A", a}, {"err", e}});
        for (int s = 0; s < 100; ++s) {
            auto xs = detail::random_dual(rng, 0, 30);
            double err = std::abs(dual_norm_by_columns(T, xs, N + 1 + 40) - detail::sup_abs(xs));
            dual.see(err <= 1e-14 * detail::sup_abs(xs), err, {{"A", a}, {"sample", s}});
        }

        auto B = StructuredOperator::from_dense(random_T1_l1_block(rng, N + 1, 0.7), l1);
        GeometricEps geps;
        auto U = build_T1_coisometry_l1(B, N, geps);
        t1shape.see(in_T1(U, 300));
        double e1 = std::abs(column_l1_sup(U) - 1.0);
        t1norm.see(e1 <= 1e-15, e1, {{"A", a}, {"err", e1}});
        for (int s = 0; s < 100; ++s) {
            auto xs = detail::random_dual(rng, 0, 30);
            double err = std::abs(dual_norm_by_columns(U, xs, N + 1 + 3000) - detail::sup_abs(xs));
            t1dual.see(err <= 1e-14 * detail::sup_abs(xs), err, {{"A", a}, {"sample", s}});
        }
    }
    return {"l1 co-isometry", all_ok({&norm1, &dual, &t1norm, &t1dual, &t1shape}),
            {{"norm_eq_1", norm1.to_json()},
             {"dual_norm_preserved", dual.to_json()},
             {"T1_norm_eq_1", t1norm.to_json()},
             {"T1_dual_norm_preserved", t1dual.to_json()},
             {"T1_shape", t1shape.to_json()}}};
}

inline Section kernel_greedy(Rng rng) {
    const Index q = 20, max_l = 20;
    auto alpha = halving_alpha(max_l + 2);
    IndexSeq Nseq = [](Index i) { return 2 * i; };
    Tally t;
    for (int seed = 0; seed < 10; ++seed) {
        Rng r = rng.split(static_cast<std::uint64_t>(seed));
        auto W = dq_witness(random_dq_seed(r, Nseq(q) + 1, 30), q, alpha, Nseq, q);
        Index cap = W.r + static_cast<Index>(W.sigma.size()) + max_l + 5;
        bool ok = false;
        Index reached = -1;
        try {
            auto tr = kernel_vector_greedy(W.T, alpha, Nseq, max_l, cap);
            ok = tr.norms.size() == static_cast<std::size_t>(max_l + 1);
            for (Index l = 0; ok && l <= max_l; ++l) {
                double v = tr.norms[static_cast<std::size_t>(l)], a = alpha[static_cast<std::size_t>(l + 1)];
                ok = l == 0 ? v <= a : v < a;
                if (ok) reached = l;
            }
        } catch (const Error&) {
        }
        t.see(ok, 0.0, {{"seed", seed}, {"reached_l", reached}});
    }
    return {"kernel vector greedy", all_ok({&t}), {{"max_l", max_l}, {"seeds", t.to_json()}}};
}

inline Section rudin_shapiro_gap() {
    Tally floor, column;
    nlohmann::json rows = nlohmann::json::array();
    for (int k = 3; k <= 10; ++k) {
        auto g = shift_poly_gap(1.0, k);
        const double d1 = std::ldexp(1.0, k);
        const double lo = std::sqrt(d1) / std::sqrt(2.0);
        floor.see(g.ratio >= lo, lo - g.ratio, {{"k", k}});
        column.see(g.column == d1, std::abs(g.column - d1), {{"k", k}});
        rows.push_back({{"k", k}, {"column", g.column}, {"sup", g.sup}, {"ratio", g.ratio}, {"floor", lo}});
    }
    return {"Rudin-Shapiro gap", all_ok({&floor, &column}),
            {{"ratio_ge_floor", floor.to_json()}, {"column_exact", column.to_json()}, {"table", rows}}};
}

inline Section nonsup_run(Rng rng) {
    GameOptions opt;
    opt.rounds = 3;
    auto adv = [](const BasicOpenSet& U, Rng& r) { return adversary_random(U, r); };
    auto run = play_game(opening_random(rng), opt, adv, rng);
    auto T = assemble_limit(run);
    auto rep = verify_nonsup_run(T, run);
    Tally t;
    for (auto& c : rep.checks) t.see(c.pass || c.informational, 0.0, to_json(c));
    return {"Banach-Mazur non-sup run", rep.pass() && t.ok() ? Status::Pass : Status::Fail,
            {{"rounds", 3}, {"checks", t.to_json()}, {"report", to_json(rep)}}};
}

inline Section eigenfree_run(Rng rng, bool toy = false) {
    GameOptions opt;
    opt.strategy = StrategyKind::Eigenfree;
    opt.rounds = toy ? 4 : 2;
    opt.caps.toy = toy;
    auto adv = [](const BasicOpenSet& U, Rng& r) { return adversary_random(U, r); };
    auto run = play_game(opening_random(rng), opt, adv, rng);
    auto T = assemble_limit(run);
    auto rep = verify_eigenfree_run(T, run);
    Tally t;
    for (auto& c : rep.checks) t.see(c.pass || c.informational, 0.0, to_json(c));
    bool ok = rep.pass() && t.ok();
    // honest rounds must be certified with every truncation eigenpair rejected; toy runs must say they are not
    if (toy)
        ok = ok && !rep.certified && to_json(run).value("label", "") == "NON-CERTIFIED";
    else
        ok = ok && rep.certified && rep.extra["eigenpairs"].value("violations", -1) == 0;
    return {toy ? "Banach-Mazur eigen-free toy run" : "Banach-Mazur eigen-free run", ok ? Status::Pass : Status::Fail,
            {{"rounds", opt.rounds},
             {"toy", toy},
             {"certified", rep.certified},
             {"checks", t.to_json()},
             {"report", to_json(rep)}}};
}

inline Section commutant_witness(Rng rng) {
    Tally bez, eig, pairing, krylov;
    std::vector<cplx> grid;
    for (int i = 0; i < 40; ++i) grid.push_back(std::polar(0.9 * std::sqrt((i + 0.5) / 40.0), 2.4 * i));
    grid.push_back(0.9);
    for (int s = 0; s < 20; ++s) {
        const Index N = 1 + s % 3;
        nlohmann::json where = {{"sample", s}, {"N", N}};
        try {
            auto w = build_commutant_witness(random_commutant_block(rng, N), N, static_cast<std::uint64_t>(s + 1));
            bez.see(w.bezout_residual < 1e-8, w.bezout_residual, where);
            for (cplx z : grid) {
                double res = 0.0;
                auto f = eval_f_w(w, z, 200, &res);
                double e = std::abs(pair(f, w.x0) - 1.0);
                eig.see(res < 1e-8, res, where);
                pairing.see(e < 1e-8, e, where);
            }
            const Index m = 3 * (N + 2);
            krylov.see(krylov_rank(w.T, w.x0, m, m) == m, 0.0, where);
        } catch (const Error& e) {
            where["error"] = e.what();
            bez.see(false, 0.0, where);
        }
    }
    return {"commutant witness", all_ok({&bez, &eig, &pairing, &krylov}),
            {{"bezout_residual_lt_1e-8", bez.to_json()},
             {"eigen_residual_lt_1e-8", eig.to_json()},
             {"pairing_x0_eq_1", pairing.to_json()},
             {"krylov_rank_full", krylov.to_json()}}};
}

inline Section triangularization(Rng rng) {
    Tally fixed, shape;
    const Index D = 20;
    Vec e0 = Vec::Zero(D);
    e0(0) = 1.0;
    for (int s = 0; s < 20; ++s) {
        Mat T = random_T1_real(rng, D);
        auto tr = gram_schmidt_triangularize(T, e0);
        double e = (tr.R - T).cwiseAbs().maxCoeff();
        fixed.see(e <= 1e-12, e, {{"sample", s}});
    }
    for (int s = 0; s < 20; ++s) {
        Mat T = random_contraction(rng, D, PNorm::Lp(2.0));
        auto tr = gram_schmidt_triangularize(T, e0);
        double e = (tr.U * T * tr.U.adjoint() - tr.R).cwiseAbs().maxCoeff();
        shape.see(is_upper_hessenberg_positive(tr.R, 1e-12) && e <= 1e-10, e, {{"sample", s}});
    }
    return {"triangularization", all_ok({&fixed, &shape}),
            {{"T1_fixed_within_1e-12", fixed.to_json()}, {"generic_hessenberg_positive", shape.to_json()}}};
}

}  // namespace battery

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // wall-clock limit; 0 = none
    std::function<Section(Rng)> run;
};

inline std::vector<Criterion> acceptance_criteria() {
    using namespace battery;
    return {
        {1, "norm engine", 120.0, norm_engine},
        {2, "Kan inequality", 0.0, kan_inequality},
        {3, "B_eta_delta", 0.0, b_eta_delta},
        {4, "localization", 0.0, localization},
        {5, "S_A_omega spectrum", 0.0, saomega_circle},
        {6, "l1 co-isometry", 0.0, l1_coisometry},
        {7, "kernel greedy", 0.0, kernel_greedy},
        {8, "Rudin-Shapiro gap", 0.0, [](Rng) { return rudin_shapiro_gap(); }},
        {9, "non-sup game", 300.0, nonsup_run},
        {10, "eigen-free game", 600.0, [](Rng r) { return eigenfree_run(r); }},
        {10, "eigen-free toy game", 10.0, [](Rng r) { return eigenfree_run(r, true); }},
        {11, "commutant witness", 0.0, commutant_witness},
        {12, "triangularization", 0.0, triangularization},
    };
}

struct CriterionTiming {
    int id;
    std::string section;
    double seconds;
    bool over_budget;
};

// A criterion over its time budget fails; the report records only that the budget was exceeded.
inline Report run_acceptance(std::uint64_t seed, const std::function<void(const CriterionTiming&)>& progress = {}) {
    Report rep;
    rep.meta = make_meta(seed, {{"battery", "acceptance"}, {"seed", seed}});
    Rng master(seed);
    for (auto& c : acceptance_criteria()) {
        auto t0 = std::chrono::steady_clock::now();
        Section s;
        try {
            s = c.run(master.split(static_cast<std::uint64_t>(c.id)));
        } catch (const std::exception& e) {
            s = {c.name, Status::Fail, {{"error", e.what()}}};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool over = c.budget_s > 0.0 && secs > c.budget_s;
        s.records["criterion"] = c.id;
        if (c.budget_s > 0.0) s.records["budget_s"] = c.budget_s;
        if (over) {
            s.status = Status::Fail;
            s.records["over_budget"] = true;
        }
        if (progress) progress({c.id, s.name, secs, over});
        rep.sections.push_back(std::move(s));
    }
    return rep;
}

}  // namespace lplab
