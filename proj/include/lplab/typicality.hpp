#pragma once

#include <algorithm>

#include "report.hpp"
#include "samplers.hpp"
#include "spectral.hpp"

namespace lplab {

// Monte-Carlo experiments on sampled contractions. Outputs are illustrative statistics; Baire-category
// statements are not measurable and nothing here is evidence for them.

enum class Experiment { OrbitDecay, EigenStats, IsometryDefect, ApSpectrumGrid, DisjointSupport };

inline const char* experiment_name(Experiment e) {
    switch (e) {
        case Experiment::OrbitDecay: return "orbit_decay";
        case Experiment::EigenStats: return "eigen_stats";
        case Experiment::IsometryDefect: return "isometry_defect";
        case Experiment::ApSpectrumGrid: return "apspectrum_grid";
        default: return "disjoint_support";
    }
}

inline Experiment experiment_from_name(const std::string& s) {
    for (auto e : {Experiment::OrbitDecay, Experiment::EigenStats, Experiment::IsometryDefect,
                   Experiment::ApSpectrumGrid, Experiment::DisjointSupport})
        if (s == experiment_name(e)) return e;
    throw PreconditionError("unknown experiment '" + s + "'");
}

// "c0", "l3", "l1.5" or a bare number.
inline PNorm parse_pnorm(const std::string& s) {
    if (s == "c0") return PNorm::C0();
    std::string t = !s.empty() && s[0] == 'l' ? s.substr(1) : s;
    char* end = nullptr;
    double p = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0') throw PreconditionError("cannot parse norm '" + s + "'");
    return PNorm::Lp(p);
}

struct ExperimentConfig {
    PNorm space = PNorm::Lp(2.0);
    Index dim = 8;
    Index samples = 16;
    std::uint64_t seed = 0;
    Experiment experiment = Experiment::OrbitDecay;

    void validate() const {
        require(dim >= 1 && dim <= 256, "ExperimentConfig: 1 <= dim <= 256");
        require(samples >= 0 && samples <= 100000, "ExperimentConfig: 0 <= samples <= 1e5");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"experiment", experiment_name(c.experiment)}, {"space", c.space.name()}, {"dim", c.dim},
            {"samples", c.samples}, {"seed", c.seed}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, std::uint64_t default_seed = 0) {
    ExperimentConfig c;
    c.experiment = experiment_from_name(j.at("experiment").get<std::string>());
    if (j.contains("space")) {
        auto& s = j.at("space");
        c.space = s.is_number() ? PNorm::Lp(s.get<double>()) : parse_pnorm(s.get<std::string>());
    }
    c.dim = j.value("dim", c.dim);
    c.samples = j.value("samples", c.samples);
    c.seed = j.value("seed", default_seed);
    c.validate();
    return c;
}

// Complex Gaussian matrix divided by its norm certificate times (1 + 1e-9).
inline Mat sample_contraction(Index dim, const PNorm& n, Rng& rng) {
    require(dim >= 1, "sample_contraction: dim >= 1");
    Mat M = random_dense(rng, dim, dim);
    return M / (dense_op_norm(M, n).value * (1.0 + 1e-9));
}

// d(T) = min_j |<e_0*, T e_j>| |<e_1*, T e_j>| over the columns of T.
inline double isometry_defect(const Mat& T) {
    require(T.rows() >= 2, "isometry_defect: at least two rows");
    double d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < T.cols(); ++j) d = std::min(d, std::abs(T(0, j)) * std::abs(T(1, j)));
    return d;
}

inline double isometry_defect(const StructuredOperator& T, Index D) { return isometry_defect(truncate(T, D)); }

// T_N = P_N A P_N (+) backward shift on span{e_j : j > N}.
inline StructuredOperator apspectrum_TN(const Mat& A, Index N, const PNorm& n) {
    require(N >= 0, "apspectrum_TN: N >= 0");
    Mat P = Mat::Zero(N + 1, N + 1);
    const Index m = std::min<Index>(N + 1, A.rows());
    P.topLeftCorner(m, m) = A.topLeftCorner(m, m);
    auto T = StructuredOperator::from_dense(P, n);
    T.block.cols[N + 1];
    T.rules.push_back({N + 2, 1, -1, {{RowMap::affine(1, -1), 1.0, 0.0, 0.0}}});
    return T;
}

inline std::vector<cplx> disk_grid(int radial = 20, int angular = 20) {
    std::vector<cplx> g;
    for (int a = 0; a < radial; ++a)
        for (int b = 0; b < angular; ++b)
            g.push_back(std::polar(static_cast<double>(a) / (radial - 1), 2.0 * kPi * b / angular));
    return g;
}

namespace detail {

inline nlohmann::json quantiles(std::vector<double> v) {
    if (v.empty()) return nlohmann::json::object();
    std::sort(v.begin(), v.end());
    auto q = [&](double t) { return v[static_cast<std::size_t>(t * static_cast<double>(v.size() - 1) + 0.5)]; };
    double mean = 0.0;
    for (double x : v) mean += x;
    return {{"min", v.front()}, {"q25", q(0.25)}, {"median", q(0.5)}, {"q75", q(0.75)}, {"max", v.back()},
            {"mean", mean / static_cast<double>(v.size())}};
}

struct SampleOut {
    std::vector<double> values;  // experiment-specific scalars
    bool norm_ok = true;
    bool check_ok = true;
    std::string error;
};

template <class Fn>
std::vector<SampleOut> run_samples(const ExperimentConfig& cfg, Fn&& fn) {
    std::vector<SampleOut> out(static_cast<std::size_t>(cfg.samples));
    Rng base = Rng(cfg.seed).split(static_cast<std::uint64_t>(cfg.experiment) + 1);
    parallel_for(out.size(), [&](std::size_t i) {
        Rng rng = base.split(i);
        try {
            Mat T = sample_contraction(cfg.dim, cfg.space, rng);
            out[i].norm_ok = dense_op_norm(T, cfg.space).value <= 1.0 + 1e-9;
            fn(T, rng, out[i]);
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

inline Section finish(const ExperimentConfig& cfg, const std::vector<SampleOut>& s, nlohmann::json rec,
                      const char* check_name) {
    Index norm_bad = 0, check_bad = 0;
    nlohmann::json errors = nlohmann::json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].error.empty()) {
            errors.push_back({{"sample", i}, {"error", s[i].error}});
            continue;
        }
        norm_bad += !s[i].norm_ok;
        check_bad += !s[i].check_ok;
    }
    rec["config"] = to_json(cfg);
    rec["label"] = "illustrative";
    rec["norm_violations"] = norm_bad;
    rec[check_name] = check_bad;
    rec["errors"] = errors;
    Status st = norm_bad || check_bad || !errors.empty() ? Status::Fail : Status::Pass;
    return {std::string("exp_") + experiment_name(cfg.experiment), st, rec};
}

inline std::vector<double> column(const std::vector<SampleOut>& s, std::size_t k) {
    std::vector<double> v;
    for (auto& o : s)
        if (o.error.empty() && k < o.values.size()) v.push_back(o.values[k]);
    return v;
}

}  // namespace detail

// ||T^n e_0||, n = 0..steps.
inline std::vector<double> orbit_norms(const Mat& T, const PNorm& n, Index steps) {
    Vec x = Vec::Zero(T.cols());
    x(0) = 1.0;
    std::vector<double> out{1.0};
    for (Index k = 1; k <= steps; ++k) {
        x = T * x;
        out.push_back(vec_norm(x, n));
    }
    return out;
}

inline bool non_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] * (1.0 + 1e-12)) return false;
    return true;
}

// ||T^n e_0|| for n <= 200; non-increasing for every contraction.
inline Section exp_orbit_decay(const ExperimentConfig& cfg, Index steps = 200) {
    cfg.validate();
    auto s = detail::run_samples(cfg, [&](const Mat& T, Rng&, detail::SampleOut& o) {
        auto v = orbit_norms(T, cfg.space, steps);
        o.check_ok = non_increasing(v);
        o.values = {v.back()};
    });
    auto fin = detail::column(s, 0);
    Index below = 0;
    for (double v : fin) below += v < 0.01;
    nlohmann::json rec = {{"steps", steps},
                          {"final_norm", detail::quantiles(fin)},
                          {"fraction_below_0.01", fin.empty() ? 0.0 : static_cast<double>(below) / fin.size()}};
    return detail::finish(cfg, s, rec, "monotonicity_violations");
}

inline Section exp_eigen_stats(const ExperimentConfig& cfg) {
    cfg.validate();
    auto s = detail::run_samples(cfg, [&](const Mat& T, Rng&, detail::SampleOut& o) {
        auto e = eigs_dense_raw(T);
        double r = 0.0, mean = 0.0;
        Index big = 0;
        for (auto l : e.values) {
            r = std::max(r, std::abs(l));
            mean += std::abs(l);
            big += std::abs(l) > 0.9;
        }
        o.check_ok = r <= 1.0 + 1e-8;
        o.values = {r, mean / static_cast<double>(e.values.size()), static_cast<double>(big) / e.values.size()};
    });
    nlohmann::json rec = {{"spectral_radius", detail::quantiles(detail::column(s, 0))},
                          {"mean_modulus", detail::quantiles(detail::column(s, 1))},
                          {"fraction_modulus_above_0.9", detail::quantiles(detail::column(s, 2))}};
    return detail::finish(cfg, s, rec, "spectral_radius_violations");
}

inline void require_disjoint_support_space(const PNorm& n, const char* who) {
    require(n.is_c0() || (n.p != 2.0 && n.p != 1.0),
            std::string(who) + ": needs p != 2; p = 1 is excluded (the dual is l_inf)");
}

inline Section exp_isometry_defect(const ExperimentConfig& cfg) {
    cfg.validate();
    require_disjoint_support_space(cfg.space, "exp_isometry_defect");
    require(cfg.dim >= 2, "exp_isometry_defect: dim >= 2");
    auto s = detail::run_samples(cfg, [&](const Mat& T, Rng&, detail::SampleOut& o) {
        o.values = {isometry_defect(T)};
    });
    auto d = detail::column(s, 0);
    Index pos = 0;
    for (double v : d) pos += v > 0.0;
    nlohmann::json rec = {{"defect", detail::quantiles(d)},
                          {"fraction_positive", d.empty() ? 0.0 : static_cast<double>(pos) / d.size()}};
    return detail::finish(cfg, s, rec, "check_violations");
}

// Rows T* e_0*, T* e_1* of an l_q isometry have disjoint supports, so
// ||r0 + r1||_q^q = ||r0||_q^q + ||r1||_q^q; both the overlap and the additivity defect are reported.
inline Section exp_disjoint_support(const ExperimentConfig& cfg) {
    cfg.validate();
    require_disjoint_support_space(cfg.space, "exp_disjoint_support");
    require(cfg.dim >= 2, "exp_disjoint_support: dim >= 2");
    const double q = cfg.space.conj();
    auto s = detail::run_samples(cfg, [&](const Mat& T, Rng&, detail::SampleOut& o) {
        double overlap = 0.0, a = 0.0, b = 0.0, ab = 0.0;
        for (Index j = 0; j < T.cols(); ++j) {
            double x = std::abs(T(0, j)), y = std::abs(T(1, j));
            overlap = std::max(overlap, x * y);
            a += std::pow(x, q);
            b += std::pow(y, q);
            ab += std::pow(std::abs(T(0, j) + T(1, j)), q);
        }
        double defect = std::abs(ab - a - b) / std::max(1e-300, ab + a + b);
        // disjoint rows would force zero defect; flag samples where the two routes disagree
        o.check_ok = !(overlap == 0.0 && defect > 1e-12);
        o.values = {overlap, defect};
    });
    auto ov = detail::column(s, 0), de = detail::column(s, 1);
    Index pos = 0, pos2 = 0;
    for (double v : ov) pos += v > 0.0;
    for (double v : de) pos2 += v > 1e-12;
    nlohmann::json rec = {{"q", q},
                          {"overlap", detail::quantiles(ov)},
                          {"additivity_defect", detail::quantiles(de)},
                          {"fraction_overlapping", ov.empty() ? 0.0 : static_cast<double>(pos) / ov.size()},
                          {"fraction_non_additive", de.empty() ? 0.0 : static_cast<double>(pos2) / de.size()}};
    return detail::finish(cfg, s, rec, "route_disagreements");
}

struct ApGridResult {
    std::vector<cplx> grid;
    std::vector<double> gains;  // max over samples at each grid point
};

inline Section exp_apspectrum_grid(const ExperimentConfig& cfg, ApGridResult* table = nullptr, Index D = -1) {
    cfg.validate();
    const auto grid = disk_grid();
    if (D < 0) D = std::min<Index>(512, cfg.dim + 40);
    std::vector<std::vector<double>> per(static_cast<std::size_t>(cfg.samples));
    auto s = detail::run_samples(cfg, [&](const Mat& A, Rng& rng, detail::SampleOut& o) {
        auto T = apspectrum_TN(A, cfg.dim - 1, cfg.space);
        auto Aop = StructuredOperator::from_dense(A, cfg.space);
        o.check_ok = sot_ball_member(T, Aop, cfg.dim - 1, 1e-12, cfg.space);
        std::vector<double> g(grid.size());
        double mx = 0.0, mx_in = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            g[i] = min_gain(T, grid[i], cfg.space, D, rng.next());
            mx = std::max(mx, g[i]);
            if (std::abs(grid[i]) <= 0.9) mx_in = std::max(mx_in, g[i]);
        }
        o.values = {mx, mx_in};
        for (std::size_t i = 0; i < grid.size(); ++i) o.values.push_back(g[i]);
    });
    if (table) {
        table->grid = grid;
        table->gains.assign(grid.size(), 0.0);
        for (auto& o : s)
            if (o.error.empty())
                for (std::size_t i = 0; i < grid.size(); ++i)
                    table->gains[i] = std::max(table->gains[i], o.values[2 + i]);
    }
    nlohmann::json rec = {{"grid", "20 moduli a/19 x 20 phases 2 pi b/20"},
                          {"window_D", D},
                          {"max_gain", detail::quantiles(detail::column(s, 0))},
                          {"max_gain_modulus_le_0.9", detail::quantiles(detail::column(s, 1))}};
    return detail::finish(cfg, s, rec, "sot_membership_failures");
}

inline std::string apgrid_csv(const ApGridResult& t) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t.grid.size(); ++i)
        rows.push_back({t.grid[i].real(), t.grid[i].imag(), std::abs(t.grid[i]), t.gains[i]});
    return csv_table({"re", "im", "modulus", "max_min_gain"}, rows);
}

inline Section run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::OrbitDecay: return exp_orbit_decay(cfg);
        case Experiment::EigenStats: return exp_eigen_stats(cfg);
        case Experiment::IsometryDefect: return exp_isometry_defect(cfg);
        case Experiment::ApSpectrumGrid: return exp_apspectrum_grid(cfg);
        default: return exp_disjoint_support(cfg);
    }
}

struct SuiteConfig {
    std::uint64_t seed = 0;
    std::vector<ExperimentConfig> experiments;
};

inline nlohmann::json to_json(const SuiteConfig& s) {
    nlohmann::json e = nlohmann::json::array();
    for (auto& c : s.experiments) e.push_back(to_json(c));
    return {{"seed", s.seed}, {"experiments", e}};
}

inline SuiteConfig suite_config_from_json(const nlohmann::json& j) {
    SuiteConfig s;
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("experiments"))
        for (auto& e : j.at("experiments")) s.experiments.push_back(experiment_config_from_json(e, s.seed));
    return s;
}

// Experiments that throw (e.g. precondition) become failed sections; the suite continues.
inline Report run_suite(const SuiteConfig& cfg) {
    Report r;
    r.meta = make_meta(cfg.seed, to_json(cfg));
    for (auto& e : cfg.experiments) {
        try {
            r.sections.push_back(run_experiment(e));
        } catch (const std::exception& ex) {
            r.add(std::string("exp_") + experiment_name(e.experiment), Status::Fail,
                  {{"config", to_json(e)}, {"error", ex.what()}});
        }
    }
    return r;
}

}  // namespace lplab
