#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "lplab/typicality.hpp"

using namespace lplab;

TEST_CASE("sample_contraction") {
    Rng a(12), b(12);
    CHECK(sample_contraction(4, PNorm::Lp(3.0), a) == sample_contraction(4, PNorm::Lp(3.0), b));
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        PNorm n = PNorm::Lp(p);
        Rng rng(static_cast<std::uint64_t>(10 * p));
        for (int s = 0; s < 100; ++s) {
            Index d = 1 + s % 3;
            Mat T = sample_contraction(d, n, rng);
            CHECK(dense_op_norm(T, n).value <= 1.0 + 1e-12);
            CHECK(op_norm_oracle(T, n).value <= 1.0 + 1e-4);
            double r = 0.0;
            for (auto l : eigs_dense_raw(T).values) r = std::max(r, std::abs(l));
            CHECK(r <= 1.0 + 1e-8);
        }
    }
}

TEST_CASE("orbit norms") {
    auto z = orbit_norms(Mat::Zero(3, 3), PNorm::Lp(2.0), 5);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == 0.0);
    Mat S = Mat::Zero(4, 4);
    for (Index i = 0; i + 1 < 4; ++i) S(i + 1, i) = 1.0;
    auto s = orbit_norms(S, PNorm::Lp(3.0), 6);
    CHECK(s[3] == 1.0);
    CHECK(s[4] == 0.0);
    CHECK(non_increasing(s));
    CHECK_FALSE(non_increasing({1.0, 0.5, 0.6}));

    ExperimentConfig c;
    c.experiment = Experiment::OrbitDecay;
    c.space = PNorm::Lp(1.5);
    c.dim = 6;
    c.samples = 30;
    auto sec = exp_orbit_decay(c);
    CHECK(sec.status == Status::Pass);
    CHECK(sec.records["monotonicity_violations"] == 0);
}

TEST_CASE("isometry defect") {
    CHECK(isometry_defect(StructuredOperator::forward_shift(PNorm::Lp(3.0)), 10) == 0.0);
    Rng rng(2);
    Index pos = 0;
    for (int s = 0; s < 200; ++s) pos += isometry_defect(sample_contraction(5, PNorm::Lp(3.0), rng)) > 0.0;
    CHECK(pos == 200);

    ExperimentConfig c;
    c.experiment = Experiment::IsometryDefect;
    c.space = PNorm::Lp(1.0);
    CHECK_THROWS_AS(exp_isometry_defect(c), PreconditionError);
    c.space = PNorm::Lp(2.0);
    CHECK_THROWS_AS(exp_isometry_defect(c), PreconditionError);
    c.space = PNorm::C0();
    auto sec = exp_isometry_defect(c);
    CHECK(sec.status == Status::Pass);
    CHECK(sec.records["fraction_positive"].get<double>() == 1.0);
}

TEST_CASE("disjoint support: overlap and additivity agree") {
    ExperimentConfig c;
    c.experiment = Experiment::DisjointSupport;
    c.space = PNorm::Lp(3.0);
    c.dim = 5;
    c.samples = 40;
    auto sec = exp_disjoint_support(c);
    CHECK(sec.status == Status::Pass);
    CHECK(sec.records["q"].get<double>() == doctest::Approx(1.5));
    CHECK(sec.records["fraction_non_additive"].get<double>() == 1.0);
    c.space = PNorm::Lp(1.0);
    CHECK_THROWS_AS(exp_disjoint_support(c), PreconditionError);
}

TEST_CASE("apspectrum: T_N structure and grid") {
    Mat A = Mat::Identity(3, 3) * 0.5;
    auto T = apspectrum_TN(A, 2, PNorm::Lp(2.0));
    CHECK(T.column(3).empty());
    CHECK(T.column(4).get(3) == cplx(1.0));
    CHECK(T.column(1).get(1) == cplx(0.5));
    CHECK(sot_ball_member(T, StructuredOperator::from_dense(A, PNorm::Lp(2.0)), 2, 1e-12, PNorm::Lp(2.0)));
    CHECK(disk_grid().size() == 400);

    ExperimentConfig c;
    c.experiment = Experiment::ApSpectrumGrid;
    c.dim = 3;
    c.samples = 2;
    ApGridResult table;
    auto sec = exp_apspectrum_grid(c, &table, 3 + 80);
    CHECK(sec.status == Status::Pass);
    CHECK(sec.records["max_gain_modulus_le_0.9"]["max"].get<double>() <= 1e-3);
    CHECK(table.gains.size() == 400);
    auto csv = apgrid_csv(table);
    CHECK(csv.rfind("re,im,modulus,max_min_gain\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 401);
}

TEST_CASE("run_suite: empty, deterministic, errors contained") {
    SuiteConfig empty;
    CHECK(run_suite(empty).sections.empty());

    auto cfg = suite_config_from_json(nlohmann::json::parse(R"({
        "seed": 5,
        "experiments": [
            {"experiment": "orbit_decay", "space": "l3", "dim": 6, "samples": 8},
            {"experiment": "eigen_stats", "space": 1.5, "dim": 6, "samples": 8},
            {"experiment": "isometry_defect", "space": "l1", "dim": 6, "samples": 8}
        ]})"));
    auto r1 = run_suite(cfg), r2 = run_suite(cfg);
    CHECK(dump_report(r1) == dump_report(r2));
    REQUIRE(r1.sections.size() == 3);
    CHECK(r1.sections[0].status == Status::Pass);
    CHECK(r1.sections[2].status == Status::Fail);
    CHECK(r1.sections[2].records.contains("error"));
    CHECK(exit_code(r1) == 1);
    CHECK(r1.meta.seed == 5);
    CHECK(r1.meta.config_hash == config_hash(to_json(cfg)));

    CHECK_THROWS_AS(suite_config_from_json(nlohmann::json::parse(R"({"experiments":[{"experiment":"nope"}]})")),
                    PreconditionError);
    CHECK_THROWS_AS(suite_config_from_json(nlohmann::json::parse(R"({"experiments":[{"experiment":"orbit_decay","dim":300}]})")),
                    PreconditionError);
}

TEST_CASE("run_suite: four experiments at dim 40 within budget") {
    SuiteConfig cfg;
    cfg.seed = 1;
    for (auto e : {Experiment::OrbitDecay, Experiment::EigenStats, Experiment::IsometryDefect,
                   Experiment::ApSpectrumGrid}) {
        ExperimentConfig c;
        c.experiment = e;
        c.space = PNorm::Lp(3.0);
        c.dim = 40;
        c.samples = e == Experiment::ApSpectrumGrid ? 1 : 20;
        c.seed = cfg.seed;
        cfg.experiments.push_back(c);
    }
    auto t0 = std::chrono::steady_clock::now();
    auto r = run_suite(cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 60.0);
    CHECK_FALSE(r.failed());
}

TEST_CASE("report serialization") {
    Report r;
    r.meta = make_meta(42, {{"b", 1}, {"a", 2}});
    r.add("x", Status::Pass, {{"v", 0.1}, {"w", {1, 2, 3}}});
    r.add("y", Status::Info);
    auto back = report_from_json(nlohmann::json::parse(dump_report(r)));
    CHECK(dump_report(back) == dump_report(r));
    CHECK(exit_code(r) == 0);
    r.add("z", Status::Fail);
    CHECK(exit_code(r) == 1);
    // key order does not change the hash
    CHECK(config_hash(nlohmann::json::parse(R"({"a":1,"b":[1,2]})")) ==
          config_hash(nlohmann::json::parse(R"({"b":[1,2],"a":1})")));
    CHECK(config_hash({{"a", 1}}) != config_hash({{"a", 2}}));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK_THROWS_AS(status_from_name("maybe"), PreconditionError);
}
