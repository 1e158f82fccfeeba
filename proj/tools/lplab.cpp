#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lplab/acceptance.hpp"
#include "lplab/typicality.hpp"

using namespace lplab;
using nlohmann::json;

namespace {

// Bad flags, unreadable or malformed inputs: exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw UsageError("'" + path + "': " + e.what());
    }
}

cplx entry_from_json(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2) return {v[0].get<double>(), v[1].get<double>()};
    if (v.is_object()) return {v.value("re", 0.0), v.value("im", 0.0)};
    throw UsageError("matrix entry must be a number, [re, im] or {re, im}");
}

// {"rows": [[...], ...]} or a bare array of rows.
Mat matrix_from_json(const json& j) {
    const json& rows = j.is_object() ? j.at("rows") : j;
    if (!rows.is_array() || rows.empty() || !rows[0].is_array() || rows[0].empty())
        throw UsageError("matrix: expected a non-empty array of rows");
    Mat M(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw UsageError("matrix: ragged rows");
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            M(static_cast<Index>(i), static_cast<Index>(k)) = entry_from_json(rows[i][k]);
    }
    return M;
}

json matrix_to_json(const Mat& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Index k = 0; k < M.cols(); ++k) {
            if (M(i, k).imag() == 0.0)
                r.push_back(M(i, k).real());
            else
                r.push_back({M(i, k).real(), M(i, k).imag()});
        }
        rows.push_back(r);
    }
    return {{"rows", rows}};
}

PNorm pnorm_flag(const std::string& s) {
    try {
        return parse_pnorm(s);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) return;
    try {
        write_text(out, text);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void check_threads_env() {
    if (const char* env = std::getenv("LPLAB_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw UsageError("LPLAB_THREADS must be a positive integer");
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Common {
    std::uint64_t seed = 0;
    std::string out;
};

// ---------------------------------------------------------------------------
// subcommands

int cmd_norm(const Common& c, const std::string& matrix_path, const std::string& p) {
    const PNorm n = pnorm_flag(p);
    Mat M = matrix_from_json(read_json_file(matrix_path));
    auto cert = dense_op_norm(M, n);
    json j = {{"space", n.name()},
              {"rows", M.rows()},
              {"cols", M.cols()},
              {"value", cert.value},
              {"method", method_name(cert.method)},
              {"residual", cert.residual},
              {"converged", cert.converged},
              {"iterations", cert.iterations},
              {"witness", to_json(cert.witness)}};
    if (std::isfinite(cert.upper)) j["upper"] = cert.upper;
    bool ok = cert.converged;
    std::cout << "||M||_" << n.name() << " = " << fmt(cert.value) << "  (" << method_name(cert.method) << ")\n";
    if (std::isfinite(cert.upper)) std::cout << "upper bound " << fmt(cert.upper) << "\n";
    std::cout << "witness residual " << fmt(cert.residual) << "\n";
    if (M.rows() <= 3 && M.cols() <= 3) {
        auto o = op_norm_oracle(M, n);
        double err = std::abs(o.value - cert.value);
        bool agree = err <= ((n.is_c0() || n.p == 1.0) ? 1e-12 * std::max(1.0, o.value) : 1e-4);
        j["oracle"] = {{"value", o.value}, {"abs_diff", err}, {"agree", agree}};
        std::cout << "oracle " << fmt(o.value) << (agree ? "  agrees" : "  DISAGREES") << "\n";
        ok = ok && agree;
    }
    Report r;
    r.meta = make_meta(c.seed, {{"command", "norm"}, {"space", n.name()}, {"matrix", matrix_to_json(M)}});
    r.add("certificate", ok ? Status::Pass : Status::Fail, j);
    emit(c.out, dump_report(r));
    return exit_code(r);
}

int cmd_spectrum(const Common& c, const std::string& matrix_path) {
    Mat M = matrix_from_json(read_json_file(matrix_path));
    if (M.rows() != M.cols()) throw UsageError("spectrum: matrix must be square");
    auto pairs = eigs_dense(M);
    json ev = json::array();
    double rho = 0.0, worst = 0.0;
    bool ok = true;
    for (auto& e : pairs) {
        rho = std::max(rho, std::abs(e.lambda));
        worst = std::max(worst, e.residual);
        ok = ok && e.converged;
        ev.push_back({{"re", e.lambda.real()}, {"im", e.lambda.imag()}, {"residual", e.residual}});
        std::cout << fmt(e.lambda.real()) << (e.lambda.imag() < 0 ? " - " : " + ") << fmt(std::abs(e.lambda.imag()))
                  << "i   residual " << fmt(e.residual) << "\n";
    }
    std::cout << "spectral radius " << fmt(rho) << "\n";
    Report r;
    r.meta = make_meta(c.seed, {{"command", "spectrum"}, {"matrix", matrix_to_json(M)}});
    r.add("eigenvalues", ok ? Status::Pass : Status::Fail,
          {{"eigenvalues", ev}, {"spectral_radius", rho}, {"max_residual", worst}});
    emit(c.out, dump_report(r));
    return exit_code(r);
}

int cmd_matrix(const Common& c, Index dim, const std::string& p, double target) {
    if (dim < 1 || dim > 256) throw UsageError("matrix: --dim in 1..256");
    if (!(target > 0.0)) throw UsageError("matrix: --norm must be positive");
    const PNorm n = pnorm_flag(p);
    Rng rng(c.seed);
    Mat M = random_contraction(rng, dim, n, target);
    std::string text = matrix_to_json(M).dump(2) + "\n";
    if (c.out.empty())
        std::cout << text;
    else
        emit(c.out, text);
    return 0;
}

int cmd_construct(const Common& c, const std::string& kind, Index dim, const std::string& p, double eta,
                  const std::string& matrix_path) {
    Rng rng(c.seed);
    json rec = {{"kind", kind}};
    json op;
    std::vector<std::pair<std::string, bool>> checks;
    auto input = [&](const PNorm& n, double norm) {
        if (!matrix_path.empty()) return matrix_from_json(read_json_file(matrix_path));
        if (dim < 1 || dim > 64) throw UsageError("construct: --dim in 1..64");
        return random_contraction(rng, dim, n, norm);
    };
    const PNorm l1 = PNorm::Lp(1.0);
    if (kind == "coisometry-l1") {
        Mat A = input(l1, 0.9);
        if (A.rows() != A.cols()) throw UsageError("construct: square matrix required");
        const Index N = A.rows() - 1;
        auto T = build_coisometry_l1(StructuredOperator::from_dense(A, l1), N);
        double nv = op_norm(T, l1).value;
        checks.push_back({"norm == 1", std::abs(nv - 1.0) <= 1e-15});
        rec["N"] = N;
        rec["norm"] = nv;
        op = to_json(T);
    } else if (kind == "t1-coisometry-l1") {
        if (!matrix_path.empty()) throw UsageError("construct t1-coisometry-l1: random input only");
        if (dim < 1 || dim > 64) throw UsageError("construct: --dim in 1..64");
        auto A = StructuredOperator::from_dense(random_T1_l1_block(rng, dim, 0.7), l1);
        auto T = build_T1_coisometry_l1(A, dim - 1, GeometricEps{});
        double nv = column_l1_sup(T);
        checks.push_back({"norm == 1", std::abs(nv - 1.0) <= 1e-15});
        checks.push_back({"in T1 (300 columns)", in_T1(T, 300)});
        rec["N"] = dim - 1;
        rec["norm"] = nv;
        op = to_json(T);
    } else if (kind == "b-eta-delta") {
        const PNorm n = pnorm_flag(p);
        if (n.is_c0()) throw UsageError("construct b-eta-delta: needs an l_p space");
        // a given block is used as is; a random one is nudged until evenly distributed
        Mat A = matrix_path.empty() ? make_evenly_distributed(input(n, 0.5), n.p, rng) : input(n, 0.5);
        auto b = build_B_eta_delta(A, eta, n.p);
        checks.push_back({"||B|| == 1 (1e-6)", std::abs(b.norm - 1.0) <= 1e-6});
        checks.push_back({"||B u0|| == 1 (1e-9)", std::abs(b.norm_u0 - 1.0) <= 1e-9});
        checks.push_back({"evenly distributed", b.even.even});
        rec["delta"] = b.delta;
        rec["norm"] = b.norm;
        rec["gamma"] = b.even.gamma;
        op = {{"B", matrix_to_json(b.B)}, {"u0", matrix_to_json(b.u0)}};
    } else if (kind == "saomega") {
        const PNorm n = pnorm_flag(p);
        if (n.is_c0()) throw UsageError("construct saomega: needs an l_p space");
        Mat A = input(n, 0.9);
        if (A.rows() != A.cols() || A.rows() % 2 == 0) throw UsageError("construct saomega: odd square block");
        const Index N = (A.rows() - 1) / 2;
        const double nA = dense_op_norm(A, n).value, eps = 0.1;
        if (!(nA < 1.0)) throw UsageError("construct saomega: block norm must be < 1");
        double delta = small_weight_delta(eps, nA, n.p);
        WeightSeq w;
        w.lo = -(3 * N + 1);
        w.hi = N;
        for (Index j = w.lo; j <= w.hi; ++j) w.vals.push_back(delta * rng.uniform(0.01, 0.999));
        auto S = build_S_A_omega(A, w, n);
        double got = dense_op_norm(truncate(S, 200), n).value;
        double rhs = std::max(std::pow(std::pow(nA, n.p) + std::pow(eps, n.p), 1.0 / n.p), 1.0);
        checks.push_back({"||P_200 S P_200|| <= bound", got <= rhs + 1e-8});
        rec["delta"] = delta;
        rec["truncated_norm"] = got;
        rec["bound"] = rhs;
        op = to_json(S);
    } else if (kind == "commutant") {
        if (!matrix_path.empty()) throw UsageError("construct commutant: random input only");
        if (dim < 1 || dim > 8) throw UsageError("construct commutant: --dim in 1..8");
        auto w = build_commutant_witness(random_commutant_block(rng, dim), dim, c.seed + 1);
        const Index m = 3 * (dim + 2);
        checks.push_back({"Bezout residual < 1e-8", w.bezout_residual < 1e-8});
        checks.push_back({"Krylov rank full", krylov_rank(w.T, w.x0, m, m) == m});
        rec["bezout_residual"] = w.bezout_residual;
        json ls = json::array();
        for (auto l : w.lambdas) ls.push_back({l.real(), l.imag()});
        rec["lambdas"] = ls;
        rec["x0"] = to_json(w.x0);
        op = to_json(w.T);
    } else {
        throw UsageError("construct: unknown --kind '" + kind +
                         "' (coisometry-l1, t1-coisometry-l1, b-eta-delta, saomega, commutant)");
    }
    bool ok = true;
    json cj = json::object();
    for (auto& [name, pass] : checks) {
        std::cout << (pass ? "PASS " : "FAIL ") << name << "\n";
        cj[name] = pass;
        ok = ok && pass;
    }
    rec["checks"] = cj;
    rec["operator"] = op;
    Report r;
    r.meta = make_meta(c.seed, {{"command", "construct"}, {"kind", kind}, {"dim", dim}, {"p", p}, {"eta", eta}});
    r.add(kind, ok ? Status::Pass : Status::Fail, rec);
    emit(c.out, dump_report(r));
    return exit_code(r);
}

int cmd_game(const Common& c, const std::string& strategy, int rounds, bool toy, const std::string& params_path,
             const std::string& adversary) {
    GameOptions opt;
    if (strategy == "eigenfree")
        opt.strategy = StrategyKind::Eigenfree;
    else if (strategy == "nonsup")
        opt.strategy = StrategyKind::Nonsup;
    else
        throw UsageError("game: --strategy eigenfree|nonsup");
    if (rounds < 1 || rounds > 64) throw UsageError("game: --rounds in 1..64");
    if (toy && opt.strategy != StrategyKind::Eigenfree) throw UsageError("game: --toy applies to eigenfree");
    if (!params_path.empty()) {
        if (opt.strategy != StrategyKind::Eigenfree) throw UsageError("game: --params applies to eigenfree");
        try {
            opt.params = eigenfree_params_from_json(read_json_file(params_path));
        } catch (const json::exception& e) {
            throw UsageError(std::string("--params: ") + e.what());
        } catch (const PreconditionError& e) {
            throw UsageError(std::string("--params: ") + e.what());
        }
    }
    opt.rounds = rounds;
    opt.caps.toy = toy;
    Adversary adv;
    if (adversary == "random")
        adv = [](const BasicOpenSet& U, Rng& r) { return adversary_random(U, r); };
    else if (adversary == "pass-through")
        adv = adversary_pass_through;
    else
        throw UsageError("game: --adversary random|pass-through");

    Rng rng(c.seed);
    auto run = play_game(opening_random(rng), opt, adv, rng);
    auto T = assemble_limit(run);
    auto vr = opt.strategy == StrategyKind::Eigenfree ? verify_eigenfree_run(T, run) : verify_nonsup_run(T, run);

    for (auto& ch : vr.checks)
        std::cout << (ch.pass ? "PASS " : ch.informational ? "INFO " : "FAIL ") << ch.name
                  << (ch.k >= 0 ? " [k=" + std::to_string(ch.k) + "]" : "") << "  (" << ch.instances << ")\n";
    std::cout << strategy << ", " << rounds << " rounds: " << (vr.pass() ? "verified" : "VERIFICATION FAILED")
              << (run.toy ? ", NON-CERTIFIED (toy caps)" : "") << "\n";

    Report r;
    json cfg = {{"command", "game play"}, {"strategy", strategy}, {"rounds", rounds}, {"toy", toy},
                {"adversary", adversary}, {"params", to_json(opt.params)}};
    r.meta = make_meta(c.seed, cfg);
    r.add("transcript", Status::Info, to_json(run));
    r.add("verification", vr.pass() ? Status::Pass : Status::Fail, to_json(vr));
    emit(c.out, dump_report(r));
    return exit_code(r);
}

int cmd_mc(const Common& c, bool seed_given, const std::string& config_path, const std::string& csv_path,
           const std::string& p, Index dim) {
    json j = read_json_file(config_path);
    SuiteConfig suite;
    try {
        if (j.contains("experiments")) {
            suite = suite_config_from_json(j);
        } else {
            suite.seed = j.value("seed", std::uint64_t{0});
            suite.experiments.push_back(experiment_config_from_json(j, suite.seed));
        }
        for (auto& e : suite.experiments) {
            if (seed_given) e.seed = c.seed;
            if (!p.empty()) e.space = pnorm_flag(p);
            if (dim > 0) e.dim = dim;
            e.validate();
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    } catch (const PreconditionError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    if (seed_given) suite.seed = c.seed;

    Report r;
    r.meta = make_meta(suite.seed, to_json(suite));
    std::string csv;
    for (auto& e : suite.experiments) {
        Section s;
        try {
            if (e.experiment == Experiment::ApSpectrumGrid && !csv_path.empty()) {
                ApGridResult t;
                s = exp_apspectrum_grid(e, &t);
                csv = apgrid_csv(t);
            } else {
                s = run_experiment(e);
            }
        } catch (const std::exception& ex) {
            s = {experiment_name(e.experiment), Status::Fail, {{"error", ex.what()}}};
        }
        s.records["label"] = "illustrative";
        s.records["config"] = to_json(e);
        std::cout << status_name(s.status) << "  " << s.name << "  (" << e.space.name() << ", dim " << e.dim << ", "
                  << e.samples << " samples)\n";
        r.sections.push_back(std::move(s));
    }
    emit(c.out, dump_report(r));
    if (!csv_path.empty()) {
        if (csv.empty()) throw UsageError("--csv needs an apspectrum_grid experiment");
        emit(csv_path, csv);
    }
    return exit_code(r);
}

int cmd_verify_all(const Common& c) {
    auto r = run_acceptance(c.seed, [](const CriterionTiming& t) {
        std::cout << "criterion " << t.id << "  " << t.section << "  " << fmt(t.seconds) << " s"
                  << (t.over_budget ? "  OVER BUDGET" : "") << std::endl;
    });
    for (auto& s : r.sections)
        std::cout << (s.status == Status::Pass ? "PASS " : "FAIL ") << s.records.value("criterion", 0) << "  " << s.name
                  << "\n";
    std::cout << (r.failed() ? "acceptance battery FAILED" : "acceptance battery passed") << "\n";
    emit(c.out, dump_report(r));
    return exit_code(r);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lplab: contractions on l_p and c_0 sequence spaces"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Common common;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--seed", common.seed, "64-bit seed");
        s->add_option("--out", common.out, "machine report path (JSON)");
    };

    std::string matrix_path, p = "2", kind, params_path, strategy, config_path, csv_path, adversary = "random";
    std::string mc_p;
    Index dim = 3, mc_dim = 0;
    int rounds = 3;
    bool toy = false;
    double eta = 0.5, target = 1.0;

    auto* norm = app.add_subcommand("norm", "operator norm certificate of a dense matrix");
    add_common(norm);
    norm->add_option("--matrix", matrix_path, "matrix JSON")->required();
    norm->add_option("--p", p, "exponent or c0");

    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of a dense matrix");
    add_common(spectrum);
    spectrum->add_option("--matrix", matrix_path, "matrix JSON")->required();

    auto* matrix = app.add_subcommand("matrix", "random matrix with prescribed operator norm");
    add_common(matrix);
    matrix->add_option("--dim", dim);
    matrix->add_option("--p", p, "exponent or c0");
    matrix->add_option("--norm", target, "operator norm of the sample");

    auto* construct = app.add_subcommand("construct", "build one of the library's operators");
    add_common(construct);
    construct->add_option("--kind", kind, "coisometry-l1 | t1-coisometry-l1 | b-eta-delta | saomega | commutant")
        ->required();
    construct->add_option("--dim", dim);
    construct->add_option("--p", p, "exponent or c0");
    construct->add_option("--eta", eta);
    construct->add_option("--matrix", matrix_path, "input block instead of a random one");

    auto* game = app.add_subcommand("game", "Banach-Mazur game runs");
    game->require_subcommand(1);
    auto* play = game->add_subcommand("play", "play against Player I and verify the limit");
    add_common(play);
    play->add_option("--strategy", strategy, "eigenfree | nonsup")->required();
    play->add_option("--rounds", rounds);
    play->add_option("--params", params_path, "eigen-free parameter JSON");
    play->add_option("--adversary", adversary, "random | pass-through");
    play->add_flag("--toy", toy, "cap L_k and R_k; result is NON-CERTIFIED");

    auto* mc = app.add_subcommand("mc", "Monte Carlo experiments");
    add_common(mc);
    mc->add_option("--config", config_path, "ExperimentConfig or suite JSON")->required();
    mc->add_option("--csv", csv_path, "grid table for apspectrum_grid");
    mc->add_option("--p", mc_p, "override space");
    mc->add_option("--dim", mc_dim, "override dimension");

    auto* verify = app.add_subcommand("verify-all", "run the acceptance battery");
    add_common(verify);

    if (argc > 1 && argv[1][0] != '-') {
        bool known = false;
        for (auto* s : app.get_subcommands({})) known = known || s->get_name() == argv[1];
        if (!known) {
            std::cerr << "lplab: unknown subcommand '" << argv[1] << "'\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        check_threads_env();
        if (*norm) return cmd_norm(common, matrix_path, p);
        if (*spectrum) return cmd_spectrum(common, matrix_path);
        if (*matrix) return cmd_matrix(common, dim, p, target);
        if (*construct) return cmd_construct(common, kind, dim, p, eta, matrix_path);
        if (*play) return cmd_game(common, strategy, rounds, toy, params_path, adversary);
        if (*mc) return cmd_mc(common, mc->count("--seed") > 0, config_path, csv_path, mc_p, mc_dim);
        if (*verify) return cmd_verify_all(common);
    } catch (const UsageError& e) {
        std::cerr << "lplab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lplab: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
