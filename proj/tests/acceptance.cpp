// Acceptance runner: `lplab verify-all --seed 7` twice, one PASS/FAIL line per criterion.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include "lplab/report.hpp"

namespace fs = std::filesystem;
using namespace lplab;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

int run_cli(const std::string& cli, const fs::path& out, const fs::path& log) {
    std::string cmd = "\"" + cli + "\" verify-all --seed 7 --out \"" + out.string() + "\" > \"" + log.string() + "\" 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kTitles[14] = {"",
                           "norm engine agrees with the oracle",
                           "Kan inequality, strict and reversed branches",
                           "B_eta_delta has norm 1 with norming u0, evenly distributed",
                           "localization bound near B",
                           "S_A_omega: no eigenvalue on the closed-disk grid, norm bound",
                           "l1 co-isometry and T1 variant preserve dual norms",
                           "kernel vector greedy through l = 20",
                           "Rudin-Shapiro gap on l1",
                           "Banach-Mazur non-supercyclic run, K = 3",
                           "Banach-Mazur eigen-free run, K = 2, and toy K = 4",
                           "commutant witness",
                           "Gram-Schmidt triangularization",
                           "verify-all --seed 7 is byte-for-byte deterministic"};

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <path-to-lplab> <work-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path dir = argv[2];
    fs::create_directories(dir);
    const fs::path a = dir / "verify_all_1.json", b = dir / "verify_all_2.json";

    int rc1 = run_cli(cli, a, dir / "verify_all_1.log");
    std::cout << slurp(dir / "verify_all_1.log");
    int rc2 = run_cli(cli, b, dir / "verify_all_2.log");

    std::map<int, bool> pass;
    std::map<int, std::string> why;
    for (int c = 1; c <= 12; ++c) pass[c] = false, why[c] = "missing from report";
    try {
        auto rep = report_from_json(nlohmann::json::parse(slurp(a)));
        std::map<int, int> seen;
        for (auto& s : rep.sections) {
            int c = s.records.value("criterion", 0);
            if (c < 1 || c > 12) continue;
            bool ok = s.status == Status::Pass;
            pass[c] = seen[c]++ ? pass[c] && ok : ok;
            if (!ok) why[c] = s.name + ": " + status_name(s.status);
            else if (pass[c]) why[c].clear();
        }
    } catch (const std::exception& e) {
        for (int c = 1; c <= 12; ++c) why[c] = std::string("unreadable report: ") + e.what();
    }

    const std::string ra = slurp(a), rb = slurp(b);
    pass[13] = rc1 != 2 && rc2 != 2 && !ra.empty() && ra == rb;
    if (!pass[13]) why[13] = ra.empty() ? "no report" : "reports differ";

    int failed = 0;
    std::cout << "\n";
    for (int c = 1; c <= 13; ++c) {
        if (!pass[c]) ++failed;
        std::cout << (pass[c] ? "PASS" : "FAIL") << "  " << c << "  " << kTitles[c];
        if (!pass[c]) std::cout << "  (" << why[c] << ")";
        std::cout << "\n";
    }
    std::cout << "verify-all exit codes: " << rc1 << ", " << rc2 << "\n";
    std::cout << (13 - failed) << "/13 criteria pass\n";
    return failed == 0 && rc1 == 0 ? 0 : 1;
}
