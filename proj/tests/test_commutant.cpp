#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lplab/commutant.hpp"
#include "lplab/samplers.hpp"

using namespace lplab;

namespace {

Mat example_block() {
    // B_N = [[1/2, 0], [1/10, 1/3]], b_N = 1/2
    Mat B = Mat::Zero(3, 2);
    B(0, 0) = 0.5;
    B(1, 0) = 0.1;
    B(1, 1) = 1.0 / 3.0;
    B(2, 1) = 0.5;
    return B;
}

void check_witness(const CommutantWitness& w) {
    CHECK(w.bezout_residual < 1e-8);
    CHECK(w.division_remainder < 1e-8);
    CHECK(w.b_N > 0.0);
    CHECK(w.s.size() <= static_cast<std::size_t>(w.N + 1));
    for (std::size_t n = 0; n < w.lambdas.size(); ++n) {
        CHECK(std::abs(poly_eval(w.p, w.lambdas[n])) < 1e-12);
        CHECK(std::abs(poly_eval(w.q, w.lambdas[n])) > 1e-12);
        CHECK(std::abs(w.V(0, static_cast<Index>(n))) > 1e-8);
        CHECK(std::abs(w.betas[n]) > 1e-8);
    }
    for (cplx z : {cplx(0.0), cplx(0.0, 0.3), cplx(-0.5)}) {
        double res = 0.0;
        auto f = eval_f_w(w, z, 200, &res);
        CHECK(res < 1e-8);
        CHECK(std::abs(pair(f, w.x0) - 1.0) < 1e-8);
        CHECK(std::abs(pair(f, SpVector::basis(w.N + 1)) - poly_eval(w.p, z)) < 1e-12);
        CHECK(std::abs(pair(f, SpVector::basis(0)) - poly_eval(w.q, z)) < 1e-10);
    }
    const Index m = 3 * (w.N + 2);
    CHECK(krylov_rank(w.T, w.x0, m, m) == m);
}

}  // namespace

TEST_CASE("gram_schmidt_triangularize leaves T1 matrices fixed") {
    Rng rng(31);
    for (int t = 0; t < 5; ++t) {
        Mat T = random_T1_real(rng, 20);
        Vec e0 = Vec::Zero(20);
        e0(0) = 1.0;
        auto tr = gram_schmidt_triangularize(T, e0);
        CHECK((tr.R - T).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(tr.unitarity <= 1e-10);
    }
}

TEST_CASE("gram_schmidt_triangularize on generic contractions") {
    Rng rng(32);
    for (int t = 0; t < 5; ++t) {
        Mat T = random_contraction(rng, 20, PNorm::Lp(2.0));
        Vec e0 = Vec::Zero(20);
        e0(0) = 1.0;
        auto tr = gram_schmidt_triangularize(T, e0);
        CHECK(is_upper_hessenberg_positive(tr.R, 1e-12));
        CHECK(tr.unitarity <= 1e-10);
        Mat direct = tr.U * T * tr.U.adjoint();
        CHECK((direct - tr.R).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(tr.min_subdiag > 0.0);
    }
    Vec e0 = Vec::Zero(4);
    e0(0) = 1.0;
    CHECK_THROWS_AS(gram_schmidt_triangularize(Mat::Identity(4, 4), e0), KrylovDegenerate);
    CHECK_THROWS_AS(gram_schmidt_triangularize(Mat::Identity(4, 4), Vec::Zero(4)), PreconditionError);
}

TEST_CASE("commutant witness: eigenvalues 1/2 and 1/3") {
    auto w = build_commutant_witness(example_block(), 1);
    CHECK(w.retries == 0);
    std::vector<double> ls;
    for (auto l : w.lambdas) ls.push_back(l.real());
    std::sort(ls.begin(), ls.end());
    CHECK(ls[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(ls[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.b_N == 0.5);
    check_witness(w);
}

TEST_CASE("commutant witness: random T1 blocks") {
    for (Index N : {1, 2, 3})
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Rng rng(seed * 100 + static_cast<std::uint64_t>(N));
            auto w = build_commutant_witness(random_commutant_block(rng, N), N, seed);
            check_witness(w);
        }
}

TEST_CASE("commutant witness: repeated eigenvalue forces a retry") {
    Mat B = Mat::Zero(3, 2);
    B(0, 0) = 0.5;
    B(1, 0) = 0.2;
    B(1, 1) = 0.5;
    B(2, 1) = 0.4;
    auto w = build_commutant_witness(B, 1, 7);
    CHECK(w.retries >= 1);
    check_witness(w);
    Mat bad = B;
    bad(2, 0) = 1.0;
    CHECK_THROWS_AS(build_commutant_witness(bad, 1), PreconditionError);
}

TEST_CASE("eval_f_w") {
    auto w = build_commutant_witness(example_block(), 1);
    double res = 1.0;
    auto f0 = eval_f_w(w, 0.0, 200, &res);
    CHECK_FALSE(f0.has_tail());
    CHECK(res < 1e-15);
    for (auto l : w.lambdas) {
        auto f = eval_f_w(w, l, 200, &res);
        CHECK(res < 1e-8);
        CHECK(std::abs(pair(f, w.x0) - 1.0) < 1e-8);
    }
    for (int i = 0; i < 40; ++i) {
        cplx z = std::polar(0.9 * std::sqrt((i + 0.5) / 40.0), 2.4 * i);
        eval_f_w(w, z, 200, &res);
        CHECK(res < 1e-8);
    }
    CHECK_THROWS_AS(eval_f_w(w, 1.0), PreconditionError);
    CHECK_THROWS_AS(eval_f_w(w, cplx(0.0, -1.2)), PreconditionError);
}
