#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lplab/exposing.hpp"
#include "lplab/samplers.hpp"

using namespace lplab;

namespace {

// X = (B + D) / max(1, ||B + D||) with ||D|| < delta/2, so ||X - B|| < delta; then the largest s in [0, 1]
// with ||[[X, sC], [sE, sF]]|| <= 1, by bisection on the Boyd estimate.
Mat contraction_near(const Mat& B, double delta, Index window, double p, Rng& rng) {
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

}  // namespace

TEST_CASE("make_absolutely_exposing scales the norm by 1 + delta") {
    Rng rng(21);
    for (double p : {1.5, 3.0})
        for (Index d : {2, 3, 4}) {
            Mat A = random_contraction(rng, d, PNorm::Lp(p), 0.5);
            double na = 0.0;
            Mat Ad = make_absolutely_exposing(A, 0.2, p, &na);
            double direct = dense_op_norm(Ad, PNorm::Lp(p)).value;
            CHECK(std::abs(direct - 1.2 * 0.5) <= 1e-8);
            CHECK(std::abs(na - direct) <= 1e-8);
        }
    Mat A = random_contraction(rng, 3, PNorm::Lp(3.0), 0.5);
    CHECK(make_absolutely_exposing(A, 0.0, 3.0) == A);
    CHECK_THROWS_AS(make_absolutely_exposing(A, 1.5, 3.0), PreconditionError);
}

TEST_CASE("near-norming vectors of A_delta cluster on one circle") {
    Rng rng(22);
    for (double p : {1.5, 3.0}) {
        Mat A = random_contraction(rng, 3, PNorm::Lp(p), 0.5);
        Mat Ad = make_absolutely_exposing(A, 0.2, p);
        auto nd = norming_data(Ad, p);
        auto pr = exposure_probe(Ad, nd.x, p, 1000, 5);
        CHECK(pr.accepted > 0);
        CHECK(pr.max_dist < 0.05);
    }
}

TEST_CASE("check_evenly_distributed") {
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = 0.5;
    auto e = check_evenly_distributed(D, 3.0);
    CHECK_FALSE(e.even);
    CHECK(e.min_x <= 1e-10);

    Mat one = Mat::Constant(1, 1, 0.5);
    auto e1 = check_evenly_distributed(one, 2.0);
    CHECK(e1.even);
    CHECK(e1.gamma == doctest::Approx(0.5));

    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        Rng rng(seed);
        Mat A = random_contraction(rng, 3, PNorm::Lp(3.0), 0.5);
        int used = 0;
        Mat E = make_evenly_distributed(A, 3.0, rng, 100, 1e-2, &used);
        CHECK(used >= 1);
        CHECK(used <= 100);
        CHECK(check_evenly_distributed(E, 3.0).even);
    }
}

TEST_CASE("B_{eta,delta}: 1x1 example") {
    Mat A = Mat::Constant(1, 1, 0.5);
    auto b = build_B_eta_delta(A, 0.5, 2.0);
    CHECK(b.delta == doctest::Approx(std::sqrt(2.2)).epsilon(1e-12));
    CHECK(std::abs(b.norm - 1.0) <= 1e-6);
    CHECK(std::abs(b.norm_u0 - 1.0) <= 1e-9);
    CHECK(b.even.even);
    CHECK(b.B.rows() == 2);
    CHECK(b.B(1, 1).real() == doctest::Approx(0.5 * 0.5 * std::sqrt(2.2)));
}

TEST_CASE("B_{eta,delta}: norm matches the closed form") {
    int built = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        Rng rng(seed);
        double p = std::vector<double>{1.5, 2.0, 3.0}[seed % 3];
        Index d = 1 + static_cast<Index>(seed % 4);
        Mat A = make_evenly_distributed(random_contraction(rng, d, PNorm::Lp(p), 0.5), p, rng);
        double eta = rng.uniform(0.1, 0.9);
        auto b = build_B_eta_delta(A, eta, p);
        CHECK(std::abs(b.norm - b.closed_form) <= 1e-6);
        CHECK(std::abs(b.closed_form - 1.0) <= 1e-9);
        CHECK(std::abs(b.norm_u0 - 1.0) <= 1e-9);
        CHECK(b.even.even);
        CHECK(b.B.rows() == 2 * d);
        ++built;
    }
    CHECK(built == 12);
    Mat big = Mat::Constant(1, 1, 0.9);
    CHECK_THROWS_AS(build_B_eta_delta(big, 0.9, 2.0), PreconditionError);
}

TEST_CASE("delta_for_B") {
    CHECK(kan_constant(4.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(kan_constant(2.0), PreconditionError);
    Mat B = Mat::Identity(3, 3);
    for (double g : {0.01, 0.3, 1.0})
        for (double eps : {1e-3, 0.1, 10.0}) CHECK(delta_for_B(B, eps, 4.0, g) <= g / 2.0);
    CHECK_THROWS_AS(delta_for_B(B, 0.1, 2.0, 0.5), PreconditionError);
}

TEST_CASE("delta_for_B localizes contractions near B") {
    for (double p : {3.0, 4.0}) {
        Rng rng(static_cast<std::uint64_t>(p));
        Mat A = make_evenly_distributed(random_contraction(rng, 2, PNorm::Lp(p), 0.5), p, rng);
        auto b = build_B_eta_delta(A, 0.5, p);
        const Index M = b.B.rows() - 1;
        const double eps = 0.1;
        double delta = delta_for_B(b.B, eps, p, b.even.gamma);
        CHECK(delta > 0.0);
        for (int s = 0; s < 10; ++s) {
            Mat T = contraction_near(b.B, delta, 4 * M, p, rng);
            double corner = dense_op_norm(T.topRightCorner(M + 1, T.cols() - M - 1), PNorm::Lp(p)).value;
            CHECK(corner < eps);
        }
    }
}
