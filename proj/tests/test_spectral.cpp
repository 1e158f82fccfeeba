#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lplab/spectral.hpp"

using namespace lplab;

namespace {

Mat random_mat(Rng& rng, Index r, Index c) {
    Mat M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = rng.cnormal();
    return M;
}

WeightSeq random_weights(Rng& rng, Index N) {
    WeightSeq w;
    w.lo = -(3 * N + 1);
    w.hi = N;
    for (Index j = w.lo; j <= w.hi; ++j) w.vals.push_back(rng.uniform(0.05, 1.0));
    w.left = rng.uniform(0.05, 1.0);
    w.right = rng.uniform(0.05, 1.0);
    return w;
}

double tail_extended_residual(const StructuredOperator& S, const Vec& v, Index lo, cplx l) {
    SpVector x = to_spvector(v, lo);
    return norm(apply(S, x) - l * x, S.ambient) / norm(x, S.ambient);
}

}  // namespace

TEST_CASE("eigs_dense examples") {
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = 0.5;
    D(1, 1) = 1.0 / 3.0;
    auto e = eigs_dense(D);
    REQUIRE(e.size() == 2);
    std::vector<double> re{e[0].lambda.real(), e[1].lambda.real()};
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(re[1] == doctest::Approx(0.5).epsilon(1e-14));

    Mat J = Mat::Zero(6, 6);
    for (Index i = 0; i + 1 < 6; ++i) J(i, i + 1) = 1.0;
    for (auto& p : eigs_dense(J)) CHECK(std::abs(p.lambda) < 1e-12);

    CHECK_THROWS_AS(eigs_dense(Mat::Zero(257, 257)), DimensionTooLarge);
}

TEST_CASE("eigs_dense on contraction truncations") {
    Rng rng(11);
    for (int t = 0; t < 5; ++t) {
        Mat M = random_mat(rng, 50, 50);
        M /= sigma_max(M);
        double s = sigma_max(M);
        for (auto& p : eigs_dense(M)) {
            CHECK(std::abs(p.lambda) <= 1.0 + 1e-8);
            CHECK(p.residual <= 1e-8 * s);
            CHECK(p.converged);
        }
    }
}

TEST_CASE("build_S_A_omega columns") {
    Mat A(3, 3);
    A << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    WeightSeq w = WeightSeq::constant(0.5);
    w.lo = -4;
    w.hi = 1;
    w.vals = {0.1, 0.2, 0.3, 0.4, 0.6, 0.7};
    auto S = build_S_A_omega(A, w, PNorm::Lp(2));
    for (Index k = -40; k <= 40; ++k) {
        auto col = S.column(k);
        std::map<Index, cplx> want;
        if (std::abs(k) <= 1)
            for (Index r = -1; r <= 1; ++r) want[r] += A(r + 1, k + 1);
        want[k - 3] += w(k - 3);
        for (auto& [r, v] : want) CHECK(col.get(r) == v);
        CHECK(col.entries().size() == want.size());
    }
}

TEST_CASE("lambda_sets examples") {
    auto w = WeightSeq::constant(0.25);
    auto s0 = lambda_sets(w, 2, 0.0, 2.0);
    CHECK(s0.minus.empty());

    WeightSeq one = WeightSeq::constant(1.0);
    one.lo = -3;
    one.hi = 3;
    one.vals = {0.1, 0.2, 0.01, 0.5, 2.0, 0.3, 0.7};
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        cplx l = std::polar(std::sqrt(rng.uniform()), rng.uniform(0, 2 * kPi));
        CHECK(lambda_sets(one, 1, l, 2.0).minus.empty());
    }
    CHECK(lambda_sets(one, 1, 1.0, 2.0).minus.empty());  // ratio exactly 1

    auto s = lambda_sets(w, 1, 0.5, 2.0);
    CHECK(s.minus == std::vector<Index>{-1, 0, 1});
    CHECK(s.plus.empty());
    for (Index k = -1; k <= 1; ++k) {
        auto [sm, sp] = lambda_series_partial(w, 1, k, 0.5, 2.0, 10000);
        CHECK(sm == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(sp > 1e300);
    }
}

TEST_CASE("point_spectrum_SAomega examples") {
    Mat A(1, 1);
    A(0, 0) = 0.5;
    auto w = WeightSeq::constant(0.25);
    auto e = point_spectrum_SAomega(A, w, 0.5, 2.0, 200);
    REQUIRE(e.has_value());
    CHECK(e->window_residual < 1e-10);
    CHECK(e->exact_residual < 1e-10);
    CHECK(norm(e->pair.vector, PNorm::Lp(2)) == doctest::Approx(1.0));
    CHECK_FALSE(point_spectrum_SAomega(A, w, 0.0, 2.0).has_value());
    CHECK_FALSE(point_spectrum_SAomega(A, w, 0.4, 2.0).has_value());

    // weights 1 off a finite window: nothing in the closed unit disk
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        Index N = 1 + t % 2;
        Mat B = random_mat(rng, 2 * N + 1, 2 * N + 1);
        WeightSeq w1 = random_weights(rng, N);
        w1.left = w1.right = 1.0;
        for (auto& p : eigs_dense(B)) {
            cplx l = std::abs(p.lambda) > 1.0 ? p.lambda / std::abs(p.lambda) : p.lambda;
            CHECK_FALSE(point_spectrum_SAomega(B, w1, l, 2.0).has_value());
        }
        for (int i = 0; i < 20; ++i) {
            cplx l = std::polar(std::sqrt(rng.uniform()), rng.uniform(0, 2 * kPi));
            CHECK_FALSE(point_spectrum_SAomega(B, w1, l, 2.0).has_value());
        }
    }
}

TEST_CASE("reconstructed eigenvectors solve the eigen-equation") {
    Rng rng(21);
    for (int t = 0; t < 30; ++t) {
        Index N = t % 3;
        Index d = 2 * N + 1;
        Mat A = random_mat(rng, d, d);
        WeightSeq w = random_weights(rng, N);
        w.left = 0.05;
        double p = t % 2 ? 3.0 : 2.0;
        for (auto& ev : eigs_dense(A)) {
            if (std::abs(ev.lambda) < 0.1) continue;
            auto e = point_spectrum_SAomega(A, w, ev.lambda, p);
            REQUIRE(e.has_value());
            CHECK(e->exact_residual < 1e-8 * std::max(1.0, sigma_max(A)));
        }
        // annulus where both sets are full: every lambda is an eigenvalue
        w.right = 2.0;
        cplx l = std::polar(rng.uniform(0.2, 1.5), rng.uniform(0, 2 * kPi));
        auto e = point_spectrum_SAomega(A, w, l, p);
        REQUIRE(e.has_value());
        CHECK(e->exact_residual < 1e-8 * std::max(1.0, sigma_max(A)));
    }
}

TEST_CASE("feasibility agrees with truncation eigenvalues") {
    Rng rng(8);
    const Index D = 60;
    int hits = 0;
    for (int t = 0; t < 12; ++t) {
        Index N = t % 2;
        Index d = 2 * N + 1;
        Mat A = random_mat(rng, d, d);
        A *= 0.9 / sigma_max(A);
        WeightSeq w = random_weights(rng, N);
        auto S = build_S_A_omega(A, w, PNorm::Lp(2));
        Mat M = truncate(S, D);
        auto raw = eigs_dense_raw(M);
        // every feasibility eigenvalue shows up in the truncation
        for (auto& ev : eigs_dense(A)) {
            if (!point_spectrum_SAomega(A, w, ev.lambda, 2.0)) continue;
            ++hits;
            double best = 1e9;
            for (auto& l : raw.values) best = std::min(best, std::abs(l - ev.lambda));
            CHECK(best < 1e-3);
        }
        // no truncation eigenpair extends to a genuine one when feasibility says none
        for (std::size_t i = 0; i < raw.values.size(); ++i) {
            cplx l = raw.values[i];
            if (point_spectrum_SAomega(A, w, l, 2.0)) continue;
            double r = tail_extended_residual(S, raw.vectors.col(static_cast<Index>(i)), -D, l);
            CHECK(r >= 1e-8);
        }
    }
    CHECK(hits > 0);
}

TEST_CASE("min_gain examples") {
    auto Z = StructuredOperator::zero();
    CHECK(min_gain(Z, 0.0, PNorm::Lp(2), 10) == doctest::Approx(0.0));
    auto I = StructuredOperator::identity(50);
    I.rules.push_back({50, 1, -1, {{RowMap::affine(1, 0), 1.0, 0.0, 0.0}}});
    CHECK(min_gain(I, 0.0, PNorm::Lp(2), 20) == doctest::Approx(1.0));
    CHECK(min_gain(I, 0.0, PNorm::Lp(3), 20) == doctest::Approx(1.0).epsilon(1e-9));
    auto B = StructuredOperator::backward_shift();
    CHECK(min_gain(B, 0.5, PNorm::Lp(2), 60) <= 1e-3);
    CHECK(min_gain(B, 0.5, PNorm::Lp(3), 60) <= 1e-3);
    CHECK(min_gain(B, 0.5, PNorm::C0(), 60) <= 1e-3);
    CHECK(min_gain(B, 0.5, PNorm::Lp(1), 60) <= 1e-3);
    // forward shift is bounded below by 1 - |lambda|
    auto F = StructuredOperator::forward_shift();
    CHECK(min_gain(F, 0.5, PNorm::Lp(2), 60) >= 0.5 - 1e-12);
}

TEST_CASE("min_gain bounded by restricted eigenvectors") {
    Rng rng(4);
    const Index D = 40;
    for (int t = 0; t < 10; ++t) {
        Index N = t % 2;
        Index d = 2 * N + 1;
        Mat A = random_mat(rng, d, d);
        WeightSeq w = random_weights(rng, N);
        w.left = 0.05;
        double p = t % 2 ? 2.0 : 3.0;
        PNorm n = PNorm::Lp(p);
        auto S = build_S_A_omega(A, w, n);
        for (auto& ev : eigs_dense(A)) {
            if (std::abs(ev.lambda) < 0.2) continue;
            auto e = point_spectrum_SAomega(A, w, ev.lambda, p);
            REQUIRE(e.has_value());
            Vec v = to_dense(e->pair.vector, -D, 2 * D + 1);
            double bound = tail_extended_residual(S, v, -D, ev.lambda);
            CHECK(min_gain(S, ev.lambda, n, D) <= bound + 1e-12);
        }
    }
}

TEST_CASE("orbit_decay examples") {
    auto x = SpVector::basis(0) + SpVector::basis(3);
    auto o = orbit_decay(StructuredOperator::zero(), x, 5, PNorm::Lp(2));
    CHECK(o[0] == doctest::Approx(std::sqrt(2.0)));
    for (int i = 1; i <= 5; ++i) CHECK(o[i] == 0.0);

    auto b = orbit_decay(StructuredOperator::backward_shift(), SpVector::basis(5), 10);
    for (int i = 0; i <= 5; ++i) CHECK(b[i] == 1.0);
    for (int i = 6; i <= 10; ++i) CHECK(b[i] == 0.0);

    Rng rng(9);
    for (int t = 0; t < 5; ++t) {
        Mat M = random_mat(rng, 40, 40);
        M /= sigma_max(M);
        auto T = StructuredOperator::from_dense(M);
        std::map<Index, cplx> f;
        for (Index i = 0; i < 40; ++i) f[i] = rng.cnormal();
        auto dec = orbit_decay(T, SpVector::from_parts(f, {}), 200);
        CHECK(dec.size() == 201);
    }

    auto twice = StructuredOperator::from_dense(2.0 * Mat::Identity(1, 1));
    CHECK_THROWS_AS(orbit_decay(twice, SpVector::basis(0), 3), MonotonicityViolation);
}
