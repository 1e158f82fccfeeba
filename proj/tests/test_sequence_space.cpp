#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lplab/sequence_space.hpp"

using namespace lplab;

namespace {

SpVector random_vec(Rng& rng, int support, bool with_tail) {
    std::map<Index, cplx> f;
    for (int i = 0; i < support; ++i) f[rng.uniform_int(0, 20)] += rng.cnormal();
    std::vector<GeoTail> ts;
    if (with_tail) ts.push_back({rng.uniform_int(0, 10), 1, rng.cnormal(), 0.8 * rng.uniform() * rng.unit_phase()});
    return SpVector::from_parts(f, ts);
}

std::vector<PNorm> norms() { return {PNorm::Lp(1), PNorm::Lp(1.5), PNorm::Lp(2), PNorm::Lp(3), PNorm::C0()}; }

}  // namespace

TEST_CASE("norm of basis vector and geometric tails") {
    for (auto n : norms()) CHECK(norm(SpVector::basis(0), n) == doctest::Approx(1.0));
    auto g = SpVector::geometric(0, 1.0, 0.5);
    CHECK(norm(g, PNorm::Lp(1)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(norm(g, PNorm::C0()) == 1.0);
    double partial = 0.0;
    for (int j = 0; j < 10000; ++j) partial += std::pow(0.25, j);
    CHECK(std::abs(norm(g, PNorm::Lp(2)) - std::sqrt(partial)) < 1e-9);
    CHECK(std::abs(norm(g, PNorm::Lp(2)) - std::sqrt(4.0 / 3.0)) < 1e-15);
}

TEST_CASE("entries override tail values") {
    auto g = SpVector::geometric(0, 1.0, 0.5);
    g.set(1, 3.0);
    CHECK(g.get(1) == cplx(3.0));
    CHECK(g.get(2) == cplx(0.25));
    double expect = 2.0 - 0.5 + 3.0;
    CHECK(norm(g, PNorm::Lp(1)) == doctest::Approx(expect));
    g.set(2, 0.0);
    CHECK(g.get(2) == cplx(0.0));
    CHECK(g.get(3) == cplx(0.125));
    CHECK(norm(g, PNorm::Lp(1)) == doctest::Approx(expect - 0.25));
    CHECK_NOTHROW(g.validate(IndexDomain::NonNegInts));
}

TEST_CASE("duality map examples") {
    CHECK(duality_map(SpVector::basis(0), 2.0).get(0) == cplx(1.0));
    auto v = SpVector::from_dense({1.0, 2.0});
    auto J = duality_map(v, 3.0);
    CHECK(J.get(0) == cplx(1.0));
    CHECK(J.get(1) == cplx(4.0));
    CHECK(pair(J, v).real() == doctest::Approx(9.0));
    CHECK(std::pow(norm(v, PNorm::Lp(3)), 3) == doctest::Approx(9.0));
    CHECK_THROWS_AS(duality_map(v, 1.0), PreconditionError);
}

TEST_CASE("duality map identities on random vectors") {
    Rng rng(11);
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        double q = conj_exponent(p);
        for (int s = 0; s < 200; ++s) {
            auto x = random_vec(rng, 8, s % 2 == 0);
            auto J = duality_map(x, p);
            double nx = norm(x, PNorm::Lp(p));
            CHECK(std::abs(pair(J, x) - std::pow(nx, p)) < 1e-10 * std::max(1.0, std::pow(nx, p)));
            CHECK(std::abs(norm(J, PNorm::Lp(q)) - std::pow(nx, p - 1)) < 1e-10 * std::max(1.0, std::pow(nx, p - 1)));
        }
    }
}

TEST_CASE("norm axioms sampled") {
    Rng rng(5);
    for (auto n : norms()) {
        for (int s = 0; s < 1000; ++s) {
            auto x = random_vec(rng, 5, s % 3 == 0);
            auto y = random_vec(rng, 5, s % 3 == 1);
            cplx a = rng.cnormal();
            double nx = norm(x, n), ny = norm(y, n);
            CHECK(norm(x + y, n) <= nx + ny + 1e-12 * (nx + ny));
            CHECK(std::abs(norm(a * x, n) - std::abs(a) * nx) <= 1e-12 * std::max(1.0, std::abs(a) * nx));
        }
    }
}

TEST_CASE("project examples") {
    const Index N = 4;
    CHECK(project(SpVector::basis(N + 1), IndexSet::interval(0, N)).empty());
    auto g = SpVector::geometric(0, 1.0, 0.5);
    auto r = project(g, IndexSet::above(N));
    REQUIRE(r.tails().size() == 1);
    CHECK(r.tails()[0].start == N + 1);
    CHECK(std::abs(r.tails()[0].coeff - std::pow(0.5, N + 1)) < 1e-16);
    CHECK(r.entries().empty());
    CHECK(r.get(N) == cplx(0.0));
}

TEST_CASE("project drops exactly one coordinate's mass") {
    Rng rng(3);
    for (double p : {1.0, 2.0, 3.0}) {
        for (int s = 0; s < 100; ++s) {
            auto x = random_vec(rng, 6, true);
            Index k = rng.uniform_int(0, 15);
            auto y = project(x, IndexSet::complement({k}));
            double drop = std::pow(norm(x, PNorm::Lp(p)), p) - std::pow(norm(y, PNorm::Lp(p)), p);
            CHECK(std::abs(drop - std::pow(std::abs(x.get(k)), p)) < 1e-10);
        }
    }
}

TEST_CASE("project is idempotent and norm non-increasing") {
    Rng rng(8);
    std::vector<IndexSet> sets = {IndexSet::interval(0, 7), IndexSet::above(5), IndexSet::below(9),
                                  IndexSet::finite({1, 3, 12}), IndexSet::complement({0, 2, 11})};
    for (auto n : norms())
        for (auto& I : sets)
            for (int s = 0; s < 50; ++s) {
                auto x = random_vec(rng, 6, s % 2 == 0);
                auto y = project(x, I);
                auto z = project(y, I);
                CHECK(norm(y - z, n) < 1e-14);
                CHECK(norm(y, n) <= norm(x, n) + 1e-12);
                for (Index j = 0; j < 40; ++j)
                    CHECK(std::abs(y.get(j) - (I.contains(j) ? x.get(j) : cplx(0.0))) < 1e-14);
            }
}

TEST_CASE("tail arithmetic merges aligned progressions") {
    auto a = SpVector::geometric(0, 1.0, 0.5);
    auto b = SpVector::geometric(3, 2.0, 0.5);
    auto c = a + b;
    CHECK(c.tails().size() == 1);
    for (Index j = 0; j < 30; ++j) {
        cplx expect = std::pow(0.5, j) + (j >= 3 ? 2.0 * std::pow(0.5, j - 3) : 0.0);
        CHECK(std::abs(c.get(j) - expect) < 1e-14);
    }
    auto d = a - a;
    CHECK(d.empty());
    auto e = SpVector::geometric(0, 1.0, 0.25);
    CHECK_THROWS_AS(a + e, UnrepresentableImage);
    // interleaved progressions are disjoint and coexist
    auto ev = SpVector::geometric(0, 1.0, 0.5, 2), od = SpVector::geometric(1, 1.0, 0.25, 2);
    auto mix = ev + od;
    CHECK(mix.tails().size() == 2);
    CHECK(norm(mix, PNorm::Lp(1)) == doctest::Approx(2.0 + 4.0 / 3.0));
}

TEST_CASE("pairing of tails in closed form matches partial sums") {
    auto f = SpVector::geometric(2, cplx(1, 1), cplx(0.3, 0.4));
    auto x = SpVector::geometric(0, 2.0, cplx(-0.5, 0.1));
    x.set(5, 7.0);
    cplx s = 0.0;
    for (Index j = 0; j < 400; ++j) s += f.get(j) * x.get(j);
    CHECK(std::abs(pair(f, x) - s) < 1e-13);
    // opposite directions on Z meet in a finite window
    auto l = SpVector::geometric(10, 1.0, 0.5, -3);
    auto r = SpVector::geometric(-5, 1.0, 0.5, 3);
    cplx t = 0.0;
    for (Index j = -5; j <= 10; ++j) t += l.get(j) * r.get(j);
    CHECK(std::abs(pair(l, r) - t) < 1e-14);
}

TEST_CASE("progression intersection") {
    auto I = intersect({0, 2, -1}, {1, 3, -1});
    REQUIRE(I);
    CHECK(I->start == 4);
    CHECK(I->step == 6);
    CHECK(I->infinite());
    CHECK_FALSE(intersect({0, 2, -1}, {1, 2, -1}));
    auto J = intersect({20, -1, -1}, {3, 1, -1});
    REQUIRE(J);
    CHECK(J->start == 20);
    CHECK(J->count == 18);
}

TEST_CASE("json round trip") {
    auto x = SpVector::geometric(1, cplx(0.1, -2.0), cplx(0.3, 0.2));
    x.set(0, cplx(1.0 / 3.0, 0.7));
    x.set(4, 0.0);
    auto y = spvector_from_json(nlohmann::json::parse(to_json(x).dump()));
    CHECK(to_json(y).dump() == to_json(x).dump());
    for (Index j = 0; j < 20; ++j) CHECK(y.get(j) == x.get(j));
    auto j = to_json(SpVector::geometric(0, 1.0, 0.5));
    CHECK(j.contains("tail"));
    CHECK(j["tail"]["s"] == 0);
}

TEST_CASE("validation") {
    auto bad = SpVector::geometric(-3, 1.0, 0.5);
    CHECK_THROWS_AS(bad.validate(IndexDomain::NonNegInts), PreconditionError);
    CHECK_NOTHROW(bad.validate(IndexDomain::AllInts));
    CHECK_THROWS_AS(SpVector::geometric(0, 1.0, 1.0), PreconditionError);
}
