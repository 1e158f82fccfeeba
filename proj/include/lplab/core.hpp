#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lplab {

using cplx = std::complex<double>;
using Index = std::int64_t;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr const char* kToolVersion = "0.1.0";

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionError : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct UnrepresentableImage : Error { using Error::Error; };
struct DimensionTooLarge : Error { using Error::Error; };
struct KrylovDegenerate : Error { using Error::Error; };
struct DegenerateSpectrum : Error { using Error::Error; };
struct MembershipFailure : Error { using Error::Error; };
struct MonotonicityViolation : Error { using Error::Error; };
struct ExposednessUndetermined : Error { using Error::Error; };
struct OverflowGuard : Error { using Error::Error; };
struct SearchExhausted : Error {
    int step;
    SearchExhausted(const std::string& m, int l) : Error(m), step(l) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw PreconditionError(msg);
}

enum class IndexDomain { NonNegInts, AllInts };

// Lp(p) with 1 <= p < inf, or the sup norm of c0.
struct PNorm {
    enum class Kind { Lp, C0Sup };
    Kind kind = Kind::Lp;
    double p = 2.0;

    static PNorm Lp(double p) {
        require(std::isfinite(p) && p >= 1.0, "PNorm: need 1 <= p < inf");
        return {Kind::Lp, p};
    }
    static PNorm C0() { return {Kind::C0Sup, std::numeric_limits<double>::infinity()}; }

    bool is_c0() const { return kind == Kind::C0Sup; }
    // Conjugate exponent; 1 for c0 (dual is l1), inf for p = 1.
    double conj() const {
        if (is_c0()) return 1.0;
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        return p / (p - 1.0);
    }
    // Norm of the dual space: l_{p'} for p > 1, l_inf (treated as sup) for p = 1, l1 for c0.
    PNorm dual() const {
        if (is_c0()) return Lp(1.0);
        if (p == 1.0) return C0();
        return Lp(conj());
    }
    std::string name() const {
        if (is_c0()) return "c0";
        char buf[32];
        std::snprintf(buf, sizeof buf, "l%g", p);
        return buf;
    }
};

inline double conj_exponent(double p) { return p / (p - 1.0); }

// splitmix64, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Engine output is fixed by the standard; the distributions below are our own so
// that draws are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), eng_(splitmix64(seed)) {}

    Rng split(std::uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t next() { return eng_(); }
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    Index uniform_int(Index lo, Index hi) {
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<Index>(eng_() % span);
    }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }
    cplx cnormal() {
        double a = normal();
        double b = normal();
        return {a * M_SQRT1_2, b * M_SQRT1_2};
    }
    cplx unit_phase() { return std::polar(1.0, 2.0 * kPi * uniform()); }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LPLAB_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(std::min<long>(v, hw * 4L));
    }
    return hw;
}

// Static chunking over [0, n); fn(i) must only write to slot i of its outputs.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned w = std::min<std::size_t>(worker_count(), n == 0 ? 1 : n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += w) fn(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline double powabs(cplx z, double p) { return std::pow(std::abs(z), p); }

}  // namespace lplab
