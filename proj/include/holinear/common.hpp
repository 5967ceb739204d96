#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace holinear {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Global norm convention: ℓ∞ on vectors, induced max-row-sum on operators.
// Every constant in the library is expressed in these norms.
inline double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline double op_norm(const Mat& m) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).cwiseAbs().sum());
    return best;
}

// m(L) = inf_{|x|=1} |Lx| = |L^{-1}|^{-1} for invertible L (computed from a
// supplied inverse; callers that have an Operator use its cached inverse).
inline double min_norm_of(const Mat& inverse) { return 1.0 / op_norm(inverse); }

// Compensated accumulation for monomial sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// splitmix64: tiny deterministic generator, seed-stable across platforms.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // uniform in [0,1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    // uniform in [-1,1)
    double symmetric() { return 2.0 * uniform() - 1.0; }
};

// radical-inverse (van der Corput) in the given prime base
inline double radical_inverse(std::uint64_t i, std::uint32_t base) {
    double inv = 1.0 / base, f = inv, x = 0.0;
    while (i) {
        x += static_cast<double>(i % base) * f;
        i /= base;
        f *= inv;
    }
    return x;
}

inline constexpr std::uint32_t kHaltonPrimes[8] = {2, 3, 5, 7, 11, 13, 17, 19};

// Halton point in [-1,1]^dim, index-shifted by seed so distinct seeds give
// distinct deterministic streams.
inline Vec halton_point(std::uint64_t index, int dim, std::uint64_t seed = 0) {
    Vec p(dim);
    for (int d = 0; d < dim; ++d)
        p[d] = 2.0 * radical_inverse(index + 1 + (seed % 65537), kHaltonPrimes[d]) - 1.0;
    return p;
}

inline int thread_cap() {
    if (const char* env = std::getenv("HOLINEAR_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min<unsigned>(hw ? hw : 1, 8));
}

// Index-parallel loop. Work items write only to their own index, so results
// are identical regardless of the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    int threads = thread_cap();
    if (threads <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace holinear
