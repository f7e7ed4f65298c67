#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace cbn {

using Vec   = Eigen::VectorXd;
using Mat   = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Trip  = Eigen::Triplet<double>;
using Vec3  = Eigen::Vector3d;

/// Invalid user input (mesh counts, material bounds, config keys). CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (singular factorization, diverged iteration). CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a), used for material / layout keys of the operator cache.

inline std::uint64_t hash_bytes(const void* data, std::size_t n,
                                std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_u64(std::uint64_t v, std::uint64_t h = 1469598103934665603ull) {
    return hash_bytes(&v, sizeof v, h);
}

inline std::uint64_t hash_double(double v, std::uint64_t h = 1469598103934665603ull) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return hash_u64(bits, h);
}

inline std::uint64_t hash_doubles(const double* v, std::size_t n,
                                  std::uint64_t h = 1469598103934665603ull) {
    for (std::size_t i = 0; i < n; ++i) h = hash_double(v[i], h);
    return h;
}

// ---------------------------------------------------------------------------
// Seeded RNG (splitmix64). std:: distributions are not used so that streams
// are identical across standard library implementations.

struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + int(next() % std::uint64_t(hi - lo + 1));
    }
};

// ---------------------------------------------------------------------------
// Timing

class Stopwatch {
  public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }
    void restart() { t0_ = std::chrono::steady_clock::now(); }

  private:
    std::chrono::steady_clock::time_point t0_;
};

/// Ordered per-step wall times for the run manifest.
struct StepTimings {
    std::vector<std::pair<std::string, double>> steps;

    void add(const std::string& name, double seconds) { steps.emplace_back(name, seconds); }
    double total() const {
        double t = 0;
        for (const auto& s : steps) t += s.second;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Deterministic text formatting for CSV/VTK outputs.

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Chunked parallel loop. Results must be written to disjoint, preallocated
// slots so the outcome is independent of the thread count.

template <typename Fn>
void parallel_for(long n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    const int nt = int(std::min<long>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([=, &fn] {
            for (long i = t; i < n; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace cbn
