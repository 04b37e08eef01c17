#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vardct {

using Vec = std::vector<double>;

/// Contract violations in user-supplied inputs (bad dims, invalid config).
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Runtime numerical assertion failures (monotonicity, bound violations, ...).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// I/O failures (missing files, bad magic, truncated payloads).
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

// Worker cap for all parallel loops. 1 guarantees bit reproducibility.
inline int& thread_count() {
    static int n = 1;
    return n;
}

inline void set_threads(int n) {
    thread_count() = std::max(1, n);
#ifdef _OPENMP
    omp_set_num_threads(thread_count());
#endif
}

template <typename F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
    if (thread_count() > 1) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

inline double dot(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double sum(const Vec& a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

// FNV-1a, used for provenance hashes in file headers.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace vardct
