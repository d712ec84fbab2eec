#pragma once

// pendown/common.hpp
//
// Shared plumbing for the pendown library: error types, a portable seeded
// RNG (fixed algorithms, so identical seeds give identical streams on every
// platform/stdlib), FNV-1a hashing for digests and seed derivation, and
// round-trip-exact double formatting.

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pendown {

// ---------------------------------------------------------------- errors --

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (recording files, manifests, serialized artifacts).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates a documented precondition.
struct ValidationError : Error {
    using Error::Error;
};

// Bad configuration (unknown names, out-of-range knobs).
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem-level failures.
struct IoError : Error {
    using Error::Error;
};

// ------------------------------------------------------------------- rng --

// mt19937_64 is bit-exact across implementations; the distributions in
// <random> are not.  Everything that feeds persisted artifacts or seeds goes
// through the explicit transforms below instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ValidationError("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Standard normal via Box-Muller; one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = unit();
        double u2 = unit();
        // Guard log(0); the offset is far below double resolution of unit().
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates; together with below() this is platform-stable, unlike
    // std::shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// --------------------------------------------------------------- hashing --

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Derives a child seed from a base seed and a textual scope (group name,
// stage name, subject id, ...).  Stable across runs by construction.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view scope) {
    return base ^ fnv1a64(scope);
}

// ------------------------------------------------------------ formatting --

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ParseError(what + ": not a number: '" + std::string(text) + "'");
    return v;
}

inline long parse_long(std::string_view text, const std::string& what) {
    long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ParseError(what + ": not an integer: '" + std::string(text) + "'");
    return v;
}

// ------------------------------------------------------- basic statistics --

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw ValidationError("mean_of: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// k-th central moment with the 1/n convention.
inline double central_moment(std::span<const double> v, int k) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += std::pow(x - m, k);
    return s / static_cast<double>(v.size());
}

inline double population_std(std::span<const double> v) {
    return std::sqrt(central_moment(v, 2));
}

// Standard deviation with the 1/(n-1) convention; 0 for n < 2.
inline double sample_std(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(n - 1));
}

// ------------------------------------------------------------ parallelism --

// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
// concurrency).  Each index must be independent; results must be written to
// disjoint slots so the outcome is identical at any thread count.  The first
// exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
    if (threads == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                bool expected = false;
                if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (failed.load() && failure) std::rethrow_exception(failure);
}

}  // namespace pendown
