#pragma once

// Shared vocabulary for the kandy library: matrix aliases, the exception
// hierarchy, a reproducible random source and a chunked parallel loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kandy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr const char* kVersion = "1.0.0";

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (bad range, size mismatch, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Training or integration produced non-finite values.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Experiment configuration failed validation; `path` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage needs an artifact that an earlier stage did not produce.
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of stream `index` derived from a global seed.
constexpr std::uint64_t derive_seed(std::uint64_t global, std::uint64_t index) noexcept {
    return splitmix64(global ^ splitmix64(index + 1));
}

/// Deterministic random source. Distributions are implemented here rather than
/// taken from <random> so that streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Worker cap: KANDY_THREADS if set, otherwise the hardware concurrency.
inline unsigned worker_threads() {
    if (const char* env = std::getenv("KANDY_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// The partition depends only on n and chunk, never on the thread count, so
/// callers that reduce per-chunk results in chunk order get bit-identical sums.
inline void parallel_chunks(std::size_t n, std::size_t chunk,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    chunk = std::max<std::size_t>(1, chunk);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n_chunks));
    auto run = [&](std::size_t c) { body(c, c * chunk, std::min(n, (c + 1) * chunk)); };
    if (threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run(c);
        return;
    }
    std::vector<std::exception_ptr> failures(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t c = t; c < n_chunks; c += threads) run(c);
                } catch (...) {
                    failures[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace kandy
