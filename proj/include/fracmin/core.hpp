#pragma once

// Basic vocabulary shared by every fracmin module: points, errors,
// compensated summation and a deterministic parallel map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fracmin {

/// Ambient points live in R^3; planar problems leave the last slot at zero.
using Point = std::array<double, 3>;

/// Raised for malformed input or violated preconditions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A geometric hypothesis of a check does not hold on the input. The CLI
/// maps this to the "check failed" exit code rather than a hard error.
class HypothesisError : public Error {
public:
    HypothesisError(std::string display, const std::string& what)
        : Error(what), display_(std::move(display)) {}
    const std::string& display() const noexcept { return display_; }

private:
    std::string display_;
};

inline double dot(const Point& a, const Point& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline Point operator+(const Point& a, const Point& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point operator-(const Point& a, const Point& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point operator*(double t, const Point& a) {
    return {t * a[0], t * a[1], t * a[2]};
}

/// Neumaier's variant of Kahan summation. Adding the same terms in the same
/// order always yields the same bits.
class CompensatedSum {
public:
    CompensatedSum& operator+=(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            cor_ += (sum_ - t) + x;
        else
            cor_ += (x - t) + sum_;
        sum_ = t;
        return *this;
    }
    double value() const { return sum_ + cor_; }

private:
    double sum_ = 0.0;
    double cor_ = 0.0;
};

/// Worker count, capped by FRACMIN_THREADS when set.
inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FRACMIN_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<unsigned>(v);
    }
    return hw;
}

/// Evaluates fn(i) for i in [0, count) and stores results by index. Work is
/// split into contiguous blocks; since each output slot is written by exactly
/// one call and reductions happen afterwards in index order, results do not
/// depend on the number of threads.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, Fn&& fn) {
    std::vector<T> out(count);
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(thread_count(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t block = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(count, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

/// Sum of fn(i) over [0, count) reduced in index order.
template <class Fn>
double ordered_sum(std::size_t count, Fn&& fn) {
    auto parts = parallel_map<double>(count, std::forward<Fn>(fn));
    CompensatedSum acc;
    for (double v : parts) acc += v;
    return acc.value();
}

/// Surface measure of the unit sphere S^{n-1}.
inline double unit_sphere_area(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        case 4: return 2.0 * std::numbers::pi * std::numbers::pi;
        default: throw Error("unit_sphere_area: unsupported dimension");
    }
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    return unit_sphere_area(n) / n;
}

}  // namespace fracmin
