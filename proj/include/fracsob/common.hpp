#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fracsob {

inline constexpr const char* kVersion = "1.0.0";

inline constexpr double kPi = std::numbers::pi;

// Error hierarchy. ConfigError maps to CLI exit code 2, NumericalError to 3.

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CoverageError : ConfigError {
    using ConfigError::ConfigError;
};

struct ResolutionError : ConfigError {
    using ConfigError::ConfigError;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonCoerciveError : NumericalError {
    using NumericalError::NumericalError;
};

struct StagnationError : NumericalError {
    using NumericalError::NumericalError;
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

namespace detail {
inline std::atomic<unsigned>& thread_count_ref() {
    static std::atomic<unsigned> count{1};
    return count;
}
}  // namespace detail

/// Worker threads used by the pair sums. 0 selects hardware concurrency.
inline void set_thread_count(unsigned n) {
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    detail::thread_count_ref().store(n);
}

inline unsigned thread_count() { return detail::thread_count_ref().load(); }

/// Runs body(row) for every row in [0, rows), rows interleaved across threads.
/// Each row is handled by exactly one thread, so per-row results do not depend
/// on the thread count.
template <class Body>
void parallel_rows(std::size_t rows, Body&& body) {
    const unsigned threads =
        static_cast<unsigned>(std::min<std::size_t>(thread_count(), std::max<std::size_t>(rows, 1)));
    if (threads <= 1) {
        for (std::size_t r = 0; r < rows; ++r) body(r);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t r = t; r < rows; r += threads) body(r);
        });
    }
}

/// Deterministic reduction: per-row values computed in parallel, summed in row order.
template <class RowValue>
double reduce_rows(std::size_t rows, RowValue&& row_value) {
    std::vector<double> partial(rows, 0.0);
    parallel_rows(rows, [&](std::size_t r) { partial[r] = row_value(r); });
    return compensated_sum(partial);
}

/// |x|^p with fast paths for the exponents used most.
inline double abs_pow(double x, double p) {
    const double a = std::abs(x);
    if (p == 2.0) return a * a;
    if (p == 1.0) return a;
    if (p == 3.0) return a * a * a;
    if (p == 4.0) {
        const double a2 = a * a;
        return a2 * a2;
    }
    return std::pow(a, p);
}

/// |x|^{p-2} x
inline double signed_pow(double x, double p) {
    if (p == 2.0) return x;
    if (x == 0.0) return 0.0;
    return std::copysign(abs_pow(x, p - 1.0), x);
}

/// Ordinary least-squares slope of y against x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("ols_slope: need >= 2 matched points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DomainError("ols_slope: degenerate abscissae");
    return sxy / sxx;
}

}  // namespace fracsob
