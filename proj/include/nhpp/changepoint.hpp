#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "nhpp/error.hpp"
#include "nhpp/model.hpp"

namespace nhpp {

enum class Tail { greater, greater_equal };

/// strict: P(S > observed), the complement of the binomial CDF at the
/// observed pre-change sum. inclusive: P(S >= observed).
enum class TestVariant { strict, inclusive };

inline std::string_view to_string(TestVariant v) noexcept {
    return v == TestVariant::strict ? "strict" : "inclusive";
}

inline std::optional<TestVariant> parse_variant(std::string_view s) noexcept {
    if (s == "strict") return TestVariant::strict;
    if (s == "inclusive") return TestVariant::inclusive;
    return std::nullopt;
}

namespace detail {

inline void check_binomial_args(std::int64_t n, double p, std::int64_t x) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("binomial success probability must lie in (0, 1)");
    }
    if (n < 0 || x < 0 || x > n) {
        throw DomainError("binomial tail requires 0 <= x <= n");
    }
}

}  // namespace detail

/// log P(S = k). Boost's pdf is accurate to a few ulps; differencing three
/// log-gamma values near log(n!) is not, so lgamma is only the fallback for
/// terms that underflow.
inline double binomial_log_pmf(std::int64_t n, double p, std::int64_t k) {
    const double pmf = boost::math::pdf(boost::math::binomial_distribution<double>(static_cast<double>(n), p),
                                        static_cast<double>(k));
    if (pmf >= std::numeric_limits<double>::min()) return std::log(pmf);
    const auto nd = static_cast<double>(n);
    const auto kd = static_cast<double>(k);
    return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) + kd * std::log(p) +
           (nd - kd) * std::log1p(-p);
}

/// Exact binomial tail P(S > x) or P(S >= x) for S ~ Binomial(n, p).
///
/// Terms are formed from log-gamma values and accumulated relative to the
/// largest term with compensated summation. Whichever side of the mode the
/// threshold falls on is summed directly; the other side is reached by
/// complement, so a small tail is never computed as a difference of numbers
/// near one.
inline double binomial_tail(std::int64_t n, double p, std::int64_t x, Tail tail) {
    detail::check_binomial_args(n, p, x);
    const std::int64_t threshold = tail == Tail::greater ? x + 1 : x;  // P(S >= threshold)
    if (threshold > n) return 0.0;
    if (threshold <= 0) return 1.0;

    const auto mode = static_cast<std::int64_t>(std::floor(static_cast<double>(n + 1) * p));
    const bool upper = threshold > mode;
    const std::int64_t lo = upper ? threshold : 0;
    const std::int64_t hi = upper ? n : threshold - 1;
    // The term nearest the mode is the largest on either side.
    const double peak = binomial_log_pmf(n, p, upper ? lo : hi);

    detail::CompensatedSum acc;
    for (std::int64_t k = lo; k <= hi; ++k) {
        acc.add(std::exp(binomial_log_pmf(n, p, k) - peak));
    }
    const double mass = std::exp(peak) * acc.value();
    return upper ? std::min(mass, 1.0) : std::clamp(1.0 - mass, 0.0, 1.0);
}

/// Same tail through the regularized incomplete beta identity
/// P(S >= k) = I_p(k, n - k + 1). Independent route used for cross-checks.
inline double binomial_tail_beta(std::int64_t n, double p, std::int64_t x, Tail tail) {
    detail::check_binomial_args(n, p, x);
    const std::int64_t threshold = tail == Tail::greater ? x + 1 : x;
    if (threshold > n) return 0.0;
    if (threshold <= 0) return 1.0;
    return boost::math::ibeta(static_cast<double>(threshold), static_cast<double>(n - threshold + 1), p);
}

struct ChangePointResult {
    std::size_t split = 0;  ///< K, bins before the change point
    std::size_t bins = 0;   ///< N
    std::int64_t sum_before = 0;
    std::int64_t sum_total = 0;
    double null_probability = 0.0;  ///< K / N
    double p_value = 1.0;
    TestVariant variant = TestVariant::strict;

    [[nodiscard]] std::int64_t sum_after() const noexcept { return sum_total - sum_before; }
    /// Mean count per bin before / after the split.
    [[nodiscard]] double average_before() const noexcept {
        return static_cast<double>(sum_before) / static_cast<double>(split);
    }
    [[nodiscard]] double average_after() const noexcept {
        return static_cast<double>(sum_after()) / static_cast<double>(bins - split);
    }
    [[nodiscard]] bool reject(double level = 0.05) const noexcept { return p_value < level; }
};

/// Exact conditional test of a drop in mean intensity after bin K, from the
/// segment sums alone. Under no change, the pre-change sum given the total
/// is Binomial(total, K / N); large pre-change sums are evidence of a drop.
inline ChangePointResult exact_test(std::int64_t sum_before, std::int64_t sum_total, std::size_t split,
                                    std::size_t bins, TestVariant variant = TestVariant::strict) {
    if (bins < 2 || split < 1 || split >= bins) {
        throw DomainError("change-point split K=" + std::to_string(split) + " must satisfy 1 <= K <= N-1 with N=" +
                          std::to_string(bins));
    }
    if (sum_total == 0) {
        throw DegenerateDataError("change-point test needs at least one event; the total count is zero");
    }
    if (sum_before < 0 || sum_before > sum_total) {
        throw DomainError("pre-change sum must lie in [0, total]");
    }
    ChangePointResult r;
    r.split = split;
    r.bins = bins;
    r.sum_before = sum_before;
    r.sum_total = sum_total;
    r.null_probability = static_cast<double>(split) / static_cast<double>(bins);
    r.variant = variant;
    r.p_value = binomial_tail(sum_total, r.null_probability, sum_before,
                              variant == TestVariant::strict ? Tail::greater : Tail::greater_equal);
    return r;
}

inline ChangePointResult exact_test(const CountSeries& series, std::size_t split,
                                    TestVariant variant = TestVariant::strict) {
    if (split < 1 || split >= series.size()) {
        throw DomainError("change-point split K=" + std::to_string(split) + " must satisfy 1 <= K <= N-1 with N=" +
                          std::to_string(series.size()));
    }
    return exact_test(series.sum(0, split), series.total(), split, series.size(), variant);
}

}  // namespace nhpp
