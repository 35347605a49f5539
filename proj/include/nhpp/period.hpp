#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "nhpp/error.hpp"

namespace nhpp {

/// Study window (a, b] cut into N equal bins of width (b - a) / N.
/// Bin n (zero-based here) is (a + n*width, a + (n+1)*width].
class StudyPeriod {
public:
    StudyPeriod(double start, double end, std::size_t bins) : start_(start), end_(end), bins_(bins) {
        if (!std::isfinite(start) || !std::isfinite(end) || !(end > start)) {
            throw DomainError("study period requires finite a < b");
        }
        if (bins < 2) {
            throw DomainError("study period requires at least 2 bins, got " + std::to_string(bins));
        }
        width_ = (end_ - start_) / static_cast<double>(bins_);
    }

    /// Annual bins covering the calendar years first_year..last_year inclusive:
    /// a = first_year, b = last_year + 1.
    static StudyPeriod annual(int first_year, int last_year) {
        if (last_year <= first_year) {
            throw DomainError("annual period requires first_year < last_year");
        }
        return {static_cast<double>(first_year), static_cast<double>(last_year) + 1.0,
                static_cast<std::size_t>(last_year - first_year + 1)};
    }

    [[nodiscard]] double start() const noexcept { return start_; }
    [[nodiscard]] double end() const noexcept { return end_; }
    [[nodiscard]] std::size_t bins() const noexcept { return bins_; }
    [[nodiscard]] double bin_width() const noexcept { return width_; }
    [[nodiscard]] double length() const noexcept { return end_ - start_; }

    [[nodiscard]] double bin_lower(std::size_t n) const noexcept {
        return start_ + static_cast<double>(n) * width_;
    }
    [[nodiscard]] double bin_upper(std::size_t n) const noexcept {
        return n + 1 == bins_ ? end_ : start_ + static_cast<double>(n + 1) * width_;
    }

    [[nodiscard]] bool contains(double t) const noexcept { return t >= start_ && t <= end_; }

    friend bool operator==(const StudyPeriod&, const StudyPeriod&) = default;

private:
    double start_;
    double end_;
    std::size_t bins_;
    double width_ = 0.0;
};

}  // namespace nhpp
