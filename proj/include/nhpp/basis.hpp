#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nhpp/error.hpp"
#include "nhpp/period.hpp"

namespace nhpp {

/// Values of the (degree + 1) basis functions that are nonzero on one knot
/// span, together with their first and second derivatives.
/// `values[d][j]` is the d-th derivative of basis function `first + j`.
struct LocalBasis {
    std::size_t first = 0;
    std::array<std::array<double, 4>, 3> values{};
};

/// Clamped cubic B-spline basis on [a, b] with equally spaced interior knots.
///
/// Boundary knots a and b carry multiplicity 4, so the basis spans the
/// constants and sums to one on the closed interval. At t = b the
/// left-continuous limit is used.
class SplineBasis {
public:
    static constexpr int degree = 3;

    SplineBasis(double start, double end, std::vector<double> interior_knots)
        : start_(start), end_(end), interior_(std::move(interior_knots)) {
        if (!(end > start)) {
            throw DomainError("spline basis requires a < b");
        }
        for (std::size_t i = 0; i < interior_.size(); ++i) {
            if (!(interior_[i] > start && interior_[i] < end)) {
                throw DomainError("interior knots must lie strictly inside (a, b)");
            }
            if (i > 0 && !(interior_[i] > interior_[i - 1])) {
                throw DomainError("interior knots must be strictly increasing");
            }
        }
        knots_.reserve(interior_.size() + 2 * (degree + 1));
        knots_.insert(knots_.end(), degree + 1, start);
        knots_.insert(knots_.end(), interior_.begin(), interior_.end());
        knots_.insert(knots_.end(), degree + 1, end);
    }

    [[nodiscard]] double start() const noexcept { return start_; }
    [[nodiscard]] double end() const noexcept { return end_; }

    /// Number of basis functions L.
    [[nodiscard]] std::size_t size() const noexcept { return interior_.size() + degree + 1; }

    [[nodiscard]] const std::vector<double>& knot_vector() const noexcept { return knots_; }
    [[nodiscard]] const std::vector<double>& interior_knots() const noexcept { return interior_; }

    /// Closed support [t_l, t_{l+4}] of basis function l (zero-based).
    [[nodiscard]] std::pair<double, double> support(std::size_t l) const {
        return {knots_.at(l), knots_.at(l + degree + 1)};
    }

    /// Index i of the knot span [t_i, t_{i+1}) containing t; the last
    /// nonempty span for t = b.
    [[nodiscard]] std::size_t find_span(double t) const {
        check_inside(t);
        const std::size_t last = size() - 1;
        if (t >= end_) {
            return last;
        }
        const auto it = std::upper_bound(knots_.begin() + degree + 1, knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
        return static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

    /// Nonzero basis values and derivatives at t (de Boor's triangular scheme).
    [[nodiscard]] LocalBasis local(double t) const {
        constexpr int p = degree;
        const std::size_t span = find_span(t);

        std::array<std::array<double, p + 1>, p + 1> ndu{};
        std::array<double, p + 1> left{};
        std::array<double, p + 1> right{};
        ndu[0][0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = t - knots_[span + 1 - j];
            right[j] = knots_[span + j] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                ndu[j][r] = right[r + 1] + left[j - r];
                const double temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        LocalBasis out;
        out.first = span - p;
        for (int j = 0; j <= p; ++j) {
            out.values[0][j] = ndu[j][p];
        }

        constexpr int max_order = 2;
        std::array<std::array<double, p + 1>, 2> a{};
        for (int r = 0; r <= p; ++r) {
            int s1 = 0;
            int s2 = 1;
            a[0][0] = 1.0;
            for (int k = 1; k <= max_order; ++k) {
                double d = 0.0;
                const int rk = r - k;
                const int pk = p - k;
                if (r >= k) {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                const int j1 = rk >= -1 ? 1 : -rk;
                const int j2 = r - 1 <= pk ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                    d += a[s2][j] * ndu[rk + j][pk];
                }
                if (r <= pk) {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out.values[k][r] = d;
                std::swap(s1, s2);
            }
        }
        out.values[1] = scaled(out.values[1], p);
        out.values[2] = scaled(out.values[2], p * (p - 1));
        return out;
    }

    /// (B_1^(d)(t), ..., B_L^(d)(t)) for derivative order d in {0, 1, 2}.
    [[nodiscard]] Eigen::VectorXd evaluate(double t, int order = 0) const {
        check_order(order);
        const LocalBasis loc = local(t);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
        for (int j = 0; j <= degree; ++j) {
            out(static_cast<Eigen::Index>(loc.first + j)) = loc.values[order][j];
        }
        return out;
    }

    /// Integrals of every basis function over (lo, hi]. The interval is split
    /// at the knots and each polynomial piece is integrated with two-point
    /// Gauss-Legendre, which is exact for cubics.
    [[nodiscard]] Eigen::VectorXd integrate(double lo, double hi) const {
        if (!(lo < hi)) {
            throw DomainError("integration interval must satisfy lo < hi");
        }
        check_inside(lo);
        check_inside(hi);

        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
        const auto first = std::upper_bound(interior_.begin(), interior_.end(), lo);
        const auto last = std::lower_bound(interior_.begin(), interior_.end(), hi);

        double piece_lo = lo;
        auto add_piece = [&](double u, double v) {
            const double half = 0.5 * (v - u);
            const double mid = 0.5 * (u + v);
            const double offset = half * kGaussNode;
            for (const double x : {mid - offset, mid + offset}) {
                const LocalBasis loc = local(x);
                for (int j = 0; j <= degree; ++j) {
                    out(static_cast<Eigen::Index>(loc.first + j)) += half * loc.values[0][j];
                }
            }
        };
        for (auto it = first; it != last; ++it) {
            add_piece(piece_lo, *it);
            piece_lo = *it;
        }
        add_piece(piece_lo, hi);
        return out;
    }

private:
    static constexpr double kGaussNode = 0.57735026918962576451;  // 1/sqrt(3)

    static std::array<double, 4> scaled(std::array<double, 4> v, int factor) {
        for (double& x : v) {
            x *= factor;
        }
        return v;
    }

    void check_inside(double t) const {
        if (!(t >= start_ && t <= end_)) {
            throw DomainError("time " + std::to_string(t) + " outside the basis domain [" +
                              std::to_string(start_) + ", " + std::to_string(end_) + "]");
        }
    }

    static void check_order(int order) {
        if (order < 0 || order > 2) {
            throw DomainError("derivative order must be 0, 1 or 2, got " + std::to_string(order));
        }
    }

    double start_;
    double end_;
    std::vector<double> interior_;
    std::vector<double> knots_;
};

/// Clamped cubic basis on the study period with `interior_knot_count`
/// equally spaced interior knots (L = interior_knot_count + 4).
/// Throws IdentifiabilityError when L exceeds the number of bins.
inline SplineBasis make_basis(const StudyPeriod& period, std::size_t interior_knot_count) {
    const std::size_t basis_size = interior_knot_count + SplineBasis::degree + 1;
    if (basis_size > period.bins()) {
        throw IdentifiabilityError(basis_size, period.bins());
    }
    std::vector<double> interior;
    interior.reserve(interior_knot_count);
    const double step = period.length() / static_cast<double>(interior_knot_count + 1);
    for (std::size_t i = 1; i <= interior_knot_count; ++i) {
        interior.push_back(period.start() + static_cast<double>(i) * step);
    }
    return {period.start(), period.end(), std::move(interior)};
}

}  // namespace nhpp
