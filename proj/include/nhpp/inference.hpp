#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nhpp/basis.hpp"
#include "nhpp/error.hpp"
#include "nhpp/model.hpp"

namespace nhpp {

/// Two-sided 95% standard normal quantile.
inline constexpr double kNormalQuantile95 = 1.959964;

enum class BandScale {
    linear,  ///< value +/- z * se, may cross zero
    log,     ///< exp(log value +/- z * se_log), order 0 only
};

struct CurveEstimate {
    std::vector<double> grid;
    int order = 0;
    std::vector<double> value;
    std::vector<double> std_error;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
};

namespace detail {

/// g(t) = sum_l beta_l B_l(t) and its first two derivatives, plus the local basis.
struct LogIntensityJet {
    LocalBasis basis;
    double g0 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
};

inline LogIntensityJet log_intensity_jet(const Eigen::VectorXd& beta, const SplineBasis& basis, double t) {
    if (beta.size() != static_cast<Eigen::Index>(basis.size())) {
        throw DomainError("coefficient vector length does not match the basis");
    }
    LogIntensityJet jet;
    jet.basis = basis.local(t);
    for (int j = 0; j <= SplineBasis::degree; ++j) {
        const double b = beta(static_cast<Eigen::Index>(jet.basis.first + j));
        jet.g0 += b * jet.basis.values[0][j];
        jet.g1 += b * jet.basis.values[1][j];
        jet.g2 += b * jet.basis.values[2][j];
    }
    return jet;
}

inline void check_order(int order) {
    if (order < 0 || order > 2) {
        throw DomainError("curve order must be 0, 1 or 2, got " + std::to_string(order));
    }
}

}  // namespace detail

/// lambda(t), lambda'(t) or lambda''(t) for lambda = exp(sum_l beta_l B_l).
inline double intensity_value(const Eigen::VectorXd& beta, const SplineBasis& basis, double t, int order) {
    detail::check_order(order);
    const auto jet = detail::log_intensity_jet(beta, basis, t);
    const double lambda = std::exp(jet.g0);
    switch (order) {
        case 0: return lambda;
        case 1: return lambda * jet.g1;
        default: return lambda * (jet.g2 + jet.g1 * jet.g1);
    }
}

/// Gradient of lambda^(order)(t) with respect to beta.
inline Eigen::VectorXd intensity_gradient(const Eigen::VectorXd& beta, const SplineBasis& basis, double t,
                                          int order) {
    detail::check_order(order);
    const auto jet = detail::log_intensity_jet(beta, basis, t);
    const double lambda = std::exp(jet.g0);
    const auto& v = jet.basis.values;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(beta.size());
    for (int j = 0; j <= SplineBasis::degree; ++j) {
        double d = 0.0;
        switch (order) {
            case 0: d = v[0][j]; break;
            case 1: d = v[1][j] + v[0][j] * jet.g1; break;
            default: d = v[2][j] + v[0][j] * (jet.g2 + jet.g1 * jet.g1) + 2.0 * v[1][j] * jet.g1; break;
        }
        grad(static_cast<Eigen::Index>(jet.basis.first + j)) = lambda * d;
    }
    return grad;
}

/// Delta-method variance grad' * Cov * grad of lambda^(order)(t).
inline double delta_method_variance(const FitResult& fit, const SplineBasis& basis, double t, int order) {
    const Eigen::VectorXd grad = intensity_gradient(fit.beta, basis, t, order);
    return std::max(0.0, grad.dot(fit.covariance * grad));
}

/// `points` equally spaced times covering [a, b] inclusive.
inline std::vector<double> default_grid(double start, double end, std::size_t points = 1001) {
    if (points < 2) {
        throw DomainError("grid needs at least 2 points");
    }
    std::vector<double> grid(points);
    const double step = (end - start) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = start + static_cast<double>(i) * step;
    }
    grid.back() = end;
    return grid;
}

inline std::vector<double> default_grid(const SplineBasis& basis, std::size_t points = 1001) {
    return default_grid(basis.start(), basis.end(), points);
}

/// Point estimates, delta-method standard errors and pointwise 95% bands of
/// lambda^(order) on a grid. With BandScale::log (order 0 only) the band is
/// built on log lambda and exponentiated, so it stays positive.
inline CurveEstimate intensity(const FitResult& fit, const SplineBasis& basis, const std::vector<double>& grid,
                               int order, BandScale scale = BandScale::linear) {
    detail::check_order(order);
    if (scale == BandScale::log && order != 0) {
        throw DomainError("log-scale bands are only defined for the intensity itself (order 0)");
    }
    for (const double t : grid) {
        if (!(t >= basis.start() && t <= basis.end())) {
            throw DomainError("grid time " + std::to_string(t) + " outside the study period");
        }
    }

    CurveEstimate out;
    out.grid = grid;
    out.order = order;
    const std::size_t n = grid.size();
    out.value.resize(n);
    out.std_error.resize(n);
    out.ci_low.resize(n);
    out.ci_high.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid[i];
        const double value = intensity_value(fit.beta, basis, t, order);
        const double se = std::sqrt(delta_method_variance(fit, basis, t, order));
        out.value[i] = value;
        out.std_error[i] = se;
        if (scale == BandScale::linear) {
            out.ci_low[i] = value - kNormalQuantile95 * se;
            out.ci_high[i] = value + kNormalQuantile95 * se;
        } else {
            const Eigen::VectorXd b = basis.evaluate(t, 0);
            const double se_log = std::sqrt(std::max(0.0, b.dot(fit.covariance * b)));
            out.ci_low[i] = value * std::exp(-kNormalQuantile95 * se_log);
            out.ci_high[i] = value * std::exp(kNormalQuantile95 * se_log);
        }
    }
    return out;
}

}  // namespace nhpp
