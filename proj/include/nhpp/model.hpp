#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nhpp/basis.hpp"
#include "nhpp/error.hpp"
#include "nhpp/period.hpp"

namespace nhpp {

/// Per-bin event counts X_1..X_N of one category over a study period.
class CountSeries {
public:
    CountSeries(StudyPeriod period, std::vector<std::int64_t> counts, std::string label = {})
        : period_(period), counts_(std::move(counts)), label_(std::move(label)) {
        if (counts_.size() != period_.bins()) {
            throw DomainError("count series has " + std::to_string(counts_.size()) + " entries but the period has " +
                              std::to_string(period_.bins()) + " bins");
        }
        for (std::size_t n = 0; n < counts_.size(); ++n) {
            if (counts_[n] < 0) {
                throw DomainError("negative count in bin " + std::to_string(n + 1));
            }
        }
    }

    [[nodiscard]] const StudyPeriod& period() const noexcept { return period_; }
    [[nodiscard]] std::span<const std::int64_t> counts() const noexcept { return counts_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    [[nodiscard]] std::size_t size() const noexcept { return counts_.size(); }
    [[nodiscard]] std::int64_t operator[](std::size_t n) const { return counts_.at(n); }

    /// Sum of counts over the zero-based bin range [first, last).
    [[nodiscard]] std::int64_t sum(std::size_t first, std::size_t last) const {
        return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(first),
                               counts_.begin() + static_cast<std::ptrdiff_t>(last), std::int64_t{0});
    }
    [[nodiscard]] std::int64_t total() const { return sum(0, counts_.size()); }

    friend bool operator==(const CountSeries&, const CountSeries&) = default;

private:
    StudyPeriod period_;
    std::vector<std::int64_t> counts_;
    std::string label_;
};

/// Integrated-basis covariates: entry (n, l) is the integral of B_l over bin n.
///
/// The log-mean of bin n is modelled as log(width) + row_n . beta / width,
/// i.e. the bin average of log lambda plus the log bin width. For unit-width
/// bins this is exactly row_n . beta.
class DesignMatrix {
public:
    DesignMatrix(Eigen::MatrixXd entries, double bin_width) : entries_(std::move(entries)), bin_width_(bin_width) {
        if (!(bin_width > 0.0)) {
            throw DomainError("bin width must be positive");
        }
    }

    [[nodiscard]] const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    [[nodiscard]] double bin_width() const noexcept { return bin_width_; }
    [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(entries_.cols()); }

    /// Covariates entering the linear predictor (entries / width).
    [[nodiscard]] Eigen::MatrixXd covariates() const {
        return bin_width_ == 1.0 ? entries_ : Eigen::MatrixXd(entries_ / bin_width_);
    }
    [[nodiscard]] double offset() const noexcept { return std::log(bin_width_); }

    /// The same bins observed `copies` times, rows repeated block-wise.
    [[nodiscard]] DesignMatrix stacked(std::size_t copies) const {
        Eigen::MatrixXd out(entries_.rows() * static_cast<Eigen::Index>(copies), entries_.cols());
        for (std::size_t c = 0; c < copies; ++c) {
            out.middleRows(static_cast<Eigen::Index>(c) * entries_.rows(), entries_.rows()) = entries_;
        }
        return {std::move(out), bin_width_};
    }

private:
    Eigen::MatrixXd entries_;
    double bin_width_;
};

inline DesignMatrix build_design(const SplineBasis& basis, const StudyPeriod& period) {
    if (basis.start() != period.start() || basis.end() != period.end()) {
        throw DomainError("basis is not defined on the study period");
    }
    Eigen::MatrixXd d(static_cast<Eigen::Index>(period.bins()), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t n = 0; n < period.bins(); ++n) {
        d.row(static_cast<Eigen::Index>(n)) = basis.integrate(period.bin_lower(n), period.bin_upper(n)).transpose();
    }
    return {std::move(d), period.bin_width()};
}

/// Largest |eta| accepted before exp() is considered to overflow.
inline constexpr double kMaxLinearPredictor = 700.0;

namespace detail {

inline void check_dimensions(const DesignMatrix& design, std::size_t count_size, Eigen::Index beta_size) {
    if (design.rows() != count_size) {
        throw DomainError("design has " + std::to_string(design.rows()) + " rows but there are " +
                          std::to_string(count_size) + " counts");
    }
    if (static_cast<Eigen::Index>(design.cols()) != beta_size) {
        throw DomainError("design has " + std::to_string(design.cols()) + " columns but beta has " +
                          std::to_string(beta_size) + " entries");
    }
}

inline Eigen::VectorXd counts_vector(std::span<const std::int64_t> counts) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t n = 0; n < counts.size(); ++n) {
        y(static_cast<Eigen::Index>(n)) = static_cast<double>(counts[n]);
    }
    return y;
}

}  // namespace detail

/// eta_n for every bin; throws NumericError naming the first bin whose
/// predictor is non-finite or exceeds kMaxLinearPredictor in magnitude.
inline Eigen::VectorXd linear_predictor(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    if (static_cast<Eigen::Index>(design.cols()) != beta.size()) {
        throw DomainError("beta length does not match the design");
    }
    Eigen::VectorXd eta = design.entries() * beta;
    if (design.bin_width() != 1.0) {
        eta = (eta / design.bin_width()).array() + design.offset();
    }
    for (Eigen::Index n = 0; n < eta.size(); ++n) {
        if (!std::isfinite(eta(n))) {
            throw NumericError("non-finite linear predictor", static_cast<std::size_t>(n));
        }
        if (std::abs(eta(n)) > kMaxLinearPredictor) {
            throw NumericError("linear predictor overflow |eta| > 700", static_cast<std::size_t>(n));
        }
    }
    return eta;
}

inline Eigen::VectorXd fitted_means(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    return linear_predictor(design, beta).array().exp();
}

/// Poisson log-likelihood sum_n [X_n eta_n - exp(eta_n) - log(X_n!)].
inline double log_likelihood(const DesignMatrix& design, std::span<const std::int64_t> counts,
                             const Eigen::VectorXd& beta) {
    detail::check_dimensions(design, counts.size(), beta.size());
    const Eigen::VectorXd eta = linear_predictor(design, beta);
    double ll = 0.0;
    for (std::size_t n = 0; n < counts.size(); ++n) {
        const double x = static_cast<double>(counts[n]);
        const double e = eta(static_cast<Eigen::Index>(n));
        ll += x * e - std::exp(e) - std::lgamma(x + 1.0);
    }
    return ll;
}

inline double log_likelihood(const DesignMatrix& design, const CountSeries& series, const Eigen::VectorXd& beta) {
    return log_likelihood(design, series.counts(), beta);
}

/// Gradient of the log-likelihood in beta.
inline Eigen::VectorXd score(const DesignMatrix& design, std::span<const std::int64_t> counts,
                             const Eigen::VectorXd& beta) {
    detail::check_dimensions(design, counts.size(), beta.size());
    const Eigen::VectorXd residual = detail::counts_vector(counts) - fitted_means(design, beta);
    return design.covariates().transpose() * residual;
}

/// I_ij = sum_n x_ni x_nj mu_n(beta), the weighted cross-product of the
/// covariate rows. Equals the negative Hessian of the log-likelihood.
inline Eigen::MatrixXd fisher_information(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd mu = fitted_means(design, beta);
    const Eigen::MatrixXd x = design.covariates();
    Eigen::MatrixXd info = x.transpose() * mu.asDiagonal() * x;
    return 0.5 * (info + info.transpose());
}

struct FitOptions {
    double loglik_tolerance = 1e-10;
    double score_tolerance = 1e-8;
    int max_iterations = 100;
    int max_halvings = 30;
};

struct FitResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    double log_likelihood = 0.0;
    int iterations = 0;
    int stalled = 0;
    bool converged = false;
    Eigen::VectorXd fitted_means;
    double score_norm = 0.0;
    std::vector<double> loglik_trace;  ///< log-likelihood at the start and after each accepted step

    [[nodiscard]] Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
};

namespace detail {

inline void check_fit_inputs(const DesignMatrix& design, std::span<const std::int64_t> counts) {
    if (design.rows() != counts.size()) {
        throw DomainError("design has " + std::to_string(design.rows()) + " rows but there are " +
                          std::to_string(counts.size()) + " counts");
    }
    if (design.cols() == 0) {
        throw DomainError("design has no columns");
    }
    if (design.cols() > design.rows()) {
        throw IdentifiabilityError(design.cols(), design.rows());
    }
    std::int64_t total = 0;
    for (std::size_t n = 0; n < counts.size(); ++n) {
        if (counts[n] < 0) {
            throw DomainError("negative count in bin " + std::to_string(n + 1));
        }
        total += counts[n];
    }
    if (total == 0) {
        throw DegenerateDataError("all counts are zero; the Poisson MLE does not exist (log-intensity diverges to -inf)");
    }
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        carry_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline Eigen::LLT<Eigen::MatrixXd> factor_information(const Eigen::MatrixXd& info) {
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
        throw RankDeficiencyError(
            "Fisher information is singular or numerically rank deficient; "
            "use fewer interior knots or check for long runs of zero counts");
    }
    return llt;
}

/// Exact change in log-likelihood when eta moves by d_eta, summed per bin
/// as X d_eta - mu expm1(d_eta). Differencing two full log-likelihoods
/// loses the last few digits near the optimum; this does not. Returns -inf
/// if the moved predictor leaves the representable range.
inline double loglik_increment(const Eigen::VectorXd& eta, const Eigen::VectorXd& d_eta,
                               std::span<const std::int64_t> counts) {
    CompensatedSum acc;
    for (Eigen::Index n = 0; n < eta.size(); ++n) {
        const double moved = eta(n) + d_eta(n);
        if (!std::isfinite(moved) || std::abs(moved) > kMaxLinearPredictor) {
            return -std::numeric_limits<double>::infinity();
        }
        acc.add(static_cast<double>(counts[static_cast<std::size_t>(n)]) * d_eta(n) -
                std::exp(eta(n)) * std::expm1(d_eta(n)));
    }
    return acc.value();
}

}  // namespace detail

/// Poisson maximum-likelihood fit by Fisher scoring with step halving.
///
/// Starts from beta_l = log(mean count / width) for every l, the constant
/// empirical rate. Converges when the score max-norm drops below
/// `score_tolerance`; log-likelihood changes below `loglik_tolerance` on
/// three consecutive steps end the iteration as a stall. The covariance is
/// the inverse Fisher information at the estimate.
inline FitResult fit_mle(const DesignMatrix& design, std::span<const std::int64_t> counts,
                         const FitOptions& options = {}) {
    detail::check_fit_inputs(design, counts);

    const auto cols = static_cast<Eigen::Index>(design.cols());
    const double mean_count =
        static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0})) /
        static_cast<double>(counts.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(cols, std::log(mean_count / design.bin_width()));

    const Eigen::MatrixXd covariates = design.covariates();
    double ll = log_likelihood(design, counts, beta);
    std::vector<double> trace{ll};
    int iterations = 0;
    int stalled = 0;
    bool converged = false;
    double score_norm = std::numeric_limits<double>::infinity();

    while (true) {
        const Eigen::VectorXd grad = score(design, counts, beta);
        score_norm = grad.lpNorm<Eigen::Infinity>();
        if (score_norm < options.score_tolerance) {
            converged = true;
            break;
        }
        if (iterations >= options.max_iterations) {
            break;
        }
        const auto llt = detail::factor_information(fisher_information(design, beta));
        const Eigen::VectorXd step = llt.solve(grad);
        ++iterations;

        const Eigen::VectorXd eta = linear_predictor(design, beta);
        const Eigen::VectorXd d_eta_full = covariates * step;
        double scale = 1.0;
        double gain = detail::loglik_increment(eta, d_eta_full, counts);
        for (int h = 0; h < options.max_halvings && !(gain >= 0.0); ++h) {
            scale *= 0.5;
            gain = detail::loglik_increment(eta, scale * d_eta_full, counts);
        }
        if (!(gain >= 0.0)) {
            // No ascent at machine precision: accept only if the Newton step
            // itself is negligible.
            converged = step.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + beta.lpNorm<Eigen::Infinity>());
            break;
        }
        beta += scale * step;
        ll += gain;
        trace.push_back(ll);
        stalled = gain < options.loglik_tolerance ? stalled + 1 : 0;
        if (stalled >= 3) {
            // Flat for three steps yet the score is not small: accept only a
            // negligible step.
            score_norm = score(design, counts, beta).lpNorm<Eigen::Infinity>();
            converged = score_norm < options.score_tolerance ||
                        (scale * step).lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + beta.lpNorm<Eigen::Infinity>());
            break;
        }
    }

    if (!converged) {
        throw ConvergenceError("Fisher scoring did not converge after " + std::to_string(iterations) +
                                   " iterations (score max-norm " + std::to_string(score_norm) + ")",
                               std::vector<double>(beta.data(), beta.data() + beta.size()), score_norm);
    }

    const Eigen::MatrixXd info = fisher_information(design, beta);
    const auto llt = detail::factor_information(info);
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(cols, cols));
    cov = 0.5 * (cov + cov.transpose());

    FitResult out;
    out.beta = std::move(beta);
    out.covariance = std::move(cov);
    out.log_likelihood = log_likelihood(design, counts, out.beta);
    out.iterations = iterations;
    out.converged = true;
    out.fitted_means = fitted_means(design, out.beta);
    out.score_norm = score_norm;
    out.loglik_trace = std::move(trace);
    return out;
}

inline FitResult fit_mle(const DesignMatrix& design, const CountSeries& series, const FitOptions& options = {}) {
    return fit_mle(design, series.counts(), options);
}

}  // namespace nhpp
