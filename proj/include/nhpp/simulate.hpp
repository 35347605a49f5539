#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nhpp/basis.hpp"
#include "nhpp/error.hpp"
#include "nhpp/model.hpp"
#include "nhpp/period.hpp"

namespace nhpp {

/// Name recorded next to every seed so a simulation can be replayed.
inline constexpr std::string_view kRngName = "mt19937_64/splitmix64-streams";

/// splitmix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream `stream` under master seed `seed`; streams are
/// order-independent, so replicate r always sees the same draws.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Platform-stable generator. Only the raw 64-bit mt19937_64 output is used;
/// all variates are derived here rather than through <random>'s
/// implementation-defined distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept {
        double u = 0.0;
        while (u == 0.0) {
            u = uniform();
        }
        return u;
    }

    double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

    std::int64_t poisson(double mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean)) {
            throw DomainError("Poisson mean must be finite and nonnegative");
        }
        if (mean == 0.0) return 0;
        return mean < 10.0 ? poisson_inversion(mean) : poisson_ptrs(mean);
    }

private:
    std::int64_t poisson_inversion(double mean) noexcept {
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::int64_t k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    // Hormann's transformed rejection with squeeze (PTRS), valid for mean >= 10.
    std::int64_t poisson_ptrs(double mean) noexcept {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        while (true) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::abs(u);
            const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
            if (us >= 0.07 && v <= vr) {
                return k;
            }
            if (k < 0 || (us < 0.013 && v > us)) {
                continue;
            }
            const double kd = static_cast<double>(k);
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + kd * loglam - std::lgamma(kd + 1.0)) {
                return k;
            }
        }
    }

    std::mt19937_64 engine_;
};

struct ConstantRate {
    double rate = 1.0;
};

/// lambda(t) = exp(sum_l beta_l B_l(t)).
struct SplineRate {
    Eigen::VectorXd beta;
    SplineBasis basis;
};

/// rate_before on (a, change_time], rate_after on (change_time, b].
struct StepRate {
    double rate_before = 1.0;
    double rate_after = 1.0;
    double change_time = 0.0;
};

/// Linear from start_rate at a to end_rate at b.
struct RampRate {
    double start_rate = 1.0;
    double end_rate = 1.0;
};

/// A synthetic intensity over a study period.
class IntensitySpec {
public:
    using Kind = std::variant<ConstantRate, SplineRate, StepRate, RampRate>;

    IntensitySpec(StudyPeriod domain, Kind kind) : domain_(domain), kind_(std::move(kind)) { validate(); }

    [[nodiscard]] const StudyPeriod& domain() const noexcept { return domain_; }
    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    [[nodiscard]] std::string_view name() const noexcept {
        constexpr std::array<std::string_view, 4> names{"constant", "spline", "step", "ramp"};
        return names[kind_.index()];
    }

    [[nodiscard]] double rate(double t) const {
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantRate>) {
                    return k.rate;
                } else if constexpr (std::is_same_v<K, SplineRate>) {
                    return std::exp(k.basis.evaluate(t, 0).dot(k.beta));
                } else if constexpr (std::is_same_v<K, StepRate>) {
                    return t <= k.change_time ? k.rate_before : k.rate_after;
                } else {
                    return ramp_at(k, t);
                }
            },
            kind_);
    }

    /// Integral of lambda over (lo, hi]. Exact for constant, step and ramp;
    /// eight-point Gauss-Legendre on each knot piece for splines.
    [[nodiscard]] double integral(double lo, double hi) const {
        if (!(lo <= hi) || lo < domain_.start() || hi > domain_.end()) {
            throw DomainError("integration window must satisfy a <= lo <= hi <= b");
        }
        return std::visit(
            [&](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantRate>) {
                    return k.rate * (hi - lo);
                } else if constexpr (std::is_same_v<K, SplineRate>) {
                    return spline_integral(k, lo, hi);
                } else if constexpr (std::is_same_v<K, StepRate>) {
                    const double cut = std::clamp(k.change_time, lo, hi);
                    return k.rate_before * (cut - lo) + k.rate_after * (hi - cut);
                } else {
                    return 0.5 * (ramp_at(k, lo) + ramp_at(k, hi)) * (hi - lo);
                }
            },
            kind_);
    }

    /// Upper bound on lambda over the domain, used as the thinning envelope.
    /// For splines, sum_l beta_l B_l <= max_l beta_l by the partition of unity.
    [[nodiscard]] double upper_bound() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantRate>) {
                    return k.rate;
                } else if constexpr (std::is_same_v<K, SplineRate>) {
                    return std::exp(k.beta.maxCoeff());
                } else if constexpr (std::is_same_v<K, StepRate>) {
                    return std::max(k.rate_before, k.rate_after);
                } else {
                    return std::max(k.start_rate, k.end_rate);
                }
            },
            kind_);
    }

private:
    static bool positive(double r) { return std::isfinite(r) && r > 0.0; }

    [[nodiscard]] double ramp_at(const RampRate& k, double t) const {
        return k.start_rate + (k.end_rate - k.start_rate) * (t - domain_.start()) / domain_.length();
    }

    static double spline_integral(const SplineRate& k, double lo, double hi) {
        static constexpr std::array<double, 4> nodes{0.18343464249564980494, 0.52553240991632898582,
                                                     0.79666647741362673959, 0.96028985649753623168};
        static constexpr std::array<double, 4> weights{0.36268378337836198297, 0.31370664587788728734,
                                                       0.22238103445337447054, 0.10122853629037625915};
        if (lo == hi) return 0.0;
        std::vector<double> cuts{lo};
        for (const double knot : k.basis.interior_knots()) {
            if (knot > lo && knot < hi) cuts.push_back(knot);
        }
        cuts.push_back(hi);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double half = 0.5 * (cuts[i + 1] - cuts[i]);
            const double mid = 0.5 * (cuts[i + 1] + cuts[i]);
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                for (const double sign : {-1.0, 1.0}) {
                    const double t = mid + sign * half * nodes[j];
                    total += half * weights[j] * std::exp(k.basis.evaluate(t, 0).dot(k.beta));
                }
            }
        }
        return total;
    }

    void validate() const {
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantRate>) {
                    if (!positive(k.rate)) throw SpecError("constant rate must be positive");
                } else if constexpr (std::is_same_v<K, SplineRate>) {
                    if (k.basis.start() != domain_.start() || k.basis.end() != domain_.end()) {
                        throw SpecError("spline intensity basis is not defined on the simulation domain");
                    }
                    if (k.beta.size() != static_cast<Eigen::Index>(k.basis.size())) {
                        throw SpecError("spline intensity coefficient count does not match the basis");
                    }
                    if (!k.beta.allFinite()) {
                        throw SpecError("spline intensity coefficients must be finite (unbounded intensity)");
                    }
                } else if constexpr (std::is_same_v<K, StepRate>) {
                    if (!positive(k.rate_before) || !positive(k.rate_after)) {
                        throw SpecError("step rates must be positive");
                    }
                    if (!(k.change_time > domain_.start() && k.change_time < domain_.end())) {
                        throw SpecError("step change time must lie strictly inside (a, b)");
                    }
                } else {
                    if (!positive(k.start_rate) || !positive(k.end_rate)) {
                        throw SpecError("ramp rates must be positive");
                    }
                }
            },
            kind_);
        if (!std::isfinite(upper_bound())) {
            throw SpecError("intensity has no finite upper bound on the domain");
        }
    }

    StudyPeriod domain_;
    Kind kind_;
};

/// Independent Poisson draws with mean equal to the integral of lambda over
/// each bin. Deterministic in `seed`.
inline CountSeries simulate_counts(const IntensitySpec& spec, std::uint64_t seed, std::string label = "simulated") {
    const StudyPeriod& period = spec.domain();
    Rng rng(seed);
    std::vector<std::int64_t> counts(period.bins());
    for (std::size_t n = 0; n < period.bins(); ++n) {
        counts[n] = rng.poisson(spec.integral(period.bin_lower(n), period.bin_upper(n)));
    }
    return {period, std::move(counts), std::move(label)};
}

struct ThinningResult {
    std::vector<double> times;   ///< accepted event times, increasing
    std::size_t proposals = 0;   ///< candidate points drawn from the envelope
    double envelope = 0.0;       ///< lambda_max
};

/// Event times on (lo, hi] by thinning a homogeneous process of rate
/// lambda_max. An empty window yields no events.
inline ThinningResult thin_events(const IntensitySpec& spec, double lo, double hi, std::uint64_t seed) {
    const StudyPeriod& d = spec.domain();
    if (!(lo <= hi) || lo < d.start() || hi > d.end()) {
        throw DomainError("event window must satisfy a <= lo <= hi <= b");
    }
    ThinningResult out;
    out.envelope = spec.upper_bound();
    if (lo == hi) return out;
    Rng rng(seed);
    double t = lo;
    while (true) {
        t += rng.exponential(out.envelope);
        if (t > hi) break;
        ++out.proposals;
        if (rng.uniform() * out.envelope < spec.rate(t)) {
            out.times.push_back(t);
        }
    }
    return out;
}

inline std::vector<double> simulate_events(const IntensitySpec& spec, double lo, double hi, std::uint64_t seed) {
    return thin_events(spec, lo, hi, seed).times;
}

inline std::vector<double> simulate_events(const IntensitySpec& spec, std::uint64_t seed) {
    return simulate_events(spec, spec.domain().start(), spec.domain().end(), seed);
}

/// Number of events falling in each bin (a + (n-1) width, a + n width].
inline std::vector<std::int64_t> bin_events(const std::vector<double>& times, const StudyPeriod& period) {
    std::vector<std::int64_t> counts(period.bins(), 0);
    for (const double t : times) {
        if (!(t > period.start() && t <= period.end())) continue;
        auto n = static_cast<std::size_t>(std::ceil((t - period.start()) / period.bin_width())) - 1;
        n = std::min(n, period.bins() - 1);
        // Guard the ceil against rounding at bin edges.
        while (n > 0 && t <= period.bin_lower(n)) --n;
        while (n + 1 < period.bins() && t > period.bin_upper(n)) ++n;
        ++counts[n];
    }
    return counts;
}

struct BootstrapResult {
    std::vector<FitResult> fits;  ///< converged replicates, in replicate order
    std::size_t requested = 0;
    std::size_t dropped = 0;
    std::uint64_t seed = 0;
};

/// Resample counts from Poisson(mu_hat_n) and refit with the same design and
/// options. Replicate r draws from stream derive_seed(seed, r). Replicates
/// that fail to fit are dropped; more than 10% dropped raises OracleError.
inline BootstrapResult parametric_bootstrap(const FitResult& fit, const DesignMatrix& design,
                                            std::size_t replications, std::uint64_t seed,
                                            const FitOptions& options = {}) {
    if (!fit.converged) {
        throw DomainError("parametric bootstrap requires a converged fit");
    }
    if (static_cast<std::size_t>(fit.fitted_means.size()) != design.rows()) {
        throw DomainError("fit and design disagree on the number of bins");
    }
    BootstrapResult out;
    out.requested = replications;
    out.seed = seed;
    out.fits.reserve(replications);
    std::vector<std::int64_t> counts(design.rows());
    for (std::size_t r = 0; r < replications; ++r) {
        Rng rng(derive_seed(seed, r));
        for (std::size_t n = 0; n < counts.size(); ++n) {
            counts[n] = rng.poisson(fit.fitted_means(static_cast<Eigen::Index>(n)));
        }
        try {
            out.fits.push_back(fit_mle(design, counts, options));
        } catch (const Error&) {
            ++out.dropped;
        }
    }
    if (replications > 0 && 10 * out.dropped > replications) {
        throw OracleError("parametric bootstrap unreliable: " + std::to_string(out.dropped) + " of " +
                          std::to_string(replications) + " replicates failed to fit");
    }
    return out;
}

}  // namespace nhpp
