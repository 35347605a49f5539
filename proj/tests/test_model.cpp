#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nhpp/model.hpp"
#include "nhpp/simulate.hpp"
#include "oracles.hpp"

using namespace nhpp;

namespace {

const StudyPeriod kPeriod = StudyPeriod::annual(1891, 2015);

CountSeries wavy_series(std::uint64_t seed) {
    // Smooth rise and fall, similar in scale to annual depression counts.
    const auto basis = make_basis(kPeriod, 9);
    Eigen::VectorXd beta(13);
    beta << 1.6, 1.5, 1.7, 1.9, 1.8, 1.7, 1.6, 1.5, 1.6, 1.7, 1.5, 1.3, 1.2;
    return simulate_counts(IntensitySpec(kPeriod, SplineRate{beta, basis}), seed);
}

}  // namespace

TEST_CASE("design rows integrate the basis over each bin", "[model][design]") {
    for (const std::size_t knots : {0u, 9u}) {
        const auto basis = make_basis(kPeriod, knots);
        const auto design = build_design(basis, kPeriod);
        REQUIRE(design.rows() == 125);
        REQUIRE(design.cols() == basis.size());
        const Eigen::MatrixXd& d = design.entries();
        CHECK(d.minCoeff() >= 0.0);
        CHECK((d.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
        CHECK(std::abs(d.sum() - 125.0) < 1e-8);
    }
    const auto basis = make_basis(kPeriod, 9);
    const auto design = build_design(basis, kPeriod);
    // B_1 is supported on [1891, 1903.5]; bin 120 is the year 2010.
    CHECK(design.entries()(119, 0) == 0.0);
    CHECK_THROWS_AS(build_design(basis, StudyPeriod::annual(1890, 2015)), DomainError);
}

TEST_CASE("log-likelihood at zero coefficients has unit means", "[model][loglik]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    const auto series = wavy_series(1);
    double expected = 0.0;
    for (const auto x : series.counts()) expected += -1.0 - std::lgamma(static_cast<double>(x) + 1.0);
    CHECK(log_likelihood(design, series, Eigen::VectorXd::Zero(13)) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("one-bin Poisson MLE is the log count", "[model][loglik]") {
    const DesignMatrix design(Eigen::MatrixXd::Ones(1, 1), 1.0);
    const std::vector<std::int64_t> x{3};
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, std::log(3.0));
    CHECK(log_likelihood(design, x, beta) ==
          Catch::Approx(3.0 * std::log(3.0) - 3.0 - std::log(6.0)).epsilon(1e-14));
    const auto fit = fit_mle(design, x);
    CHECK(fit.beta(0) == Catch::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(fit.covariance(0, 0) == Catch::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("log-likelihood equals the log of the Poisson pmf product", "[model][loglik][oracle]") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> counts(0, 9);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd d(5, 3);
        for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = unif(gen);
        const DesignMatrix design(d, 1.0);
        Eigen::VectorXd beta(3);
        for (Eigen::Index i = 0; i < 3; ++i) beta(i) = 2.0 * unif(gen) - 0.5;
        std::vector<std::int64_t> x(5);
        for (auto& v : x) v = counts(gen);
        const Eigen::VectorXd mu = (d * beta).array().exp();
        const double expected = oracle::poisson_log_pmf_product({mu.data(), mu.data() + mu.size()}, x);
        REQUIRE(std::abs(log_likelihood(design, x, beta) - expected) < 1e-12);
    }
}

TEST_CASE("overflowing linear predictor names the bin", "[model][errors]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(13);
    beta(12) = 1000.0;  // only the last basis function reaches the final bins
    const auto series = wavy_series(2);
    try {
        (void)log_likelihood(design, series, beta);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.bin() >= 100);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("bin"));
    }
    beta(12) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fisher_information(design, beta), NumericError);
}

TEST_CASE("Fisher information at zero is the Gram matrix of the design", "[model][fisher]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    const Eigen::MatrixXd d = design.entries();
    const Eigen::MatrixXd info = fisher_information(design, Eigen::VectorXd::Zero(13));
    CHECK((info - d.transpose() * d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-coefficient Fisher information", "[model][fisher]") {
    Eigen::MatrixXd d(4, 1);
    d << 0.5, 1.0, 0.25, 2.0;
    const DesignMatrix design(d, 1.0);
    const double c = 0.7;
    double expected = 0.0;
    for (Eigen::Index n = 0; n < 4; ++n) expected += d(n) * d(n) * std::exp(c * d(n));
    CHECK(fisher_information(design, Eigen::VectorXd::Constant(1, c))(0, 0) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("Fisher information is the negative Hessian of the log-likelihood", "[model][fisher][oracle]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    const auto series = wavy_series(3);
    const auto fit = fit_mle(design, series);
    for (const Eigen::VectorXd& beta : {fit.beta, Eigen::VectorXd(fit.beta.array() + 0.1),
                                        Eigen::VectorXd(Eigen::VectorXd::Constant(13, 1.2))}) {
        const Eigen::MatrixXd info = fisher_information(design, beta);
        const double h = 1e-3;
        Eigen::MatrixXd hess(13, 13);
        auto ll = [&](const Eigen::VectorXd& b) { return log_likelihood(design, series, b); };
        for (Eigen::Index i = 0; i < 13; ++i) {
            for (Eigen::Index j = 0; j < 13; ++j) {
                Eigen::VectorXd pp = beta, pm = beta, mp = beta, mm = beta;
                pp(i) += h; pp(j) += h;
                pm(i) += h; pm(j) -= h;
                mp(i) -= h; mp(j) += h;
                mm(i) -= h; mm(j) -= h;
                hess(i, j) = (ll(pp) - ll(pm) - ll(mp) + ll(mm)) / (4.0 * h * h);
            }
        }
        const double rel = (info + hess).cwiseAbs().maxCoeff() / info.cwiseAbs().maxCoeff();
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("constant series is fitted by the constant rate", "[model][fit]") {
    for (const std::int64_t c : {1, 5, 40}) {
        const auto basis = make_basis(kPeriod, 9);
        const auto design = build_design(basis, kPeriod);
        const CountSeries series(kPeriod, std::vector<std::int64_t>(125, c));
        const auto fit = fit_mle(design, series);
        CHECK(fit.converged);
        CHECK((fit.fitted_means.array() - static_cast<double>(c)).abs().maxCoeff() < 1e-8);
        CHECK((fit.beta.array() - std::log(static_cast<double>(c))).abs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("constant rate with non-unit bins is c / width", "[model][fit]") {
    const StudyPeriod quarters(0.0, 25.0, 100);  // width 0.25
    const auto design = build_design(make_basis(quarters, 6), quarters);
    const CountSeries series(quarters, std::vector<std::int64_t>(100, 3));
    const auto fit = fit_mle(design, series);
    CHECK((fit.beta.array().exp() - 12.0).abs().maxCoeff() < 1e-8);
    CHECK((fit.fitted_means.array() - 3.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("fitted result satisfies the score, mean-matching and covariance invariants", "[model][fit][property]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    for (std::uint64_t seed = 10; seed < 30; ++seed) {
        const auto series = wavy_series(seed);
        const auto fit = fit_mle(design, series);
        REQUIRE(fit.converged);
        CHECK(fit.score_norm < 1e-8);
        CHECK(score(design, series.counts(), fit.beta).lpNorm<Eigen::Infinity>() < 1e-8);

        const double total = static_cast<double>(series.total());
        CHECK(std::abs(fit.fitted_means.sum() - total) / total < 1e-6);

        CHECK((fit.covariance - fit.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fit.covariance).eigenvalues().minCoeff() > 0.0);
        const Eigen::MatrixXd id = fit.covariance * fisher_information(design, fit.beta);
        CHECK((id - Eigen::MatrixXd::Identity(13, 13)).cwiseAbs().maxCoeff() < 1e-8);

        for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
            CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1]);
        }
        CHECK(fit.log_likelihood == Catch::Approx(fit.loglik_trace.back()).epsilon(1e-12));
    }
}

TEST_CASE("fits are bitwise reproducible", "[model][fit]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    const auto series = wavy_series(77);
    const auto a = fit_mle(design, series);
    const auto b = fit_mle(design, series);
    CHECK(a.beta == b.beta);
    CHECK(a.covariance == b.covariance);
    CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("shifting the study period leaves fitted means unchanged", "[model][fit][property]") {
    const auto series = wavy_series(5);
    const auto fit = fit_mle(build_design(make_basis(kPeriod, 9), kPeriod), series);
    for (const double shift : {-1891.0, 37.25, 1000.0}) {
        const StudyPeriod moved(kPeriod.start() + shift, kPeriod.end() + shift, kPeriod.bins());
        const CountSeries moved_series(moved, {series.counts().begin(), series.counts().end()});
        const auto moved_fit = fit_mle(build_design(make_basis(moved, 9), moved), moved_series);
        CHECK((moved_fit.fitted_means - fit.fitted_means).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("fit_mle rejects degenerate inputs", "[model][fit][errors]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);

    CHECK_THROWS_AS(fit_mle(design, CountSeries(kPeriod, std::vector<std::int64_t>(125, 0))), DegenerateDataError);

    Eigen::MatrixXd dup = design.entries();
    dup.col(1) = dup.col(0);
    CHECK_THROWS_AS(fit_mle(DesignMatrix(dup, 1.0), wavy_series(8)), RankDeficiencyError);

    const std::vector<std::int64_t> short_counts(10, 1);
    CHECK_THROWS_AS(fit_mle(design, short_counts), DomainError);

    const DesignMatrix wide(Eigen::MatrixXd::Ones(3, 5), 1.0);
    CHECK_THROWS_AS(fit_mle(wide, std::vector<std::int64_t>{1, 2, 3}), IdentifiabilityError);
}

TEST_CASE("non-convergence carries the last iterate", "[model][fit][errors]") {
    const auto design = build_design(make_basis(kPeriod, 9), kPeriod);
    FitOptions options;
    options.max_iterations = 1;
    try {
        (void)fit_mle(design, wavy_series(9), options);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterate().size() == 13);
        CHECK(e.score_norm() > options.score_tolerance);
    }
}

TEST_CASE("count series validates its counts", "[model]") {
    CHECK_THROWS_AS(CountSeries(kPeriod, std::vector<std::int64_t>(124, 1)), DomainError);
    std::vector<std::int64_t> bad(125, 1);
    bad[7] = -1;
    CHECK_THROWS_AS(CountSeries(kPeriod, bad), DomainError);
    const CountSeries ok(kPeriod, std::vector<std::int64_t>(125, 2), "D");
    CHECK(ok.total() == 250);
    CHECK(ok.sum(0, 114) == 228);
}

TEST_CASE("replicated-bin fits recover the generating coefficients", "[model][fit][simulation]") {
    // Ten independent series over the same 125 bins, pooled into one fit.
    const auto basis = make_basis(kPeriod, 9);
    const auto design = build_design(basis, kPeriod);
    const auto stacked = design.stacked(10);
    Eigen::VectorXd truth(13);
    truth << 1.5, 1.4, 1.6, 1.9, 1.8, 1.6, 1.5, 1.4, 1.6, 1.8, 1.6, 1.4, 1.3;
    const IntensitySpec spec(kPeriod, SplineRate{truth, basis});

    std::size_t inside = 0;
    std::size_t total = 0;
    constexpr std::size_t kReplications = 500;
    for (std::size_t r = 0; r < kReplications; ++r) {
        std::vector<std::int64_t> pooled;
        pooled.reserve(1250);
        for (std::uint64_t c = 0; c < 10; ++c) {
            const auto s = simulate_counts(spec, derive_seed(4242, r * 10 + c));
            pooled.insert(pooled.end(), s.counts().begin(), s.counts().end());
        }
        const auto fit = fit_mle(stacked, pooled);
        const Eigen::VectorXd se = fit.standard_errors();
        for (Eigen::Index l = 0; l < 13; ++l) {
            inside += std::abs(fit.beta(l) - truth(l)) <= 3.0 * se(l) ? 1 : 0;
            ++total;
        }
    }
    const double rate = static_cast<double>(inside) / static_cast<double>(total);
    INFO("fraction of coefficients within 3 standard errors: " << rate);
    CHECK(rate >= 0.99);
}
