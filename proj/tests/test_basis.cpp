#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "nhpp/basis.hpp"
#include "oracles.hpp"

using nhpp::make_basis;
using nhpp::SplineBasis;
using nhpp::StudyPeriod;

namespace {

const StudyPeriod kPeriod = StudyPeriod::annual(1891, 2015);  // (1891, 2016], N = 125

std::vector<double> random_times(double lo, double hi, std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (auto& t : out) t = dist(gen);
    return out;
}

bool near_knot(const SplineBasis& basis, double t, double tol) {
    for (const double k : basis.knot_vector()) {
        if (std::abs(t - k) < tol) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("make_basis without interior knots is a single cubic", "[basis]") {
    const auto basis = make_basis(kPeriod, 0);
    REQUIRE(basis.size() == 4);
    const std::vector<double> expected{1891, 1891, 1891, 1891, 2016, 2016, 2016, 2016};
    REQUIRE(basis.knot_vector() == expected);
}

TEST_CASE("make_basis places interior knots equally", "[basis]") {
    const auto basis = make_basis(kPeriod, 9);
    REQUIRE(basis.size() == 13);
    const auto& interior = basis.interior_knots();
    REQUIRE(interior.size() == 9);
    for (std::size_t i = 0; i < interior.size(); ++i) {
        CHECK(interior[i] == Catch::Approx(1903.5 + 12.5 * static_cast<double>(i)).margin(1e-9));
    }
    CHECK(interior.back() == Catch::Approx(2003.5).margin(1e-9));

    const auto& knots = basis.knot_vector();
    REQUIRE(knots.size() == basis.size() + 4);
    CHECK(std::is_sorted(knots.begin(), knots.end()));
    for (int i = 0; i < 4; ++i) {
        CHECK(knots[i] == 1891.0);
        CHECK(knots[knots.size() - 1 - i] == 2016.0);
    }
}

TEST_CASE("make_basis rejects more basis functions than bins", "[basis][errors]") {
    REQUIRE_THROWS_AS(make_basis(kPeriod, 125), nhpp::IdentifiabilityError);
    try {
        (void)make_basis(kPeriod, 125);
    } catch (const nhpp::IdentifiabilityError& e) {
        CHECK(e.basis_size() == 129);
        CHECK(e.bins() == 125);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("129") && Catch::Matchers::ContainsSubstring("125"));
    }
    CHECK(make_basis(kPeriod, 121).size() == 125);
}

TEST_CASE("basis is a nonnegative partition of unity on the closed interval", "[basis][property]") {
    for (const std::size_t knots : {0u, 3u, 9u, 30u}) {
        const auto basis = make_basis(kPeriod, knots);
        auto times = random_times(kPeriod.start(), kPeriod.end(), 1000, 17 + knots);
        times.push_back(kPeriod.start());
        times.push_back(kPeriod.end());
        for (const double t : basis.knot_vector()) times.push_back(t);
        for (const double t : times) {
            const Eigen::VectorXd b = basis.evaluate(t, 0);
            REQUIRE(std::abs(b.sum() - 1.0) < 1e-12);
            REQUIRE(b.minCoeff() >= 0.0);
            CHECK((b.array() != 0.0).count() <= 4);
        }
    }
}

TEST_CASE("derivatives of the basis sum to zero", "[basis][property]") {
    const auto basis = make_basis(kPeriod, 9);
    for (const double t : random_times(kPeriod.start(), kPeriod.end(), 500, 3)) {
        CHECK(std::abs(basis.evaluate(t, 1).sum()) < 1e-10);
        CHECK(std::abs(basis.evaluate(t, 2).sum()) < 1e-10);
    }
}

TEST_CASE("right endpoint uses the left limit", "[basis]") {
    const auto basis = make_basis(kPeriod, 9);
    const Eigen::VectorXd b = basis.evaluate(kPeriod.end(), 0);
    CHECK(b(12) == Catch::Approx(1.0).margin(1e-15));
    CHECK(b.head(12).cwiseAbs().maxCoeff() < 1e-15);
    // Derivatives at b match the limit from inside the last span.
    const double h = 1e-9;
    CHECK((basis.evaluate(kPeriod.end(), 1) - basis.evaluate(kPeriod.end() - h, 1)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("de Boor evaluation agrees with the Cox-de Boor recursion", "[basis][oracle]") {
    for (const std::size_t knots : {0u, 1u, 9u, 17u}) {
        const auto basis = make_basis(kPeriod, knots);
        auto times = random_times(kPeriod.start(), kPeriod.end(), 300, 99);
        times.push_back(kPeriod.end());
        for (const double t : times) {
            const Eigen::VectorXd b = basis.evaluate(t, 0);
            for (std::size_t l = 0; l < basis.size(); ++l) {
                REQUIRE(b(static_cast<Eigen::Index>(l)) ==
                        Catch::Approx(oracle::cox_de_boor(basis.knot_vector(), l, 3, t)).margin(1e-13));
            }
        }
    }
}

TEST_CASE("basis derivatives match central finite differences", "[basis][oracle]") {
    const auto basis = make_basis(kPeriod, 9);
    const double h = 1e-5 * kPeriod.bin_width();
    std::size_t checked = 0;
    for (const double t : random_times(kPeriod.start() + 1e-3, kPeriod.end() - 1e-3, 1000, 5)) {
        if (near_knot(basis, t, 4.0 * h)) continue;
        for (int order = 1; order <= 2; ++order) {
            const Eigen::VectorXd analytic = basis.evaluate(t, order);
            const Eigen::VectorXd fd =
                (basis.evaluate(t + h, order - 1) - basis.evaluate(t - h, order - 1)) / (2.0 * h);
            const double rel = (fd - analytic).cwiseAbs().maxCoeff() / analytic.cwiseAbs().maxCoeff();
            REQUIRE(rel < 1e-6);
        }
        ++checked;
    }
    CHECK(checked > 990);
}

TEST_CASE("evaluate validates its arguments", "[basis][errors]") {
    const auto basis = make_basis(kPeriod, 9);
    CHECK_THROWS_AS(basis.evaluate(1890.999, 0), nhpp::DomainError);
    CHECK_THROWS_AS(basis.evaluate(2016.001, 0), nhpp::DomainError);
    CHECK_THROWS_AS(basis.evaluate(1950.0, 3), nhpp::DomainError);
    CHECK_THROWS_AS(basis.evaluate(std::nan(""), 0), nhpp::DomainError);
}

TEST_CASE("integrals over the full domain sum to its length", "[basis][integrate]") {
    for (const std::size_t knots : {0u, 9u, 40u}) {
        const auto basis = make_basis(kPeriod, knots);
        const Eigen::VectorXd full = basis.integrate(kPeriod.start(), kPeriod.end());
        CHECK(std::abs(full.sum() - kPeriod.length()) < 1e-10);
        // Each B_l integrates to (t_{l+4} - t_l) / 4 over its support.
        for (std::size_t l = 0; l < basis.size(); ++l) {
            const auto [lo, hi] = basis.support(l);
            CHECK(full(static_cast<Eigen::Index>(l)) == Catch::Approx((hi - lo) / 4.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("integration is additive over adjacent intervals", "[basis][integrate][property]") {
    const auto basis = make_basis(kPeriod, 9);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> dist(kPeriod.start(), kPeriod.end());
    for (int i = 0; i < 500; ++i) {
        std::array<double, 3> p{dist(gen), dist(gen), dist(gen)};
        std::sort(p.begin(), p.end());
        if (!(p[0] < p[1] && p[1] < p[2])) continue;
        const Eigen::VectorXd parts = basis.integrate(p[0], p[1]) + basis.integrate(p[1], p[2]);
        REQUIRE((parts - basis.integrate(p[0], p[2])).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single-span integrals match the hand-integrated cubic pieces", "[basis][integrate][oracle]") {
    const auto basis = make_basis(kPeriod, 9);
    const auto& knots = basis.knot_vector();
    const double h = 12.5;
    // Spans 6..9 have four distinct equally spaced knots on each side, so the
    // four active functions are translates of the uniform cubic B-spline.
    for (std::size_t span = 6; span <= 9; ++span) {
        const double left = knots[span];
        for (const auto& [u0, u1] : {std::pair{0.0, 1.0}, std::pair{0.13, 0.71}, std::pair{0.5, 0.5000001}}) {
            const auto got = basis.integrate(left + u0 * h, left + u1 * h);
            const auto f0 = oracle::uniform_cubic_antiderivative(u0);
            const auto f1 = oracle::uniform_cubic_antiderivative(u1);
            for (std::size_t j = 0; j < 4; ++j) {
                const double expected = h * (f1[j] - f0[j]);
                REQUIRE(std::abs(got(static_cast<Eigen::Index>(span - 3 + j)) - expected) < 1e-12);
            }
            CHECK(std::abs(got.sum() - (u1 - u0) * h) < 1e-12);
        }
    }
}

TEST_CASE("tiny intervals give tiny integrals", "[basis][integrate]") {
    const auto basis = make_basis(kPeriod, 9);
    for (const double eps : {1e-3, 1e-6, 1e-9}) {
        for (const double hi : {1903.5, 1950.25, 2016.0}) {
            const Eigen::VectorXd v = basis.integrate(hi - eps, hi);
            CHECK(v.maxCoeff() <= eps * (1.0 + 1e-12));
            CHECK(v.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("integrals vanish exactly outside the support", "[basis][integrate]") {
    const auto basis = make_basis(kPeriod, 9);
    // B_1 lives on [1891, 1903.5]; year 2010 is bin (2010, 2011].
    const Eigen::VectorXd v = basis.integrate(2010.0, 2011.0);
    CHECK(v(0) == 0.0);
    for (std::size_t l = 0; l < basis.size(); ++l) {
        const auto [lo, hi] = basis.support(l);
        if (hi < 2010.0 || lo > 2011.0) CHECK(v(static_cast<Eigen::Index>(l)) == 0.0);
    }
}

TEST_CASE("integrate rejects empty or out-of-domain intervals", "[basis][errors]") {
    const auto basis = make_basis(kPeriod, 9);
    CHECK_THROWS_AS(basis.integrate(1950.0, 1950.0), nhpp::DomainError);
    CHECK_THROWS_AS(basis.integrate(1960.0, 1950.0), nhpp::DomainError);
    CHECK_THROWS_AS(basis.integrate(1890.0, 1950.0), nhpp::DomainError);
    CHECK_THROWS_AS(basis.integrate(1950.0, 2017.0), nhpp::DomainError);
}

TEST_CASE("study period validates its shape", "[basis][period]") {
    CHECK_THROWS_AS(StudyPeriod(2000.0, 1990.0, 10), nhpp::DomainError);
    CHECK_THROWS_AS(StudyPeriod(0.0, 1.0, 1), nhpp::DomainError);
    const StudyPeriod p(0.0, 10.0, 4);
    CHECK(p.bin_width() == 2.5);
    CHECK(p.bin_lower(1) == 2.5);
    CHECK(p.bin_upper(3) == 10.0);
    CHECK(kPeriod.bins() == 125);
    CHECK(kPeriod.bin_width() == 1.0);
}
