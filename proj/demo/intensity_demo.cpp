// Simulate a series whose rate drops after a given year, estimate the
// intensity curve and test for the drop.

#include <cmath>
#include <cstdio>

#include "nhpp/nhpp.hpp"

int main() {
    const auto period = nhpp::StudyPeriod::annual(1891, 2015);
    const nhpp::IntensitySpec spec(period, nhpp::StepRate{5.5, 3.5, 2005.0});
    const auto series = nhpp::simulate_counts(spec, 20041226);

    const auto basis = nhpp::make_basis(period, 9);
    const auto design = nhpp::build_design(basis, period);
    const auto fit = nhpp::fit_mle(design, series);
    std::printf("fit: L=%zu, %d iterations, log-likelihood %.6f\n", basis.size(), fit.iterations, fit.log_likelihood);

    for (const double year : {1900.5, 1950.5, 2000.5, 2010.5}) {
        const double value = nhpp::intensity_value(fit.beta, basis, year, 0);
        const double se = std::sqrt(nhpp::delta_method_variance(fit, basis, year, 0));
        std::printf("  lambda(%.1f) = %.3f +/- %.3f\n", year, value, nhpp::kNormalQuantile95 * se);
    }

    const auto test = nhpp::exact_test(series, 114);
    std::printf("before %.4f/yr, after %.4f/yr, p = %.4g\n", test.average_before(), test.average_after(),
                test.p_value);
    return 0;
}
