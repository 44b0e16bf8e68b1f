#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "medsens/prob.hpp"

using namespace medsens;

namespace {

// Independent oracle for the standard normal CDF: Taylor series
// Phi(x) = 1/2 + phi(x) * sum x^(2k+1) / (1*3*...*(2k+1)), long double
// accumulation. Good to ~1e-17 for |x| <= 8.
long double normal_cdf_oracle(long double x) {
    long double phi = std::exp(-0.5L * x * x) / std::sqrt(2.0L * 3.14159265358979323846264338L);
    long double term = x;
    long double sum = x;
    for (int k = 1; k < 400; ++k) {
        term *= x * x / (2.0L * k + 1.0L);
        sum += term;
        if (std::fabs(term) < 1e-22L * std::fabs(sum)) break;
    }
    return 0.5L + phi * sum;
}

// Independent oracle for the bivariate normal CDF:
// Phi2(x, y, rho) = int_{-inf}^{x} phi(u) Phi((y - rho u)/sqrt(1-rho^2)) du
// by composite Simpson on [-9, x].
double bvn_oracle(double x, double y, double rho) {
    if (rho == 1.0) return static_cast<double>(normal_cdf_oracle(std::min(x, y)));
    if (rho == -1.0) {
        return std::max(0.0, static_cast<double>(normal_cdf_oracle(x) + normal_cdf_oracle(y)) - 1.0);
    }
    const double lo = -9.0;
    if (x <= lo) return 0.0;
    const int n = 20000;  // even
    const double h = (x - lo) / n;
    const double s = std::sqrt(1.0 - rho * rho);
    auto f = [&](double u) {
        long double phi =
            std::exp(-0.5L * (long double)u * u) / std::sqrt(2.0L * 3.14159265358979323846264338L);
        return static_cast<double>(phi * normal_cdf_oracle(((long double)y - rho * u) / s));
    };
    double acc = f(lo) + f(x);
    for (int i = 1; i < n; ++i) {
        acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("std_normal_cdf matches the series oracle to 1e-13") {
    for (double x = -8.0; x <= 8.0; x += 0.173) {
        CHECK(std_normal_cdf(x) ==
              doctest::Approx(static_cast<double>(normal_cdf_oracle(x)))
                  .epsilon(1e-13));
    }
}

TEST_CASE("std_normal_cdf anchor values") {
    CHECK(std_normal_cdf(0.0) == 0.5);
    CHECK(std_normal_cdf(8.0) == doctest::Approx(1.0).epsilon(1e-12));
    // frozen from the series oracle before the build
    CHECK(std_normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
    CHECK_THROWS_AS(std_normal_cdf(std::numeric_limits<double>::quiet_NaN()),
                    std::invalid_argument);
    CHECK_THROWS_AS(std_normal_cdf(std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
}

TEST_CASE("std_normal_cdf is monotone on a fine grid") {
    double prev = std_normal_cdf(-10.0);
    for (double x = -10.0; x <= 10.0; x += 0.01) {
        double cur = std_normal_cdf(x);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("std_normal_quantile inverts the cdf to 1e-10") {
    CHECK(std_normal_quantile(0.5) == 0.0);
    // frozen by bisecting the series oracle
    CHECK(std_normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-6));
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
        CHECK(std_normal_cdf(std_normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK_THROWS_AS(std_normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(std_normal_quantile(1.0), std::invalid_argument);
    CHECK_THROWS_AS(std_normal_quantile(-0.2), std::invalid_argument);
}

TEST_CASE("std_normal_quantile antisymmetry") {
    for (double p : {0.001, 0.1, 0.25, 0.4, 0.49}) {
        CHECK(std_normal_quantile(p) ==
              doctest::Approx(-std_normal_quantile(1.0 - p)).epsilon(1e-12));
    }
}

TEST_CASE("bivariate_normal_cdf closed forms") {
    CHECK(bivariate_normal_cdf(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(bivariate_normal_cdf(0, 0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    // quarter + asin identity on a rho sweep
    for (double rho = -0.99; rho <= 0.99; rho += 0.11) {
        double expect = 0.25 + std::asin(rho) / (2.0 * M_PI);
        CHECK(bivariate_normal_cdf(0, 0, rho) == doctest::Approx(expect).epsilon(1e-10));
    }
    // perfect correlation limits
    CHECK(bivariate_normal_cdf(0.7, -0.3, 1.0) ==
          doctest::Approx(std_normal_cdf(-0.3)).epsilon(1e-12));
    CHECK(bivariate_normal_cdf(0.7, -0.3, -1.0) ==
          doctest::Approx(std::max(0.0, std_normal_cdf(0.7) + std_normal_cdf(-0.3) - 1.0))
              .epsilon(1e-12));
    CHECK_THROWS_AS(bivariate_normal_cdf(0, 0, 1.5), std::invalid_argument);
}

TEST_CASE("bivariate_normal_cdf against quadrature oracle") {
    // frozen spot checks computed with an independent high-precision
    // implementation before the build
    CHECK(bivariate_normal_cdf(0.3, -0.4, 0.6) ==
          doctest::Approx(0.29752672451753).epsilon(5e-11));
    CHECK(bivariate_normal_cdf(1.2, 0.7, -0.35) ==
          doctest::Approx(0.65293419480241).epsilon(5e-11));
    CHECK(bivariate_normal_cdf(-1.5, 2.0, 0.85) ==
          doctest::Approx(0.06680720126614).epsilon(5e-11));
    CHECK(bivariate_normal_cdf(2.5, -2.5, -0.95) ==
          doctest::Approx(0.00216310432201).epsilon(1e-10));

    // live Simpson oracle over a grid including the near-singular band
    for (double rho : {-0.99, -0.9, -0.5, -0.2, 0.0, 0.3, 0.7, 0.93, 0.999}) {
        for (double x : {-2.5, -0.7, 0.0, 1.1, 3.0}) {
            for (double y : {-1.9, 0.0, 0.4, 2.2}) {
                double expect = bvn_oracle(x, y, rho);
                CHECK(bivariate_normal_cdf(x, y, rho) ==
                      doctest::Approx(expect).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("bivariate_normal_cdf symmetry and margins") {
    std::mt19937 gen(42);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    std::uniform_real_distribution<double> unif_rho(-0.999, 0.999);
    for (int i = 0; i < 500; ++i) {
        double x = unif(gen), y = unif(gen), rho = unif_rho(gen);
        CHECK(bivariate_normal_cdf(x, y, rho) ==
              doctest::Approx(bivariate_normal_cdf(y, x, rho)).epsilon(1e-12));
    }
    for (double x = -3.0; x <= 3.0; x += 0.5) {
        for (double y = -3.0; y <= 3.0; y += 0.5) {
            CHECK(bivariate_normal_cdf(x, y, 0.0) ==
                  doctest::Approx(std_normal_cdf(x) * std_normal_cdf(y)).epsilon(1e-10));
        }
        CHECK(bivariate_normal_cdf(x, 8.0, 0.37) ==
              doctest::Approx(std_normal_cdf(x)).epsilon(1e-9));
    }
}

TEST_CASE("bivariate_normal_cdf monotonicity") {
    double prev = bivariate_normal_cdf(-4.0, 0.3, 0.41);
    for (double x = -4.0; x <= 4.0; x += 0.1) {
        double cur = bivariate_normal_cdf(x, 0.3, 0.41);
        CHECK(cur >= prev - 1e-14);
        prev = cur;
    }
    prev = bivariate_normal_cdf(0.0, 0.0, -0.999);
    for (double rho = -0.999; rho <= 0.999; rho += 0.037) {
        double cur = bivariate_normal_cdf(0.0, 0.0, rho);
        CHECK(cur >= prev - 1e-14);
        prev = cur;
    }
}

TEST_CASE("gamma_p and its inverse") {
    // P(0.5, x) = erf(sqrt(x))
    for (double x : {0.01, 0.1, 0.5, 1.0, 2.5, 7.0}) {
        CHECK(gamma_p(0.5, x) == doctest::Approx(std::erf(std::sqrt(x))).epsilon(1e-12));
    }
    // P(1, x) = 1 - exp(-x)
    for (double x : {0.3, 1.0, 4.0}) {
        CHECK(gamma_p(1.0, x) == doctest::Approx(-std::expm1(-x)).epsilon(1e-12));
    }
    for (double a : {0.5, 0.8, 1.0, 3.7, 11.0}) {
        for (double p : {1e-8, 0.01, 0.2, 0.5, 0.9, 0.999, 1.0 - 1e-12}) {
            double x = gamma_p_inv(a, p);
            CHECK(gamma_p(a, x) == doctest::Approx(p).epsilon(1e-9));
        }
        CHECK(gamma_p_inv(a, 0.0) == 0.0);
    }
    CHECK_THROWS_AS(gamma_p(-1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gamma_p_inv(0.5, 1.0), std::invalid_argument);
}

TEST_CASE("gamma_quantile and logistic_quantile") {
    // Gamma(shape 0.5, rate 1) is chi-square(1)/2: quantile via normal
    double p = 0.73;
    double w = std_normal_quantile(0.5 + p / 2.0);  // P(|Z| <= w) = p
    CHECK(gamma_quantile(p, 0.5, 1.0) == doctest::Approx(w * w / 2.0).epsilon(1e-9));
    CHECK(logistic_quantile(0.5, 1.0) == 0.0);
    CHECK(logistic_quantile(0.75, 1.0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(logistic_quantile(0.25, 2.0) == doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-14));
}
