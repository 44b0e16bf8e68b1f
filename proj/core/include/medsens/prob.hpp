#pragma once

// Scalar probability kernels: standard normal pdf/cdf/quantile, bivariate
// normal cdf, regularized incomplete gamma and its inverse. Everything here
// is a pure function of its arguments.

namespace medsens {

// Standard normal density.
double std_normal_pdf(double x);

// Standard normal CDF, absolute error below 1e-12 over the real line.
// Throws std::invalid_argument on non-finite input.
double std_normal_cdf(double x);

// Inverse of std_normal_cdf on (0,1); std_normal_cdf(result) agrees with p
// to 1e-10 or better. Throws std::invalid_argument for p outside (0,1).
double std_normal_quantile(double p);

// P(A <= x, B <= y) for standard bivariate normal (A,B) with correlation rho,
// absolute error <= 1e-10 (Drezner-Wesolowsky/Genz hybrid). |rho| <= 1.
double bivariate_normal_cdf(double x, double y, double rho);

// Regularized lower incomplete gamma P(a,x) for a > 0, x >= 0.
double gamma_p(double a, double x);

// Inverse of gamma_p in x: returns x with gamma_p(a,x) = p, 0 <= p < 1.
double gamma_p_inv(double a, double p);

// Quantile of Gamma(shape, rate) at p in [0,1); p -> 0 maps to 0.
double gamma_quantile(double p, double shape, double rate);

// Quantile of the logistic distribution with location 0 and the given scale.
double logistic_quantile(double p, double scale);

}  // namespace medsens
