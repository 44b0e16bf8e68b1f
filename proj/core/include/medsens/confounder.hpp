#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "medsens/glm.hpp"

namespace medsens {

// Fitted prediction model for a continuous post-treatment confounder:
// per-arm structural means with homoscedastic residual scales.
struct ZModelContinuous {
    LinearFit fit_arm0;  // mu(0, x) and sigma_0
    LinearFit fit_arm1;  // mu(1, x) and sigma_1

    void validate() const;  // positive scales, matching column sets
};

// Latent-probit prediction model for a binary confounder; unit residual
// scale on the latent index by construction.
struct ZModelBinary {
    BinaryGlmFit fit_arm0;
    BinaryGlmFit fit_arm1;

    void validate() const;  // probit links, matching column sets
};

// Conditional law of Z(0) given Z(1), X for a treated unit.
struct ConditionalZ0 {
    enum class Kind { normal, bernoulli };
    Kind kind = Kind::normal;
    double mean = 0.0;  // normal only
    double sd = 0.0;    // normal only
    double p1 = 0.0;    // bernoulli only
    bool clamped = false;  // bernoulli: raw probability drifted outside [0,1]
};

struct RhoInterval {
    double lower = -1.0;
    double upper = 1.0;
};

// Normal conditional law: mean mu0(x) + rho*(s0/s1)*(z1 - mu1(x)),
// variance (1 - rho^2)*s0^2. row is the design row including intercept.
ConditionalZ0 conditional_z0_continuous(const ZModelContinuous& model, double z1,
                                        const Eigen::VectorXd& row, double rho10);

// Bernoulli conditional law from the latent bivariate-probit display.
// Requires |rho10| < 1; probabilities within 1e-8 of [0,1] are clamped
// (flagged), larger excursions raise NumericalDegeneracyError.
ConditionalZ0 conditional_z0_binary(const ZModelBinary& model, int z1,
                                    const Eigen::VectorXd& row, double rho10);

// Feasible interval for rho10 from the partial correlations of one
// auxiliary covariate: rho1c*rho0c -/+ sqrt((1-rho1c^2)(1-rho0c^2)),
// clipped to [-1, 1].
RhoInterval rho_bounds(double rho_1c, double rho_0c);

// Intersection across several auxiliary covariates; empty intersection
// raises InfeasibleBoundsError.
RhoInterval rho_bounds_multi(const std::vector<std::pair<double, double>>& pairs);

// n_points evenly spaced values spanning the interval inclusively.
std::vector<double> rho_grid(const RhoInterval& interval, int n_points);

}  // namespace medsens
