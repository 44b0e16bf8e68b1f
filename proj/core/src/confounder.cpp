#include "medsens/confounder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "medsens/errors.hpp"
#include "medsens/prob.hpp"

namespace medsens {

void ZModelContinuous::validate() const {
    if (!(fit_arm0.residual_sd > 0.0) || !(fit_arm1.residual_sd > 0.0)) {
        throw std::invalid_argument("ZModelContinuous: residual scales must be positive");
    }
    if (fit_arm0.column_names != fit_arm1.column_names) {
        throw std::invalid_argument("ZModelContinuous: arms fitted on different columns");
    }
}

void ZModelBinary::validate() const {
    if (fit_arm0.link != Link::probit || fit_arm1.link != Link::probit) {
        throw std::invalid_argument("ZModelBinary: both arms must use the probit link");
    }
    if (fit_arm0.column_names != fit_arm1.column_names) {
        throw std::invalid_argument("ZModelBinary: arms fitted on different columns");
    }
}

ConditionalZ0 conditional_z0_continuous(const ZModelContinuous& model, double z1,
                                        const Eigen::VectorXd& row, double rho10) {
    if (!(rho10 >= -1.0 && rho10 <= 1.0)) {
        throw std::invalid_argument("conditional_z0_continuous: |rho10| must be <= 1");
    }
    double mu0 = model.fit_arm0.predict(row);
    double mu1 = model.fit_arm1.predict(row);
    double s0 = model.fit_arm0.residual_sd;
    double s1 = model.fit_arm1.residual_sd;

    ConditionalZ0 law;
    law.kind = ConditionalZ0::Kind::normal;
    law.mean = mu0 + rho10 * (s0 / s1) * (z1 - mu1);
    law.sd = std::sqrt(std::max(0.0, 1.0 - rho10 * rho10)) * s0;
    return law;
}

ConditionalZ0 conditional_z0_binary(const ZModelBinary& model, int z1,
                                    const Eigen::VectorXd& row, double rho10) {
    if (!(rho10 > -1.0 && rho10 < 1.0)) {
        throw std::invalid_argument("conditional_z0_binary: |rho10| must be < 1");
    }
    if (z1 != 0 && z1 != 1) {
        throw std::invalid_argument("conditional_z0_binary: z1 must be 0 or 1");
    }
    double mu0 = row.dot(model.fit_arm0.coefficients);
    double mu1 = row.dot(model.fit_arm1.coefficients);

    double denom = z1 == 1 ? std_normal_cdf(mu1) : std_normal_cdf(-mu1);
    if (denom < 1e-12) {
        std::ostringstream os;
        os << "conditional_z0_binary: P(Z(1)=" << z1 << " | x) underflows (mu1 = " << mu1
           << ")";
        throw NumericalDegeneracyError(os.str());
    }

    double joint = bivariate_normal_cdf(-mu0, -mu1, rho10);
    double raw;
    if (z1 == 1) {
        raw = 1.0 - (std_normal_cdf(-mu0) - joint) / denom;
    } else {
        raw = 1.0 - joint / denom;
    }

    ConditionalZ0 law;
    law.kind = ConditionalZ0::Kind::bernoulli;
    if (raw < -1e-8 || raw > 1.0 + 1e-8) {
        std::ostringstream os;
        os << "conditional_z0_binary: conditional probability " << raw
           << " is far outside [0,1]";
        throw NumericalDegeneracyError(os.str());
    }
    law.clamped = raw < 0.0 || raw > 1.0;
    law.p1 = std::min(1.0, std::max(0.0, raw));
    return law;
}

RhoInterval rho_bounds(double rho_1c, double rho_0c) {
    if (!(rho_1c >= -1.0 && rho_1c <= 1.0) || !(rho_0c >= -1.0 && rho_0c <= 1.0)) {
        throw std::invalid_argument("rho_bounds: correlations must lie in [-1,1]");
    }
    double center = rho_1c * rho_0c;
    double radius = std::sqrt((1.0 - rho_1c * rho_1c) * (1.0 - rho_0c * rho_0c));
    RhoInterval out;
    out.lower = std::max(-1.0, center - radius);
    out.upper = std::min(1.0, center + radius);
    return out;
}

RhoInterval rho_bounds_multi(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("rho_bounds_multi: empty correlation list");
    }
    RhoInterval out{-1.0, 1.0};
    for (const auto& [r1c, r0c] : pairs) {
        RhoInterval b = rho_bounds(r1c, r0c);
        out.lower = std::max(out.lower, b.lower);
        out.upper = std::min(out.upper, b.upper);
    }
    if (out.lower > out.upper) {
        std::ostringstream os;
        os << "rho_bounds_multi: intersection is empty ([" << out.lower << ", " << out.upper
           << "]); the auxiliary correlations are mutually inconsistent";
        throw InfeasibleBoundsError(os.str());
    }
    return out;
}

std::vector<double> rho_grid(const RhoInterval& interval, int n_points) {
    if (!(interval.lower <= interval.upper)) {
        throw std::invalid_argument("rho_grid: invalid interval");
    }
    if (n_points < 2) {
        throw std::invalid_argument("rho_grid: need at least 2 points");
    }
    std::vector<double> grid(n_points);
    double step = (interval.upper - interval.lower) / (n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        grid[i] = interval.lower + step * i;
    }
    grid.front() = interval.lower;
    grid.back() = interval.upper;
    return grid;
}

}  // namespace medsens
