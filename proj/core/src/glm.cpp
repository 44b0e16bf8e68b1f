#include "medsens/glm.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "medsens/errors.hpp"
#include "medsens/prob.hpp"

namespace medsens {

namespace {

double expit(double eta) {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) {
    if (eta > 35.0) return eta;
    if (eta < -35.0) return std::exp(eta);
    return std::log1p(std::exp(eta));
}

double clamp_prob(double p) {
    constexpr double eps = 1e-15;
    if (p < eps) return eps;
    if (p > 1.0 - eps) return 1.0 - eps;
    return p;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
    }
}

// column means/scales used for the standardized-coefficient separation check
struct ColumnScales {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

ColumnScales column_scales(const DesignMatrix& design) {
    const auto& X = design.values();
    ColumnScales s;
    s.mean = X.colwise().mean();
    s.sd.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double var = (X.col(j).array() - s.mean(j)).square().sum() / X.rows();
        s.sd(j) = std::sqrt(var);
    }
    return s;
}

// Magnitude of the fitted coefficients on the standardized design: slope_j
// scales by sd_j, and the intercept is measured as the linear predictor at
// the column means.
double standardized_coef_max(const Eigen::VectorXd& beta, const ColumnScales& s,
                             bool has_intercept) {
    double m = 0.0;
    double at_mean = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        at_mean += beta(j) * s.mean(j);
        bool is_intercept = has_intercept && j == 0;
        if (!is_intercept) {
            m = std::max(m, std::fabs(beta(j) * s.sd(j)));
        }
    }
    return std::max(m, std::fabs(at_mean));
}

struct LinkEval {
    double loglik;
    Eigen::VectorXd score_weight;  // per-unit d loglik / d eta
    Eigen::VectorXd info_weight;   // per-unit Fisher information weight
};

LinkEval evaluate_link(Link link, const Eigen::VectorXd& eta, const Eigen::VectorXi& y) {
    LinkEval ev;
    const Eigen::Index n = eta.size();
    ev.score_weight.resize(n);
    ev.info_weight.resize(n);
    ev.loglik = 0.0;
    if (link == Link::logit) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double p = expit(eta(i));
            ev.loglik += y(i) * eta(i) - log1pexp(eta(i));
            ev.score_weight(i) = y(i) - p;
            ev.info_weight(i) = std::max(p * (1.0 - p), 1e-12);
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            double p = clamp_prob(std_normal_cdf(eta(i)));
            double d = std_normal_pdf(eta(i));
            ev.loglik += y(i) == 1 ? std::log(p) : std::log1p(-p);
            double v = p * (1.0 - p);
            ev.score_weight(i) = (y(i) - p) * d / v;
            ev.info_weight(i) = std::max(d * d / v, 1e-12);
        }
    }
    return ev;
}

}  // namespace

DesignMatrix::DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> names,
                           bool has_intercept)
    : values_(std::move(values)), names_(std::move(names)), has_intercept_(has_intercept) {
    if (static_cast<std::size_t>(values_.cols()) != names_.size()) {
        throw std::invalid_argument("DesignMatrix: column/name count mismatch");
    }
    if (values_.rows() < values_.cols()) {
        throw std::invalid_argument("DesignMatrix: fewer rows than columns");
    }
    check_finite(values_, "DesignMatrix");
    if (has_intercept_) {
        if (values_.cols() == 0 || (values_.col(0).array() != 1.0).any()) {
            throw std::invalid_argument("DesignMatrix: first column must be all ones");
        }
    }
}

DesignMatrix DesignMatrix::with_intercept(const Eigen::MatrixXd& covariates,
                                          std::vector<std::string> names) {
    Eigen::MatrixXd X(covariates.rows(), covariates.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(covariates.cols()) = covariates;
    std::vector<std::string> full{"(intercept)"};
    full.insert(full.end(), names.begin(), names.end());
    return DesignMatrix(std::move(X), std::move(full), true);
}

double LinearFit::predict(const Eigen::VectorXd& row) const {
    if (row.size() != coefficients.size()) {
        throw std::invalid_argument("LinearFit::predict: covariate length mismatch");
    }
    return row.dot(coefficients);
}

LinearFit fit_linear(const DesignMatrix& design, const Eigen::VectorXd& response,
                     VarianceDenominator denom) {
    const auto& X = design.values();
    if (response.size() != X.rows()) {
        throw std::invalid_argument("fit_linear: response length mismatch");
    }
    check_finite(response, "fit_linear response");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        // columns permuted past the numerical rank are the dependent ones
        auto perm = qr.colsPermutation().indices();
        Eigen::Index offending = perm(qr.rank());
        throw SingularDesignError("fit_linear: design is rank deficient at column '" +
                                  design.names()[offending] + "'");
    }

    LinearFit fit;
    fit.coefficients = qr.solve(response);
    fit.residuals = response - X * fit.coefficients;
    double ssr = fit.residuals.squaredNorm();
    double d = denom == VarianceDenominator::degrees_of_freedom
                   ? static_cast<double>(X.rows() - X.cols())
                   : static_cast<double>(X.rows());
    fit.residual_sd = d > 0 ? std::sqrt(ssr / d) : 0.0;
    fit.column_names = design.names();
    return fit;
}

BinaryGlmFit fit_binary_glm(const DesignMatrix& design, const Eigen::VectorXi& response,
                            Link link, const GlmOptions& options) {
    const auto& X = design.values();
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (response.size() != n) {
        throw std::invalid_argument("fit_binary_glm: response length mismatch");
    }
    int ones = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (response(i) != 0 && response(i) != 1) {
            throw std::invalid_argument("fit_binary_glm: response must be 0/1");
        }
        ones += response(i);
    }
    if (ones == 0 || ones == n) {
        throw std::invalid_argument("fit_binary_glm: response takes a single class");
    }

    const ColumnScales scales = column_scales(design);

    BinaryGlmFit fit;
    fit.link = link;
    fit.column_names = design.names();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    LinkEval ev = evaluate_link(link, eta, response);
    double loglik = ev.loglik;

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        Eigen::VectorXd score = X.transpose() * ev.score_weight;
        if (options.ridge > 0.0) score -= options.ridge * beta;
        double score_max = score.lpNorm<Eigen::Infinity>();

        Eigen::MatrixXd info = X.transpose() * ev.info_weight.asDiagonal() * X;
        if (options.ridge > 0.0) {
            info += options.ridge * Eigen::MatrixXd::Identity(p, p);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw SingularDesignError("fit_binary_glm: information matrix is singular");
        }
        Eigen::VectorXd step = ldlt.solve(score);

        // step halving keeps the log-likelihood non-decreasing
        double t = 1.0;
        Eigen::VectorXd beta_new;
        LinkEval ev_new;
        double loglik_new = -std::numeric_limits<double>::infinity();
        int halvings = 0;
        for (; halvings <= options.max_halvings; ++halvings) {
            beta_new = beta + t * step;
            ev_new = evaluate_link(link, X * beta_new, response);
            loglik_new = ev_new.loglik;
            if (options.ridge > 0.0) loglik_new -= 0.5 * options.ridge * beta_new.squaredNorm();
            if (loglik_new >= loglik - 1e-12) break;
            t *= 0.5;
        }
        if (halvings > options.max_halvings) {
            throw ConvergenceError("fit_binary_glm: step halving failed at iteration " +
                                   std::to_string(iter));
        }

        double rel_change = std::fabs(loglik_new - loglik) / (std::fabs(loglik_new) + 1.0);
        beta = beta_new;
        ev = ev_new;
        loglik = loglik_new;

        if (standardized_coef_max(beta, scales, design.has_intercept()) > 30.0) {
            throw SeparationError(
                "fit_binary_glm: separation detected (standardized coefficient beyond 30)");
        }

        Eigen::VectorXd score_after = X.transpose() * ev.score_weight;
        if (options.ridge > 0.0) score_after -= options.ridge * beta;
        if (rel_change < options.loglik_tol &&
            score_after.lpNorm<Eigen::Infinity>() < options.score_tol) {
            fit.converged = true;
            ++iter;
            break;
        }
        (void)score_max;
    }

    fit.coefficients = beta;
    fit.iterations = iter;
    fit.log_likelihood = loglik;
    if (!fit.converged) {
        std::ostringstream os;
        os << "fit_binary_glm: no convergence after " << iter
           << " iterations (last loglik " << loglik << ")";
        throw ConvergenceError(os.str());
    }
    return fit;
}

double predict_prob(const BinaryGlmFit& fit, const Eigen::VectorXd& covariates) {
    if (covariates.size() != fit.coefficients.size()) {
        throw std::invalid_argument("predict_prob: covariate length mismatch");
    }
    double eta = covariates.dot(fit.coefficients);
    double p = fit.link == Link::logit ? expit(eta) : std_normal_cdf(eta);
    return clamp_prob(p);
}

namespace {

struct BivariateEval {
    double value;          // negative log-likelihood
    Eigen::VectorXd grad;  // gradient wrt (beta1, beta2, artanh rho)
};

BivariateEval bivariate_negloglik(const Eigen::MatrixXd& X, const Eigen::VectorXi& y1,
                                  const Eigen::VectorXi& y2, const Eigen::VectorXd& theta,
                                  std::optional<double> fix_rho) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const bool free_rho = !fix_rho.has_value();
    double rho = free_rho ? std::tanh(theta(2 * p)) : *fix_rho;

    BivariateEval ev;
    ev.value = 0.0;
    ev.grad = Eigen::VectorXd::Zero(theta.size());

    const double om = 1.0 - rho * rho;
    const double sq = std::sqrt(std::max(om, 1e-300));
    for (Eigen::Index i = 0; i < n; ++i) {
        double eta1 = X.row(i).dot(theta.head(p));
        double eta2 = X.row(i).dot(theta.segment(p, p));
        double q1 = y1(i) == 1 ? 1.0 : -1.0;
        double q2 = y2(i) == 1 ? 1.0 : -1.0;
        double w1 = q1 * eta1;
        double w2 = q2 * eta2;
        double rs = q1 * q2 * rho;
        double cell = std::max(bivariate_normal_cdf(w1, w2, rs), 1e-300);
        ev.value -= std::log(cell);

        double sq_rs = std::sqrt(std::max(1.0 - rs * rs, 1e-300));
        double g1 = std_normal_pdf(w1) * std_normal_cdf((w2 - rs * w1) / sq_rs);
        double g2 = std_normal_pdf(w2) * std_normal_cdf((w1 - rs * w2) / sq_rs);
        double quad = (w1 * w1 - 2.0 * rs * w1 * w2 + w2 * w2) / std::max(1.0 - rs * rs, 1e-300);
        double dens = std::exp(-0.5 * quad) / (2.0 * M_PI * sq_rs);

        ev.grad.head(p) -= (q1 * g1 / cell) * X.row(i).transpose();
        ev.grad.segment(p, p) -= (q2 * g2 / cell) * X.row(i).transpose();
        if (free_rho) {
            // d rho / d artanh(rho) = 1 - rho^2
            ev.grad(2 * p) -= q1 * q2 * dens / cell * om;
        }
    }
    (void)sq;
    return ev;
}

}  // namespace

BivariateProbitFit fit_bivariate_probit(const DesignMatrix& design,
                                        const Eigen::VectorXi& response_1,
                                        const Eigen::VectorXi& response_2,
                                        const BivariateProbitOptions& options) {
    const auto& X = design.values();
    const Eigen::Index p = X.cols();
    if (options.fix_rho && std::fabs(*options.fix_rho) >= 1.0) {
        throw std::invalid_argument("fit_bivariate_probit: fixed rho must lie in (-1,1)");
    }

    // univariate probit starting values; these also enforce the
    // both-classes and separation preconditions per margin
    BinaryGlmFit m1 = fit_binary_glm(design, response_1, Link::probit);
    BinaryGlmFit m2 = fit_binary_glm(design, response_2, Link::probit);

    const bool free_rho = !options.fix_rho.has_value();
    Eigen::VectorXd theta(free_rho ? 2 * p + 1 : 2 * p);
    theta.head(p) = m1.coefficients;
    theta.segment(p, p) = m2.coefficients;
    if (free_rho) theta(2 * p) = 0.0;

    const ColumnScales scales = column_scales(design);

    BivariateEval ev = bivariate_negloglik(X, response_1, response_2, theta, options.fix_rho);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(theta.size(), theta.size());

    BivariateProbitFit fit;
    fit.column_names = design.names();
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        if (ev.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
            fit.converged = true;
            break;
        }
        Eigen::VectorXd direction = -H * ev.grad;
        if (direction.dot(ev.grad) >= 0.0) {
            H.setIdentity();
            direction = -ev.grad;
        }

        double t = 1.0;
        Eigen::VectorXd theta_new;
        BivariateEval ev_new;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            theta_new = theta + t * direction;
            ev_new = bivariate_negloglik(X, response_1, response_2, theta_new, options.fix_rho);
            if (ev_new.value <= ev.value + 1e-4 * t * ev.grad.dot(direction)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            std::ostringstream os;
            os << "fit_bivariate_probit: line search stalled at iteration " << iter
               << " (negloglik " << ev.value << ", |grad| "
               << ev.grad.lpNorm<Eigen::Infinity>() << ")";
            throw ConvergenceError(os.str());
        }

        if (free_rho && std::fabs(theta_new(2 * p)) > 18.0) {
            throw SeparationError(
                "fit_bivariate_probit: rho driven to the boundary (|rho| -> 1)");
        }
        if (standardized_coef_max(theta_new.head(p), scales, design.has_intercept()) > 30.0 ||
            standardized_coef_max(theta_new.segment(p, p), scales, design.has_intercept()) >
                30.0) {
            throw SeparationError("fit_bivariate_probit: separation detected in a margin");
        }

        Eigen::VectorXd s = theta_new - theta;
        Eigen::VectorXd yv = ev_new.grad - ev.grad;
        double sy = s.dot(yv);
        if (sy > 1e-12) {
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(theta.size(), theta.size());
            Eigen::MatrixXd V = I - (s * yv.transpose()) / sy;
            H = V * H * V.transpose() + (s * s.transpose()) / sy;
        }
        theta = theta_new;
        ev = ev_new;
    }

    if (!fit.converged) {
        std::ostringstream os;
        os << "fit_bivariate_probit: no convergence after " << iter
           << " iterations (negloglik " << ev.value << ")";
        throw ConvergenceError(os.str());
    }

    fit.coefficients_1 = theta.head(p);
    fit.coefficients_2 = theta.segment(p, p);
    fit.rho = free_rho ? std::tanh(theta(2 * p)) : *options.fix_rho;
    fit.log_likelihood = -ev.value;
    fit.iterations = iter;
    return fit;
}

double partial_correlation(const Eigen::VectorXd& z, const Eigen::VectorXd& c,
                           const DesignMatrix& design) {
    if (z.size() != design.rows() || c.size() != design.rows()) {
        throw std::invalid_argument("partial_correlation: vector length mismatch");
    }
    LinearFit fz = fit_linear(design, z);
    LinearFit fc = fit_linear(design, c);

    auto check_degenerate = [&](const Eigen::VectorXd& resid, const Eigen::VectorXd& raw,
                                const char* which) {
        double total = (raw.array() - raw.mean()).square().sum();
        double ssr = resid.squaredNorm();
        if (total <= 0.0 || ssr <= 1e-24 * total) {
            throw DegenerateVarianceError(std::string("partial_correlation: residual variance of ") +
                                          which + " is numerically zero");
        }
    };
    check_degenerate(fz.residuals, z, "z");
    check_degenerate(fc.residuals, c, "c");

    double num = fz.residuals.dot(fc.residuals);
    double den = std::sqrt(fz.residuals.squaredNorm() * fc.residuals.squaredNorm());
    return num / den;
}

}  // namespace medsens
