#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace medsens {

enum class Link { logit, probit };

enum class VarianceDenominator {
    degrees_of_freedom,  // n - p
    maximum_likelihood,  // n
};

// Dense design matrix with named columns. The first column is an all-ones
// intercept unless explicitly suppressed.
class DesignMatrix {
  public:
    DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> names,
                 bool has_intercept = true);

    // prepends an intercept column to the given covariates
    static DesignMatrix with_intercept(const Eigen::MatrixXd& covariates,
                                       std::vector<std::string> names);

    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    bool has_intercept() const { return has_intercept_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

  private:
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
    bool has_intercept_;
};

struct LinearFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd residuals;
    double residual_sd = 0.0;
    std::vector<std::string> column_names;

    // row must include the intercept entry
    double predict(const Eigen::VectorXd& row) const;
};

// Least squares via column-pivoted QR. Rank deficiency raises
// SingularDesignError naming the offending column.
LinearFit fit_linear(const DesignMatrix& design, const Eigen::VectorXd& response,
                     VarianceDenominator denom = VarianceDenominator::degrees_of_freedom);

struct GlmOptions {
    int max_iterations = 100;
    int max_halvings = 30;
    double loglik_tol = 1e-10;
    double score_tol = 1e-8;
    // opt-in ridge fallback; 0 keeps the fit unpenalized and lets separation fail loudly
    double ridge = 0.0;
};

struct BinaryGlmFit {
    Link link = Link::logit;
    Eigen::VectorXd coefficients;
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
    std::vector<std::string> column_names;
};

// Maximum likelihood by Newton scoring with step halving. Detects complete
// separation (standardized coefficients exceeding 30) and single-class
// responses. Convergence: relative log-likelihood change < loglik_tol and
// max |score| < score_tol.
BinaryGlmFit fit_binary_glm(const DesignMatrix& design, const Eigen::VectorXi& response,
                            Link link, const GlmOptions& options = {});

// Inverse link of the linear predictor; strictly inside (0,1).
double predict_prob(const BinaryGlmFit& fit, const Eigen::VectorXd& covariates);

struct BivariateProbitFit {
    Eigen::VectorXd coefficients_1;
    Eigen::VectorXd coefficients_2;
    double rho = 0.0;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> column_names;
};

struct BivariateProbitOptions {
    int max_iterations = 200;
    double grad_tol = 1e-6;
    std::optional<double> fix_rho;  // when set, only the coefficients are optimized
};

// Joint ML for two probit margins with latent correlation rho, optimized by
// BFGS on (coefficients_1, coefficients_2, artanh rho) with an analytic
// gradient. Cell probabilities come from bivariate_normal_cdf.
BivariateProbitFit fit_bivariate_probit(const DesignMatrix& design,
                                        const Eigen::VectorXi& response_1,
                                        const Eigen::VectorXi& response_2,
                                        const BivariateProbitOptions& options = {});

// Pearson correlation of the residuals of z and c after regressing each on
// the design. Raises DegenerateVarianceError when either residual vector has
// (numerically) zero variance.
double partial_correlation(const Eigen::VectorXd& z, const Eigen::VectorXd& c,
                           const DesignMatrix& design);

}  // namespace medsens
