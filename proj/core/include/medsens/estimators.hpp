#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medsens/confounder.hpp"
#include "medsens/glm.hpp"
#include "medsens/rng.hpp"

namespace medsens {

enum class ZKind { continuous, binary };

// Observed units: treatment, covariate pool, optional post-treatment
// confounder, binary mediator, outcome.
struct Dataset {
    Eigen::VectorXi t;
    Eigen::VectorXi m;
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // n x p covariate pool, no intercept column
    std::vector<std::string> x_names;
    std::optional<Eigen::VectorXd> z;
    ZKind z_kind = ZKind::continuous;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index column(const std::string& name) const;
    std::vector<Eigen::Index> columns(const std::vector<std::string>& names) const;

    // both arms nonempty, mediator takes both values per arm, used columns finite
    void validate() const;
};

using ZModel = std::variant<ZModelContinuous, ZModelBinary>;

// Per-arm prediction model for z on the chosen predictor columns: linear for
// continuous z, probit for binary z.
ZModel fit_z_model(const Dataset& data, const std::vector<Eigen::Index>& z_predictors,
                   VarianceDenominator denom = VarianceDenominator::degrees_of_freedom);

// Pair of per-arm logistic mediator propensity models on identical column
// sets (plus z as the last column when included).
struct MediatorModels {
    BinaryGlmFit arm0;
    BinaryGlmFit arm1;
    bool includes_z = false;
    std::vector<Eigen::Index> covariate_cols;
};

MediatorModels fit_mediator_models(const Dataset& data, bool include_z,
                                   const std::vector<Eigen::Index>& mediator_covariates);

// Ratio-of-mediator-probability weight for one unit. Probabilities are for
// M=1; the complement ratio applies when m=0. Inputs within 1e-12 of 0 or 1
// raise DegeneratePropensityError.
double rmpw_weight(int m, double p_numerator_m1, double p_denominator_m1);

enum class Method { naive, oracle, imputation, integration };
const char* method_name(Method m);

struct Interval {
    double lower = std::numeric_limits<double>::quiet_NaN();
    double upper = std::numeric_limits<double>::quiet_NaN();
};

struct EffectEstimate {
    double nie = std::numeric_limits<double>::quiet_NaN();
    double nde = std::numeric_limits<double>::quiet_NaN();
    double nie_se = std::numeric_limits<double>::quiet_NaN();
    double nde_se = std::numeric_limits<double>::quiet_NaN();
    double ci_level = 0.95;
    Interval nie_ci;
    Interval nde_ci;
    Method method = Method::naive;
    std::optional<double> rho;
    std::optional<int> k_imputations;
    // weight diagnostics over treated units
    double max_weight = std::numeric_limits<double>::quiet_NaN();
    double effective_sample_size = std::numeric_limits<double>::quiet_NaN();
};

enum class SeMethod { none, bootstrap, taylor };
enum class WithinSeMethod { bootstrap, taylor };

struct SeOptions {
    SeMethod method = SeMethod::bootstrap;
    int bootstrap_b = 200;
    // within-imputation variance for Rubin's rules
    WithinSeMethod within = WithinSeMethod::bootstrap;
    int within_b = 100;
    double ci_level = 0.95;
};

// Full estimator configuration; drives run_analysis and bootstrap refits.
struct AnalysisSpec {
    Method method = Method::integration;
    double rho = 0.0;
    int k_imputations = 25;
    int quadrature_order = 10;
    std::vector<Eigen::Index> mediator_covariates;
    std::vector<Eigen::Index> z_predictors;
    VarianceDenominator variance_denominator = VarianceDenominator::degrees_of_freedom;
    std::optional<Eigen::VectorXd> z0_true;  // oracle only (simulation)
};

// RMPW with mediator models on the pretreatment covariates only.
EffectEstimate estimate_naive(const Dataset& data,
                              const std::vector<Eigen::Index>& mediator_covariates,
                              const SeOptions& se = {}, RngStream rng = RngStream(0, 0));

// Simulation-only benchmark: the weight numerator is evaluated at the true
// z0 of each treated unit (z0_true has one entry per unit).
EffectEstimate estimate_oracle(const Dataset& data, const Eigen::VectorXd& z0_true,
                               const std::vector<Eigen::Index>& mediator_covariates,
                               const SeOptions& se = {}, RngStream rng = RngStream(0, 0));

// Multiple imputation of z0 from its conditional law (K draws per treated
// unit); point estimate averages the per-draw estimates and the SE pools by
// Rubin's rules. k >= 2.
EffectEstimate estimate_imputation(const Dataset& data, const ZModel& zmodel, double rho10,
                                   int k, RngStream rng,
                                   const std::vector<Eigen::Index>& mediator_covariates,
                                   const SeOptions& se = {});

// Expected weight over the conditional law: Gauss-Hermite for continuous z
// (order >= 2), the two-term sum for binary z.
EffectEstimate estimate_integration(const Dataset& data, const ZModel& zmodel, double rho10,
                                    int quadrature_order,
                                    const std::vector<Eigen::Index>& mediator_covariates,
                                    const SeOptions& se = {}, RngStream rng = RngStream(0, 0));

// Rubin's rules: pooled estimate is the mean; pooled variance is the mean
// squared within-SE plus (1 + 1/K) times the sample variance of estimates.
std::pair<double, double> rubin_pool(const std::vector<double>& estimates,
                                     const std::vector<double>& within_ses);

// Stratified nonparametric bootstrap with full model refits. Resamples that
// fail to fit are dropped; more than 5% dropped raises
// BootstrapInstabilityError. b >= 50.
std::pair<double, double> bootstrap_se(const Dataset& data, const AnalysisSpec& analysis,
                                       int b, RngStream rng);

// Fits whatever the spec needs (z model included) and dispatches.
EffectEstimate run_analysis(const Dataset& data, const AnalysisSpec& spec, RngStream rng,
                            const SeOptions& se = {});

struct SensitivityEntry {
    double rho = 0.0;
    std::optional<EffectEstimate> estimate;
    std::string error;  // set when this rho failed
};

struct SensitivityResult {
    EffectEstimate initial;  // naive
    std::vector<SensitivityEntry> grid;
    Interval nie_bounds;
    Interval nde_bounds;
};

// Runs the estimator across the rho grid; per-rho failures are recorded in
// the entry instead of aborting the sweep. spec.method must be imputation or
// integration.
SensitivityResult sensitivity_curve(const Dataset& data, const AnalysisSpec& spec,
                                    const std::vector<double>& rho_values, RngStream rng,
                                    const SeOptions& se = {});

}  // namespace medsens
