#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medsens/estimators.hpp"
#include "medsens/rng.hpp"

namespace medsens {

// Which member of the published outcome equation's typographically ambiguous
// terms to generate. arm_matched pairs every term with its own arm
// (beta_ZM * Z(t)M(t), beta_r * r_t); literal_appendix reproduces the display
// as printed (Z(0)M(0) and r_0 in both arms).
enum class OutcomeReading { arm_matched, literal_appendix };

struct XNormal {
    double mean = 0.0;
    double sd = 1.0;
};
struct XBernoulli {
    double p = 0.5;
};
struct XCategorical {
    std::vector<double> values;
    std::vector<double> probs;
};
using XLaw = std::variant<XNormal, XBernoulli, XCategorical>;

struct BivNormalResiduals {
    double var0 = 1.0;
    double var1 = 1.0;
    double rho = 0.0;
};
struct HeteroscedasticByA {
    BivNormalResiduals when_a0;
    BivNormalResiduals when_a1;
};
struct GammaCopulaResiduals {
    double shape0, rate0;
    double shape1, rate1;
    double pearson_rho;  // target Pearson correlation of the recentered marginals
    double copula_rho;   // calibrated Gaussian-copula correlation achieving it
};
struct ZeroInflatedResiduals {
    double p_nonzero0, p_nonzero1;  // P(indicator = 1) per arm
    double sd0, sd1;                // independent normal residual scales
};
struct IndependentLogisticResiduals {
    double scale = 1.0;
};
struct LatentFactorResiduals {
    double l_sd;
    double loading0, loading1;
    BivNormalResiduals inner;
};
using ResidualLaw =
    std::variant<BivNormalResiduals, HeteroscedasticByA, GammaCopulaResiduals,
                 ZeroInflatedResiduals, IndependentLogisticResiduals, LatentFactorResiduals>;

struct StructuralMean {
    double intercept = 0.0;
    double x = 0.0;
    double a = 0.0;
};
struct MediatorAlphas {
    double intercept, z, x, a;
};
struct OutcomeBetas {
    double intercept, z, m, zm, x, a, r;
};

// Complete data-generation recipe for one published simulation scenario,
// plus the analysis defaults (which columns predict z / enter the mediator
// models) that the scenario's results were produced with.
struct ScenarioSpec {
    std::string id;
    int n = 0;
    double p_treat = 0.5;
    XLaw x_law;
    std::optional<double> a_bernoulli_p;
    ZKind z_kind = ZKind::continuous;
    StructuralMean mu0, mu1;
    ResidualLaw residual_law;
    MediatorAlphas alpha0, alpha1;
    OutcomeBetas beta0, beta1;
    double outcome_noise_sd = 0.1;
    double true_rho = 0.0;
    std::vector<std::string> mediator_covariates;
    std::vector<std::string> z_predictors;
};

// Known ids: "1".."6", "7a", "7b", "8".."12".
const std::vector<std::string>& scenario_ids();
ScenarioSpec scenario_registry(const std::string& id);

// Human-readable JSON manifest of the whole registry (stable key order);
// byte-compared against a golden transcription in the tests.
std::string scenario_manifest();

// Deterministic calibration of the Gaussian-copula correlation that yields a
// target Pearson correlation between two gamma marginals (2-D Gauss-Hermite
// plus bisection). Exposed so tests can re-derive the stored constant.
double calibrate_gamma_copula_rho(double shape0, double rate0, double shape1, double rate1,
                                  double target_pearson);

// One generated dataset with its potential values and residuals.
struct SimDataset {
    Dataset data;
    Eigen::VectorXd z0, z1;
    Eigen::VectorXd r0, r1;
    Eigen::VectorXi m0, m1;
    Eigen::VectorXd y0, y1;
};

SimDataset generate(const ScenarioSpec& spec, RngStream rng,
                    OutcomeReading reading = OutcomeReading::arm_matched);

struct TrueEffects {
    double nie = 0.0;
    double nde = 0.0;
};

// Benchmark effects by direct potential-outcome averaging over n_eval fresh
// units (the published tables use 5,000,000). Deterministic given the seed;
// parallel over fixed-size chunks.
TrueEffects true_effects(const ScenarioSpec& spec, long n_eval, std::uint64_t seed,
                         OutcomeReading reading = OutcomeReading::arm_matched);

struct ReplicationRow {
    int replication = 0;
    Method method = Method::naive;
    double rho = std::numeric_limits<double>::quiet_NaN();  // NaN for naive/oracle
    double nie = std::numeric_limits<double>::quiet_NaN();
    double nde = std::numeric_limits<double>::quiet_NaN();
    double nie_se = std::numeric_limits<double>::quiet_NaN();
    double nde_se = std::numeric_limits<double>::quiet_NaN();
    std::string error;  // nonempty when this item failed
};

struct EstimatorColumns {
    // at the grid value closest to the scenario's true rho
    double mean_nie = std::numeric_limits<double>::quiet_NaN();
    double mean_nde = std::numeric_limits<double>::quiet_NaN();
    double mean_nie_se = std::numeric_limits<double>::quiet_NaN();
    double mean_nde_se = std::numeric_limits<double>::quiet_NaN();
    double sd_nie = std::numeric_limits<double>::quiet_NaN();
    double sd_nde = std::numeric_limits<double>::quiet_NaN();
    // mean over replications of the min/max point estimate across the grid
    Interval nie_bounds;
    Interval nde_bounds;
    int n_ok = 0;
};

struct MonteCarloSummary {
    std::string scenario;
    int replications = 0;
    int n = 0;
    int failures = 0;  // replications with at least one failed item
    bool valid = true;  // failures <= 2% of replications
    double at_rho = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> rho_grid;
    std::map<std::string, EstimatorColumns> estimators;
    std::optional<TrueEffects> truth;
};

struct McOptions {
    bool run_naive = true;
    bool run_oracle = true;
    bool run_imputation = true;
    bool run_integration = true;
    // evaluation grid; empty means {true_rho}. For binary z, +-1 endpoints
    // are clipped to +-0.9999 (the binary conditional law needs |rho| < 1).
    std::vector<double> rho_values;
    int k_imputations = 25;
    int quadrature_order = 10;
    std::optional<int> n_override;
    // SEs are computed at the grid value closest to true rho only
    bool compute_se = false;
    int bootstrap_b = 200;                               // naive/oracle/integration SE
    WithinSeMethod within = WithinSeMethod::taylor;      // imputation within-SE
    int within_b = 100;
    OutcomeReading reading = OutcomeReading::arm_matched;
};

struct MonteCarloResult {
    MonteCarloSummary summary;
    std::vector<ReplicationRow> rows;  // ordered by (replication, method, rho)
};

// Generates `replications` datasets and runs the configured estimators on
// each. Per-item failures are recorded in the rows rather than thrown.
// Replications run in parallel over per-replication substreams.
MonteCarloResult run_monte_carlo(const ScenarioSpec& spec, int replications,
                                 const McOptions& options, std::uint64_t master_seed);

// Seed that the harness hands the analysis stage of one replication. An
// emitted (dataset, config) pair carrying this seed reproduces the recorded
// estimates through the analyze path.
std::uint64_t replication_analysis_seed(std::uint64_t master_seed, int replication);

}  // namespace medsens
