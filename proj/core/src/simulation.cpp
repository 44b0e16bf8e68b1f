#include "medsens/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "medsens/parallel.hpp"
#include "medsens/prob.hpp"
#include "medsens/quadrature.hpp"

namespace medsens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double expit(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

// Gaussian-copula correlation for the published bivariate-gamma residuals
// (scenario 9), derived once with calibrate_gamma_copula_rho and verified by
// a test against a fresh calibration.
constexpr double kScenario9CopulaRho = 0.2509037782;

MediatorAlphas alpha0_main() { return {0.0, 1.0, 0.7, 0.0}; }
MediatorAlphas alpha1_main() { return {0.5, 0.5, 1.5, 0.0}; }
OutcomeBetas beta0_main() { return {0.0, 0.5, 1.0, -0.5, 0.4, 0.0, 0.2}; }
OutcomeBetas beta1_main() { return {0.7, -1.0, 2.0, 0.5, 0.5, 0.0, 0.4}; }

ScenarioSpec base_continuous(const std::string& id, int n, double rho) {
    ScenarioSpec s;
    s.id = id;
    s.n = n;
    s.p_treat = 0.5;
    s.x_law = XNormal{0.0, 0.5};
    s.z_kind = ZKind::continuous;
    s.mu0 = {0.0, 0.5, 0.0};
    s.mu1 = {0.5, 1.0, 0.0};
    s.residual_law = BivNormalResiduals{0.5, 1.0, rho};
    s.alpha0 = alpha0_main();
    s.alpha1 = alpha1_main();
    s.beta0 = beta0_main();
    s.beta1 = beta1_main();
    s.true_rho = rho;
    s.mediator_covariates = {"x"};
    s.z_predictors = {"x"};
    return s;
}

ScenarioSpec make_scenario(const std::string& id) {
    if (id == "1") return base_continuous("1", 2000, 0.5);
    if (id == "2") return base_continuous("2", 2000, 0.0);
    if (id == "3") return base_continuous("3", 2000, -0.5);
    if (id == "4") return base_continuous("4", 200, 0.5);
    if (id == "5") return base_continuous("5", 200, 0.0);
    if (id == "6") return base_continuous("6", 200, -0.5);
    if (id == "7a" || id == "7b") {
        ScenarioSpec s = base_continuous(id, 2000, id == "7a" ? 0.8 : 0.5);
        s.residual_law = LatentFactorResiduals{
            0.5, 1.0, 2.0, BivNormalResiduals{0.2, 0.4, 0.5}};
        if (id == "7b") s.z_predictors = {"x", "l"};
        return s;
    }
    if (id == "8") {
        ScenarioSpec s;
        s.id = "8";
        s.n = 2000;
        s.p_treat = 0.5;
        s.x_law = XNormal{0.0, 0.4};
        s.a_bernoulli_p = 0.5;
        s.z_kind = ZKind::continuous;
        s.mu0 = {0.0, 0.5, 0.1};
        s.mu1 = {0.5, 1.0, 0.8};
        s.residual_law = HeteroscedasticByA{BivNormalResiduals{0.8, 0.5, 0.6},
                                            BivNormalResiduals{0.5, 1.0, 0.2}};
        s.alpha0 = {0.0, 0.5, 0.4, 1.0};
        s.alpha1 = {0.3, 1.0, 1.0, -1.0};
        s.beta0 = {0.0, 0.5, 1.0, -0.5, 0.4, 0.7, 0.2};
        s.beta1 = {0.7, -1.0, 2.0, 0.5, 0.5, 0.3, 0.4};
        s.true_rho = 0.4;
        s.mediator_covariates = {"x", "a"};
        s.z_predictors = {"x", "a"};
        return s;
    }
    if (id == "9") {
        ScenarioSpec s = base_continuous("9", 2000, 0.2);
        s.residual_law =
            GammaCopulaResiduals{0.5, 1.0, 0.8, 2.0, 0.2, kScenario9CopulaRho};
        return s;
    }
    if (id == "10") {
        ScenarioSpec s;
        s.id = "10";
        s.n = 700;
        s.p_treat = 0.3;
        s.x_law = XBernoulli{0.5};
        s.z_kind = ZKind::continuous;
        s.mu0 = {0.5, 0.5, 0.0};
        s.mu1 = {0.7, 1.0, 0.0};
        s.residual_law = ZeroInflatedResiduals{0.93, 0.97, 0.2, 0.3};
        s.alpha0 = alpha0_main();
        s.alpha1 = alpha1_main();
        s.beta0 = beta0_main();
        s.beta1 = beta1_main();
        s.true_rho = 0.0;
        s.mediator_covariates = {"x"};
        s.z_predictors = {"x"};
        return s;
    }
    if (id == "11" || id == "12") {
        ScenarioSpec s;
        s.id = id;
        s.n = 2000;
        s.p_treat = 0.5;
        if (id == "11") {
            s.x_law = XCategorical{{-1.0, 0.0, 1.0, 1.5}, {0.25, 0.25, 0.20, 0.30}};
            s.residual_law = BivNormalResiduals{1.0, 1.0, 0.5};
            s.true_rho = 0.5;
        } else {
            s.x_law = XNormal{0.0, 0.5};
            s.residual_law = IndependentLogisticResiduals{1.0};
            s.true_rho = 0.0;
        }
        s.z_kind = ZKind::binary;
        s.mu0 = {0.0, 0.2, 0.0};
        s.mu1 = {0.3, -0.2, 0.0};
        s.alpha0 = {0.0, 1.2, 0.7, 0.0};
        s.alpha1 = {0.3, -0.7, 0.3, 0.0};
        s.beta0 = {0.0, 1.0, 1.0, -1.0, 0.4, 0.0, 0.8};
        s.beta1 = {0.7, -1.5, 1.5, 1.0, 0.5, 0.0, 1.0};
        s.mediator_covariates = {"x"};
        s.z_predictors = {"x"};
        return s;
    }
    throw std::invalid_argument("scenario_registry: unknown scenario id '" + id +
                                "' (known: 1-6, 7a, 7b, 8-12)");
}

struct Unit {
    int t = 0;
    double x = 0.0, a = 0.0, l = 0.0;
    double r0 = 0.0, r1 = 0.0;
    double z0 = 0.0, z1 = 0.0;
    int m0 = 0, m1 = 0;
    double y0 = 0.0, y1 = 0.0;
    double y1_at_m0 = 0.0;  // arm-1 outcome evaluated at M(0)
};

double draw_x(const XLaw& law, RngStream& rng) {
    if (std::holds_alternative<XNormal>(law)) {
        const auto& n = std::get<XNormal>(law);
        return sample_normal(n.mean, n.sd, rng);
    }
    if (std::holds_alternative<XBernoulli>(law)) {
        return sample_bernoulli(std::get<XBernoulli>(law).p, rng);
    }
    const auto& c = std::get<XCategorical>(law);
    return c.values[sample_categorical(c.probs, rng)];
}

void draw_biv_normal(const BivNormalResiduals& law, RngStream& rng, double& r0, double& r1) {
    double e0 = rng.normal01();
    double e1 = rng.normal01();
    double s0 = std::sqrt(law.var0);
    double s1 = std::sqrt(law.var1);
    r0 = s0 * e0;
    r1 = law.rho * s1 * e0 + std::sqrt(std::max(0.0, 1.0 - law.rho * law.rho)) * s1 * e1;
}

double clamped_cdf(double v) {
    return std::min(std_normal_cdf(v), 1.0 - 1e-16);
}

// per-unit draw order: t, x, a, residual-law draws, mediator uniforms,
// outcome noise. Fixed so that (seed, stream) pins the whole dataset.
Unit draw_unit(const ScenarioSpec& spec, RngStream& rng, OutcomeReading reading) {
    Unit u;
    u.t = sample_bernoulli(spec.p_treat, rng);
    u.x = draw_x(spec.x_law, rng);
    if (spec.a_bernoulli_p) {
        u.a = sample_bernoulli(*spec.a_bernoulli_p, rng);
    }

    int i0 = 1, i1 = 1;  // zero-inflation indicators (scenario 10)
    if (std::holds_alternative<BivNormalResiduals>(spec.residual_law)) {
        draw_biv_normal(std::get<BivNormalResiduals>(spec.residual_law), rng, u.r0, u.r1);
    } else if (std::holds_alternative<HeteroscedasticByA>(spec.residual_law)) {
        const auto& h = std::get<HeteroscedasticByA>(spec.residual_law);
        draw_biv_normal(u.a == 0.0 ? h.when_a0 : h.when_a1, rng, u.r0, u.r1);
    } else if (std::holds_alternative<GammaCopulaResiduals>(spec.residual_law)) {
        const auto& g = std::get<GammaCopulaResiduals>(spec.residual_law);
        double e0 = rng.normal01();
        double e1 = rng.normal01();
        double v = g.copula_rho * e0 + std::sqrt(1.0 - g.copula_rho * g.copula_rho) * e1;
        u.r0 = gamma_quantile(clamped_cdf(e0), g.shape0, g.rate0) - g.shape0 / g.rate0;
        u.r1 = gamma_quantile(clamped_cdf(v), g.shape1, g.rate1) - g.shape1 / g.rate1;
    } else if (std::holds_alternative<ZeroInflatedResiduals>(spec.residual_law)) {
        const auto& zi = std::get<ZeroInflatedResiduals>(spec.residual_law);
        u.r0 = sample_normal(0.0, zi.sd0, rng);
        u.r1 = sample_normal(0.0, zi.sd1, rng);
        i0 = sample_bernoulli(zi.p_nonzero0, rng);
        i1 = sample_bernoulli(zi.p_nonzero1, rng);
    } else if (std::holds_alternative<IndependentLogisticResiduals>(spec.residual_law)) {
        const auto& lg = std::get<IndependentLogisticResiduals>(spec.residual_law);
        u.r0 = logistic_quantile(rng.uniform01(), lg.scale);
        u.r1 = logistic_quantile(rng.uniform01(), lg.scale);
    } else {
        const auto& lf = std::get<LatentFactorResiduals>(spec.residual_law);
        u.l = sample_normal(0.0, lf.l_sd, rng);
        double rp0, rp1;
        draw_biv_normal(lf.inner, rng, rp0, rp1);
        u.r0 = lf.loading0 * u.l + rp0;
        u.r1 = lf.loading1 * u.l + rp1;
    }

    double mu0v = spec.mu0.intercept + spec.mu0.x * u.x + spec.mu0.a * u.a;
    double mu1v = spec.mu1.intercept + spec.mu1.x * u.x + spec.mu1.a * u.a;
    if (spec.z_kind == ZKind::binary) {
        u.z0 = (mu0v + u.r0) > 0.0 ? 1.0 : 0.0;
        u.z1 = (mu1v + u.r1) > 0.0 ? 1.0 : 0.0;
    } else if (std::holds_alternative<ZeroInflatedResiduals>(spec.residual_law)) {
        u.z0 = i0 * (mu0v + u.r0);
        u.z1 = i1 * (mu1v + u.r1);
    } else {
        u.z0 = mu0v + u.r0;
        u.z1 = mu1v + u.r1;
    }

    auto med_prob = [&](const MediatorAlphas& al, double z) {
        return expit(al.intercept + al.z * z + al.x * u.x + al.a * u.a);
    };
    u.m0 = sample_bernoulli(med_prob(spec.alpha0, u.z0), rng);
    u.m1 = sample_bernoulli(med_prob(spec.alpha1, u.z1), rng);

    double eta0 = sample_normal(0.0, spec.outcome_noise_sd, rng);
    double eta1 = sample_normal(0.0, spec.outcome_noise_sd, rng);

    const bool literal = reading == OutcomeReading::literal_appendix;
    double zm0 = u.z0 * u.m0;  // arm 0 pairs with itself under either reading
    double zm1 = literal ? u.z0 * u.m0 : u.z1 * u.m1;
    double zm1_at_m0 = literal ? u.z0 * u.m0 : u.z1 * u.m0;
    double r_in_y0 = u.r0;
    double r_in_y1 = literal ? u.r0 : u.r1;

    u.y0 = spec.beta0.intercept + spec.beta0.z * u.z0 + spec.beta0.m * u.m0 +
           spec.beta0.zm * zm0 + spec.beta0.x * u.x + spec.beta0.a * u.a +
           spec.beta0.r * r_in_y0 + eta0;
    u.y1 = spec.beta1.intercept + spec.beta1.z * u.z1 + spec.beta1.m * u.m1 +
           spec.beta1.zm * zm1 + spec.beta1.x * u.x + spec.beta1.a * u.a +
           spec.beta1.r * r_in_y1 + eta1;
    u.y1_at_m0 = spec.beta1.intercept + spec.beta1.z * u.z1 + spec.beta1.m * u.m0 +
                 spec.beta1.zm * zm1_at_m0 + spec.beta1.x * u.x + spec.beta1.a * u.a +
                 spec.beta1.r * r_in_y1 + eta1;
    return u;
}

nlohmann::ordered_json x_law_json(const XLaw& law) {
    nlohmann::ordered_json j;
    if (std::holds_alternative<XNormal>(law)) {
        const auto& n = std::get<XNormal>(law);
        j["type"] = "normal";
        j["mean"] = n.mean;
        j["sd"] = n.sd;
    } else if (std::holds_alternative<XBernoulli>(law)) {
        j["type"] = "bernoulli";
        j["p"] = std::get<XBernoulli>(law).p;
    } else {
        const auto& c = std::get<XCategorical>(law);
        j["type"] = "categorical";
        j["values"] = c.values;
        j["probs"] = c.probs;
    }
    return j;
}

nlohmann::ordered_json residual_law_json(const ResidualLaw& law) {
    nlohmann::ordered_json j;
    if (std::holds_alternative<BivNormalResiduals>(law)) {
        const auto& b = std::get<BivNormalResiduals>(law);
        j["type"] = "bivariate_normal";
        j["var0"] = b.var0;
        j["var1"] = b.var1;
        j["rho"] = b.rho;
    } else if (std::holds_alternative<HeteroscedasticByA>(law)) {
        const auto& h = std::get<HeteroscedasticByA>(law);
        j["type"] = "heteroscedastic_by_a";
        j["a0"] = residual_law_json(h.when_a0);
        j["a1"] = residual_law_json(h.when_a1);
    } else if (std::holds_alternative<GammaCopulaResiduals>(law)) {
        const auto& g = std::get<GammaCopulaResiduals>(law);
        j["type"] = "gamma_copula";
        j["shape0"] = g.shape0;
        j["rate0"] = g.rate0;
        j["shape1"] = g.shape1;
        j["rate1"] = g.rate1;
        j["pearson_rho"] = g.pearson_rho;
        j["copula_rho"] = g.copula_rho;
    } else if (std::holds_alternative<ZeroInflatedResiduals>(law)) {
        const auto& z = std::get<ZeroInflatedResiduals>(law);
        j["type"] = "zero_inflated";
        j["p_nonzero0"] = z.p_nonzero0;
        j["p_nonzero1"] = z.p_nonzero1;
        j["sd0"] = z.sd0;
        j["sd1"] = z.sd1;
    } else if (std::holds_alternative<IndependentLogisticResiduals>(law)) {
        j["type"] = "independent_logistic";
        j["scale"] = std::get<IndependentLogisticResiduals>(law).scale;
    } else {
        const auto& lf = std::get<LatentFactorResiduals>(law);
        j["type"] = "latent_factor";
        j["l_sd"] = lf.l_sd;
        j["loading0"] = lf.loading0;
        j["loading1"] = lf.loading1;
        j["inner"] = residual_law_json(lf.inner);
    }
    return j;
}

nlohmann::ordered_json structural_json(const StructuralMean& m) {
    return {{"intercept", m.intercept}, {"x", m.x}, {"a", m.a}};
}
nlohmann::ordered_json alphas_json(const MediatorAlphas& a) {
    return {{"intercept", a.intercept}, {"z", a.z}, {"x", a.x}, {"a", a.a}};
}
nlohmann::ordered_json betas_json(const OutcomeBetas& b) {
    return {{"intercept", b.intercept}, {"z", b.z},  {"m", b.m}, {"zm", b.zm},
            {"x", b.x},                 {"a", b.a},  {"r", b.r}};
}

}  // namespace

const std::vector<std::string>& scenario_ids() {
    static const std::vector<std::string> ids = {"1", "2", "3",  "4",  "5", "6", "7a",
                                                 "7b", "8", "9", "10", "11", "12"};
    return ids;
}

ScenarioSpec scenario_registry(const std::string& id) { return make_scenario(id); }

std::string scenario_manifest() {
    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    for (const auto& id : scenario_ids()) {
        ScenarioSpec s = make_scenario(id);
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["n"] = s.n;
        j["p_treat"] = s.p_treat;
        j["x_law"] = x_law_json(s.x_law);
        if (s.a_bernoulli_p) {
            j["a_law"] = {{"type", "bernoulli"}, {"p", *s.a_bernoulli_p}};
        }
        j["z_kind"] = s.z_kind == ZKind::continuous ? "continuous" : "binary";
        j["mu0"] = structural_json(s.mu0);
        j["mu1"] = structural_json(s.mu1);
        j["residual_law"] = residual_law_json(s.residual_law);
        j["alpha0"] = alphas_json(s.alpha0);
        j["alpha1"] = alphas_json(s.alpha1);
        j["beta0"] = betas_json(s.beta0);
        j["beta1"] = betas_json(s.beta1);
        j["outcome_noise_sd"] = s.outcome_noise_sd;
        j["true_rho"] = s.true_rho;
        j["mediator_covariates"] = s.mediator_covariates;
        j["z_predictors"] = s.z_predictors;
        manifest.push_back(std::move(j));
    }
    return manifest.dump(2) + "\n";
}

double calibrate_gamma_copula_rho(double shape0, double rate0, double shape1, double rate1,
                                  double target_pearson) {
    QuadratureRule rule = gauss_hermite_rule(64);
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    const double sqrt2 = std::sqrt(2.0);
    const int n = rule.order;

    std::vector<double> q0(n), node_u(n);
    for (int i = 0; i < n; ++i) {
        node_u[i] = sqrt2 * rule.nodes[i];
        q0[i] = gamma_quantile(clamped_cdf(node_u[i]), shape0, rate0);
    }
    const double m0 = shape0 / rate0, s0 = std::sqrt(shape0) / rate0;
    const double m1 = shape1 / rate1, s1 = std::sqrt(shape1) / rate1;

    auto pearson = [&](double rc) {
        double total = 0.0;
        double root = std::sqrt(1.0 - rc * rc);
        for (int i = 0; i < n; ++i) {
            double inner = 0.0;
            for (int j = 0; j < n; ++j) {
                double v = rc * node_u[i] + root * node_u[j];
                inner += rule.weights[j] * inv_sqrt_pi *
                         gamma_quantile(clamped_cdf(v), shape1, rate1);
            }
            total += rule.weights[i] * inv_sqrt_pi * q0[i] * inner;
        }
        return (total - m0 * m1) / (s0 * s1);
    };

    double lo = target_pearson >= 0.0 ? 0.0 : -0.995;
    double hi = target_pearson >= 0.0 ? 0.995 : 0.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (pearson(mid) < target_pearson) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

SimDataset generate(const ScenarioSpec& spec, RngStream rng, OutcomeReading reading) {
    const int n = spec.n;
    SimDataset sim;
    sim.z0.resize(n);
    sim.z1.resize(n);
    sim.r0.resize(n);
    sim.r1.resize(n);
    sim.m0.resize(n);
    sim.m1.resize(n);
    sim.y0.resize(n);
    sim.y1.resize(n);

    const bool has_a = spec.a_bernoulli_p.has_value();
    const bool has_l = std::holds_alternative<LatentFactorResiduals>(spec.residual_law);
    int p = 1 + (has_a ? 1 : 0) + (has_l ? 1 : 0);

    Dataset& d = sim.data;
    d.t.resize(n);
    d.m.resize(n);
    d.y.resize(n);
    d.x.resize(n, p);
    d.x_names = {"x"};
    if (has_a) d.x_names.push_back("a");
    if (has_l) d.x_names.push_back("l");
    d.z = Eigen::VectorXd(n);
    d.z_kind = spec.z_kind;

    for (int i = 0; i < n; ++i) {
        Unit u = draw_unit(spec, rng, reading);
        sim.z0(i) = u.z0;
        sim.z1(i) = u.z1;
        sim.r0(i) = u.r0;
        sim.r1(i) = u.r1;
        sim.m0(i) = u.m0;
        sim.m1(i) = u.m1;
        sim.y0(i) = u.y0;
        sim.y1(i) = u.y1;

        d.t(i) = u.t;
        d.m(i) = u.t == 1 ? u.m1 : u.m0;
        d.y(i) = u.t == 1 ? u.y1 : u.y0;
        (*d.z)(i) = u.t == 1 ? u.z1 : u.z0;
        int col = 0;
        d.x(i, col++) = u.x;
        if (has_a) d.x(i, col++) = u.a;
        if (has_l) d.x(i, col++) = u.l;
    }
    return sim;
}

TrueEffects true_effects(const ScenarioSpec& spec, long n_eval, std::uint64_t seed,
                         OutcomeReading reading) {
    if (n_eval < 1) {
        throw std::invalid_argument("true_effects: n_eval must be positive");
    }
    constexpr long kChunk = 250000;
    const long n_chunks = (n_eval + kChunk - 1) / kChunk;
    std::vector<double> nie_sum(n_chunks, 0.0), nde_sum(n_chunks, 0.0);

    parallel_for(n_chunks, [&](long c) {
        long lo = c * kChunk;
        long hi = std::min(n_eval, lo + kChunk);
        RngStream rng(seed, substream({kPurposeTruth, static_cast<std::uint64_t>(c)}));
        double s_nie = 0.0, s_nde = 0.0;
        for (long i = lo; i < hi; ++i) {
            Unit u = draw_unit(spec, rng, reading);
            s_nie += u.y1 - u.y1_at_m0;
            s_nde += u.y1_at_m0 - u.y0;
        }
        nie_sum[c] = s_nie;
        nde_sum[c] = s_nde;
    });

    double nie = 0.0, nde = 0.0;
    for (long c = 0; c < n_chunks; ++c) {
        nie += nie_sum[c];
        nde += nde_sum[c];
    }
    return {nie / n_eval, nde / n_eval};
}

namespace {

struct RhoGrid {
    std::vector<double> values;
    std::size_t at_idx = 0;  // closest to true rho
};

RhoGrid resolve_grid(const ScenarioSpec& spec, const McOptions& options) {
    RhoGrid grid;
    grid.values = options.rho_values.empty() ? std::vector<double>{spec.true_rho}
                                             : options.rho_values;
    if (spec.z_kind == ZKind::binary) {
        for (double& r : grid.values) {
            r = std::min(0.9999, std::max(-0.9999, r));
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        double d = std::fabs(grid.values[i] - spec.true_rho);
        if (d < best) {
            best = d;
            grid.at_idx = i;
        }
    }
    return grid;
}

struct ColumnAccumulator {
    std::vector<double> nie_at, nde_at, nie_se_at, nde_se_at;
    std::vector<double> lo_nie, hi_nie, lo_nde, hi_nde;

    void add_at(const ReplicationRow& row) {
        if (!row.error.empty() || !std::isfinite(row.nie)) return;
        nie_at.push_back(row.nie);
        nde_at.push_back(row.nde);
        if (std::isfinite(row.nie_se)) {
            nie_se_at.push_back(row.nie_se);
            nde_se_at.push_back(row.nde_se);
        }
    }

    static double mean(const std::vector<double>& v) {
        if (v.empty()) return kNaN;
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    }
    static double sd(const std::vector<double>& v) {
        if (v.size() < 2) return kNaN;
        double m = mean(v);
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::sqrt(ss / (v.size() - 1));
    }

    EstimatorColumns finish() const {
        EstimatorColumns col;
        col.mean_nie = mean(nie_at);
        col.mean_nde = mean(nde_at);
        col.mean_nie_se = mean(nie_se_at);
        col.mean_nde_se = mean(nde_se_at);
        col.sd_nie = sd(nie_at);
        col.sd_nde = sd(nde_at);
        col.n_ok = static_cast<int>(nie_at.size());
        if (!lo_nie.empty()) {
            col.nie_bounds = {mean(lo_nie), mean(hi_nie)};
            col.nde_bounds = {mean(lo_nde), mean(hi_nde)};
        }
        return col;
    }
};

}  // namespace

std::uint64_t replication_analysis_seed(std::uint64_t master_seed, int replication) {
    return substream({kPurposeAnalysis, master_seed, static_cast<std::uint64_t>(replication)});
}

MonteCarloResult run_monte_carlo(const ScenarioSpec& spec, int replications,
                                 const McOptions& options, std::uint64_t master_seed) {
    if (replications < 1) {
        throw std::invalid_argument("run_monte_carlo: replications must be >= 1");
    }
    ScenarioSpec scen = spec;
    if (options.n_override) scen.n = *options.n_override;

    RhoGrid grid = resolve_grid(scen, options);
    std::vector<std::vector<ReplicationRow>> per_rep(replications);

    parallel_for(replications, [&](long r) {
        auto rep = static_cast<std::uint64_t>(r);
        RngStream gen_stream(master_seed, substream({kPurposeGenerate, rep}));
        const std::uint64_t rep_seed = replication_analysis_seed(master_seed,
                                                                 static_cast<int>(r));
        std::vector<ReplicationRow>& rows = per_rep[r];

        SimDataset sim;
        try {
            sim = generate(scen, gen_stream, options.reading);
            sim.data.validate();
        } catch (const std::exception& e) {
            ReplicationRow row;
            row.replication = static_cast<int>(r);
            row.error = std::string("generate: ") + e.what();
            rows.push_back(row);
            return;
        }
        const Dataset& data = sim.data;
        auto med_cov = data.columns(scen.mediator_covariates);
        auto z_pred = data.columns(scen.z_predictors);

        auto push = [&](Method method, double rho, const char* stage, auto&& fn) {
            ReplicationRow row;
            row.replication = static_cast<int>(r);
            row.method = method;
            row.rho = rho;
            try {
                EffectEstimate est = fn();
                row.nie = est.nie;
                row.nde = est.nde;
                row.nie_se = est.nie_se;
                row.nde_se = est.nde_se;
            } catch (const std::exception& e) {
                row.error = std::string(stage) + ": " + e.what();
            }
            rows.push_back(row);
        };

        SeOptions se_off;
        se_off.method = SeMethod::none;

        if (options.run_naive) {
            push(Method::naive, kNaN, "naive", [&] {
                SeOptions se = se_off;
                if (options.compute_se) {
                    se.method = SeMethod::bootstrap;
                    se.bootstrap_b = options.bootstrap_b;
                }
                return estimate_naive(data, med_cov, se,
                                      RngStream(rep_seed, substream({kPurposeBootstrap, 100})));
            });
        }
        if (options.run_oracle) {
            push(Method::oracle, kNaN, "oracle", [&] {
                SeOptions se = se_off;
                if (options.compute_se) {
                    se.method = SeMethod::bootstrap;
                    se.bootstrap_b = options.bootstrap_b;
                }
                return estimate_oracle(data, sim.z0, med_cov, se,
                                       RngStream(rep_seed, substream({kPurposeBootstrap, 101})));
            });
        }

        if (options.run_imputation || options.run_integration) {
            ZModel zmodel;
            bool z_ok = true;
            try {
                zmodel = fit_z_model(data, z_pred);
            } catch (const std::exception& e) {
                z_ok = false;
                ReplicationRow row;
                row.replication = static_cast<int>(r);
                row.error = std::string("z-model: ") + e.what();
                rows.push_back(row);
            }
            if (z_ok) {
                for (std::size_t gi = 0; gi < grid.values.size(); ++gi) {
                    double rho = grid.values[gi];
                    bool with_se = options.compute_se && gi == grid.at_idx;
                    if (options.run_imputation) {
                        push(Method::imputation, rho, "imputation", [&] {
                            SeOptions se = se_off;
                            if (with_se) {
                                se.method = SeMethod::bootstrap;
                                se.within = options.within;
                                se.within_b = options.within_b;
                            }
                            // same derivation as sensitivity_curve's, so the
                            // emitted (dataset, config) pair replays these draws
                            RngStream draw(rep_seed,
                                           substream({kPurposeImpute, 0,
                                                      static_cast<std::uint64_t>(gi)}));
                            return estimate_imputation(data, zmodel, rho,
                                                       options.k_imputations, draw, med_cov,
                                                       se);
                        });
                    }
                    if (options.run_integration) {
                        push(Method::integration, rho, "integration", [&] {
                            SeOptions se = se_off;
                            if (with_se) {
                                se.method = SeMethod::bootstrap;
                                se.bootstrap_b = options.bootstrap_b;
                            }
                            return estimate_integration(
                                data, zmodel, rho, options.quadrature_order, med_cov, se,
                                RngStream(rep_seed,
                                          substream({kPurposeBootstrap, 0,
                                                     static_cast<std::uint64_t>(gi)})));
                        });
                    }
                }
            }
        }
    });

    MonteCarloResult result;
    result.summary.scenario = scen.id;
    result.summary.replications = replications;
    result.summary.n = scen.n;
    result.summary.at_rho = grid.values[grid.at_idx];
    result.summary.rho_grid = grid.values;

    std::map<std::string, ColumnAccumulator> acc;
    int failures = 0;
    for (int r = 0; r < replications; ++r) {
        bool failed = false;
        // per-estimator bounds within this replication
        std::map<std::string, std::pair<double, double>> rep_nie, rep_nde;
        for (const ReplicationRow& row : per_rep[r]) {
            if (!row.error.empty()) {
                failed = true;
                result.rows.push_back(row);
                continue;
            }
            const char* name = method_name(row.method);
            bool at = row.method == Method::naive || row.method == Method::oracle ||
                      std::fabs(row.rho - grid.values[grid.at_idx]) < 1e-12;
            if (at) acc[name].add_at(row);
            if (row.method == Method::imputation || row.method == Method::integration) {
                auto [it, fresh] = rep_nie.try_emplace(name, row.nie, row.nie);
                if (!fresh) {
                    it->second.first = std::min(it->second.first, row.nie);
                    it->second.second = std::max(it->second.second, row.nie);
                }
                auto [jt, fresh2] = rep_nde.try_emplace(name, row.nde, row.nde);
                if (!fresh2) {
                    jt->second.first = std::min(jt->second.first, row.nde);
                    jt->second.second = std::max(jt->second.second, row.nde);
                }
            }
            result.rows.push_back(row);
        }
        for (auto& [name, mm] : rep_nie) {
            acc[name].lo_nie.push_back(mm.first);
            acc[name].hi_nie.push_back(mm.second);
        }
        for (auto& [name, mm] : rep_nde) {
            acc[name].lo_nde.push_back(mm.first);
            acc[name].hi_nde.push_back(mm.second);
        }
        if (failed) ++failures;
    }
    for (auto& [name, a] : acc) {
        result.summary.estimators[name] = a.finish();
    }
    result.summary.failures = failures;
    result.summary.valid = failures <= 0.02 * replications;
    return result;
}

}  // namespace medsens
