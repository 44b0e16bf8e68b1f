// Command-line front end: analyze (sensitivity analysis on a CSV), simulate
// (Monte Carlo harness over the published scenarios), bounds (feasible rho
// intervals from auxiliary covariates).
//
// Exit codes: 0 success, 2 validation failure, 3 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "medsens/config.hpp"
#include "medsens/csv.hpp"
#include "medsens/errors.hpp"
#include "medsens/report.hpp"
#include "medsens/simulation.hpp"

namespace fs = std::filesystem;
using namespace medsens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void print_schema_error(const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& issue : e.issues) {
        std::cerr << "  ";
        if (issue.row > 0) std::cerr << "row " << issue.row << ", ";
        std::cerr << "column '" << issue.column << "': " << issue.reason << "\n";
    }
}

SeOptions se_options_from_config(const AnalysisConfig& cfg) {
    SeOptions se;
    se.method = cfg.se_method == "bootstrap"
                    ? SeMethod::bootstrap
                    : (cfg.se_method == "taylor" ? SeMethod::taylor : SeMethod::none);
    se.bootstrap_b = cfg.bootstrap_b;
    se.within = cfg.within_se_method == "taylor" ? WithinSeMethod::taylor
                                                 : WithinSeMethod::bootstrap;
    se.within_b = cfg.within_b;
    se.ci_level = cfg.ci_level;
    return se;
}

bool is_binary_column(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) != 0.0 && v(i) != 1.0) return false;
    }
    return true;
}

// partial correlations (continuous z) or latent bivariate-probit
// correlations (binary z, binary c) of z with one auxiliary column, per arm
std::pair<double, double> aux_correlations(const Dataset& data,
                                           const std::vector<Eigen::Index>& z_pred,
                                           Eigen::Index aux_col) {
    std::vector<Eigen::Index> conditioning;
    for (Eigen::Index c : z_pred) {
        if (c != aux_col) conditioning.push_back(c);
    }
    double out[2];
    for (int arm = 0; arm < 2; ++arm) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            if (data.t(i) == arm) rows.push_back(i);
        }
        Eigen::MatrixXd covs(rows.size(), conditioning.size());
        Eigen::VectorXd zv(rows.size()), cv(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < conditioning.size(); ++c) {
                covs(r, c) = data.x(rows[r], conditioning[c]);
            }
            zv(r) = (*data.z)(rows[r]);
            cv(r) = data.x(rows[r], aux_col);
        }
        std::vector<std::string> names;
        for (Eigen::Index c : conditioning) names.push_back(data.x_names[c]);
        DesignMatrix design = DesignMatrix::with_intercept(covs, names);

        if (data.z_kind == ZKind::continuous) {
            out[arm] = partial_correlation(zv, cv, design);
        } else {
            if (!is_binary_column(cv)) {
                throw std::invalid_argument(
                    "bounds: auxiliary column '" + data.x_names[aux_col] +
                    "' must be binary when z is binary (bivariate probit)");
            }
            Eigen::VectorXi zi(zv.size()), ci(cv.size());
            for (Eigen::Index i = 0; i < zv.size(); ++i) {
                zi(i) = static_cast<int>(zv(i));
                ci(i) = static_cast<int>(cv(i));
            }
            out[arm] = fit_bivariate_probit(design, zi, ci).rho;
        }
    }
    return {out[1], out[0]};  // (rho_1C, rho_0C)
}

struct RhoResolution {
    std::vector<double> values;
    RhoInterval range{-1.0, 1.0};
    bool have_range = false;
    nlohmann::ordered_json per_aux = nlohmann::ordered_json::array();
};

RhoResolution resolve_rho(const Dataset& data, const AnalysisConfig& cfg,
                          std::vector<std::string>& warnings) {
    RhoResolution res;
    if (!cfg.aux.empty()) {
        auto z_pred = data.columns(cfg.effective_z_predictors());
        std::vector<std::pair<double, double>> pairs;
        for (const auto& aux_name : cfg.aux) {
            auto [r1c, r0c] = aux_correlations(data, z_pred, data.column(aux_name));
            pairs.emplace_back(r1c, r0c);
            RhoInterval iv = rho_bounds(r1c, r0c);
            res.per_aux.push_back({{"aux", aux_name},
                                   {"rho_1c", r1c},
                                   {"rho_0c", r0c},
                                   {"interval", {iv.lower, iv.upper}}});
        }
        res.range = rho_bounds_multi(pairs);
        res.have_range = true;
    }
    if (!cfg.rho_values.empty()) {
        res.values = cfg.rho_values;
        if (res.have_range) {
            for (double r : res.values) {
                if (r < res.range.lower - 1e-12 || r > res.range.upper + 1e-12) {
                    std::ostringstream os;
                    os << "rho " << r << " lies outside the feasible range ["
                       << res.range.lower << ", " << res.range.upper
                       << "] implied by the auxiliary covariates";
                    warnings.push_back(os.str());
                }
            }
        }
    } else {
        if (!res.have_range) {
            throw SchemaError("no rho specification",
                              {{0, "rho", "provide rho.values or columns.aux"}});
        }
        res.values = rho_grid(res.range, cfg.rho_grid_points);
        if (data.z_kind == ZKind::binary) {
            for (double& r : res.values) r = std::min(0.9999, std::max(-0.9999, r));
        }
    }
    return res;
}

int cmd_analyze(const std::string& input, const std::string& config_path,
                const std::string& out_dir) {
    AnalysisConfig cfg = AnalysisConfig::from_json_file(config_path);
    Dataset data = load_dataset(read_csv(input), cfg);

    std::vector<std::string> warnings;
    // the z predictors should contain the mediator covariates
    auto z_pred_names = cfg.effective_z_predictors();
    for (const auto& c : cfg.covariates) {
        if (std::find(z_pred_names.begin(), z_pred_names.end(), c) == z_pred_names.end()) {
            warnings.push_back("z predictors do not contain mediator covariate '" + c +
                               "'; the z model should predict at least as richly as the "
                               "mediator model");
        }
    }

    RhoResolution rho = resolve_rho(data, cfg, warnings);
    SeOptions se = se_options_from_config(cfg);

    AnalysisSpec spec;
    spec.k_imputations = cfg.k_imputations;
    spec.quadrature_order = cfg.quadrature_order;
    spec.mediator_covariates = data.columns(cfg.covariates);
    spec.z_predictors = data.columns(z_pred_names);

    std::vector<std::pair<std::string, SensitivityResult>> results;
    std::vector<std::string> methods;
    if (cfg.method == "both") {
        methods = {"imputation", "integration"};
    } else {
        methods = {cfg.method};
    }
    for (const auto& name : methods) {
        spec.method = name == "imputation" ? Method::imputation : Method::integration;
        RngStream rng(cfg.seed, 0);
        results.emplace_back(name, sensitivity_curve(data, spec, rho.values, rng, se));
    }
    for (const auto& [name, result] : results) {
        for (const auto& entry : result.grid) {
            if (!entry.estimate) {
                warnings.push_back(name + " failed at rho " + format_double(entry.rho) +
                                   ": " + entry.error);
            }
        }
    }

    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "initial.json").string(),
               initial_json(results.front().second.initial, warnings));
    write_file((fs::path(out_dir) / "sensitivity.csv").string(), sensitivity_csv(results));
    write_file((fs::path(out_dir) / "summary.json").string(),
               summary_json(results, rho.range, warnings));
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << out_dir << "/initial.json, sensitivity.csv, summary.json\n";
    return kExitOk;
}

std::vector<double> parse_rho_grid_flag(const std::string& text) {
    double lo, hi;
    int count;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3) {
        throw std::invalid_argument("--rho-grid expects LO:HI:COUNT");
    }
    return rho_grid(RhoInterval{lo, hi}, count);
}

int cmd_simulate(const std::string& scenario_id, int replications, std::uint64_t seed,
                 const std::string& out_dir, int n_override, bool true_rho_only,
                 const std::string& rho_grid_flag, bool emit_csv, bool with_se, int k,
                 int order, int bootstrap_b, long truth_n, bool literal_outcome) {
    ScenarioSpec spec = scenario_registry(scenario_id);

    McOptions options;
    options.k_imputations = k;
    options.quadrature_order = order;
    options.compute_se = with_se;
    options.bootstrap_b = bootstrap_b;
    options.reading =
        literal_outcome ? OutcomeReading::literal_appendix : OutcomeReading::arm_matched;
    if (n_override > 0) options.n_override = n_override;
    if (true_rho_only) {
        options.rho_values = {spec.true_rho};
    } else if (!rho_grid_flag.empty()) {
        options.rho_values = parse_rho_grid_flag(rho_grid_flag);
    } else {
        options.rho_values = rho_grid(RhoInterval{-1.0, 1.0}, 21);
        bool has_true = false;
        for (double r : options.rho_values) {
            if (std::fabs(r - spec.true_rho) < 1e-12) has_true = true;
        }
        if (!has_true) {
            options.rho_values.push_back(spec.true_rho);
            std::sort(options.rho_values.begin(), options.rho_values.end());
        }
    }

    MonteCarloResult result = run_monte_carlo(spec, replications, options, seed);
    if (truth_n > 0) {
        result.summary.truth = true_effects(spec, truth_n, seed, options.reading);
    }

    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "replications.csv").string(),
               replications_csv(spec.id, result.rows));
    write_file((fs::path(out_dir) / "summary.json").string(),
               mc_summary_json(result.summary));

    if (emit_csv) {
        ScenarioSpec gen_spec = spec;
        if (options.n_override) gen_spec.n = *options.n_override;
        for (int r = 0; r < replications; ++r) {
            RngStream gen(seed, substream({kPurposeGenerate, static_cast<std::uint64_t>(r)}));
            SimDataset sim = generate(gen_spec, gen, options.reading);
            char name[64];
            std::snprintf(name, sizeof name, "data_rep%04d.csv", r);
            write_file((fs::path(out_dir) / name).string(), dataset_csv(sim.data));

            AnalysisConfig cfg;
            cfg.treatment = "t";
            cfg.mediator = "m";
            cfg.outcome = "y";
            cfg.z = "z";
            cfg.covariates = spec.mediator_covariates;
            cfg.z_predictors = spec.z_predictors;
            cfg.z_kind = spec.z_kind;
            cfg.method = "both";
            cfg.k_imputations = options.k_imputations;
            cfg.quadrature_order = options.quadrature_order;
            cfg.rho_values = result.summary.rho_grid;
            cfg.seed = replication_analysis_seed(seed, r);
            cfg.se_method = "none";
            std::snprintf(name, sizeof name, "config_rep%04d.json", r);
            write_file((fs::path(out_dir) / name).string(), cfg.to_json_string());
        }
    }
    if (!result.summary.valid) {
        std::cerr << "warning: " << result.summary.failures << " of " << replications
                  << " replications failed (> 2%); summary flagged invalid\n";
    }
    std::cout << "wrote " << out_dir << "/replications.csv, summary.json\n";
    return kExitOk;
}

int cmd_bounds(const std::vector<double>& rho1c, const std::vector<double>& rho0c,
               const std::string& input, const std::string& config_path,
               const std::string& aux_flag) {
    nlohmann::ordered_json out;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    std::vector<std::pair<double, double>> pairs;

    if (!rho1c.empty() || !rho0c.empty()) {
        if (rho1c.size() != rho0c.size()) {
            throw std::invalid_argument("--rho1c and --rho0c must be paired");
        }
        for (std::size_t i = 0; i < rho1c.size(); ++i) {
            pairs.emplace_back(rho1c[i], rho0c[i]);
            RhoInterval iv = rho_bounds(rho1c[i], rho0c[i]);
            per.push_back({{"rho_1c", rho1c[i]},
                           {"rho_0c", rho0c[i]},
                           {"interval", {iv.lower, iv.upper}}});
        }
    } else {
        if (input.empty() || config_path.empty()) {
            throw std::invalid_argument(
                "bounds: provide either --rho1c/--rho0c pairs or --input with --config");
        }
        AnalysisConfig cfg = AnalysisConfig::from_json_file(config_path);
        if (!aux_flag.empty()) {
            cfg.aux.clear();
            std::istringstream in(aux_flag);
            std::string tok;
            while (std::getline(in, tok, ',')) {
                if (!tok.empty()) cfg.aux.push_back(tok);
            }
        }
        if (cfg.aux.empty()) {
            throw std::invalid_argument("bounds: no auxiliary columns given");
        }
        Dataset data = load_dataset(read_csv(input), cfg);
        auto z_pred = data.columns(cfg.effective_z_predictors());
        for (const auto& aux_name : cfg.aux) {
            auto [r1c, r0c] = aux_correlations(data, z_pred, data.column(aux_name));
            pairs.emplace_back(r1c, r0c);
            RhoInterval iv = rho_bounds(r1c, r0c);
            per.push_back({{"aux", aux_name},
                           {"rho_1c", r1c},
                           {"rho_0c", r0c},
                           {"interval", {iv.lower, iv.upper}}});
        }
    }

    RhoInterval intersection = rho_bounds_multi(pairs);
    out["per_covariate"] = per;
    out["intersection"] = {intersection.lower, intersection.upper};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighting-based causal mediation analysis with sensitivity analysis "
                 "for a post-treatment confounder"};
    app.require_subcommand(1);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Sensitivity analysis on a CSV dataset");
    std::string input, config_path, out_dir = "out";
    analyze->add_option("--input", input, "input CSV")->required();
    analyze->add_option("--config", config_path, "analysis config JSON")->required();
    analyze->add_option("--out", out_dir, "output directory");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo study for one scenario");
    std::string scenario, rho_grid_flag;
    int replications = 1000, n_override = 0, k = 25, order = 10, bootstrap_b = 200;
    std::uint64_t seed = 12345;
    long truth_n = 0;
    bool true_rho_only = false, emit_csv = false, with_se = false, literal_outcome = false;
    simulate->add_option("scenario", scenario, "scenario id (1-6, 7a, 7b, 8-12)")->required();
    simulate->add_option("--replications", replications, "number of replications");
    simulate->add_option("--seed", seed, "master seed");
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--n", n_override, "override the scenario sample size");
    simulate->add_option("--rho-grid", rho_grid_flag, "evaluation grid LO:HI:COUNT");
    simulate->add_flag("--true-rho-only", true_rho_only, "evaluate at the true rho only");
    simulate->add_flag("--emit-csv", emit_csv, "write each replication's dataset + config");
    simulate->add_flag("--se", with_se, "compute standard errors at the true rho");
    simulate->add_option("--k", k, "imputations per estimate");
    simulate->add_option("--order", order, "Gauss-Hermite order");
    simulate->add_option("--b", bootstrap_b, "bootstrap resamples for SEs");
    simulate->add_option("--truth", truth_n, "also evaluate true effects on this many units");
    simulate->add_flag("--literal-outcome", literal_outcome,
                       "generate the outcome equation exactly as printed");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Feasible rho interval from auxiliaries");
    std::vector<double> rho1c, rho0c;
    std::string aux_flag;
    bounds->add_option("--rho1c", rho1c, "partial correlation of z and C in arm 1");
    bounds->add_option("--rho0c", rho0c, "partial correlation of z and C in arm 0");
    bounds->add_option("--input", input, "input CSV");
    bounds->add_option("--config", config_path, "analysis config JSON");
    bounds->add_option("--aux", aux_flag, "comma-separated auxiliary columns");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(analyze)) {
            return cmd_analyze(input, config_path, out_dir);
        }
        if (app.got_subcommand(simulate)) {
            return cmd_simulate(scenario, replications, seed, out_dir, n_override,
                                true_rho_only, rho_grid_flag, emit_csv, with_se, k, order,
                                bootstrap_b, truth_n, literal_outcome);
        }
        if (app.got_subcommand(bounds)) {
            return cmd_bounds(rho1c, rho0c, input, config_path, aux_flag);
        }
    } catch (const SchemaError& e) {
        print_schema_error(e);
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
