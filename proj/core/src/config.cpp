#include "medsens/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "medsens/errors.hpp"

namespace medsens {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where,
                 std::vector<SchemaIssue>& issues) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            issues.push_back({0, where + it.key(), "unknown configuration key"});
        }
    }
}

}  // namespace

void AnalysisConfig::validate() const {
    std::vector<SchemaIssue> issues;
    auto bad = [&](const std::string& field, const std::string& why) {
        issues.push_back({0, field, why});
    };
    if (treatment.empty()) bad("columns.treatment", "must name a column");
    if (mediator.empty()) bad("columns.mediator", "must name a column");
    if (outcome.empty()) bad("columns.outcome", "must name a column");
    if (method != "imputation" && method != "integration" && method != "both") {
        bad("method", "must be imputation, integration, or both");
    }
    if (k_imputations < 2) bad("k_imputations", "must be >= 2");
    if (quadrature_order < 2 || quadrature_order > 64) {
        bad("quadrature_order", "must lie in [2, 64]");
    }
    for (double r : rho_values) {
        if (!(r >= -1.0 && r <= 1.0)) {
            bad("rho.values", "entries must lie in [-1, 1]");
            break;
        }
    }
    if (rho_values.empty() && rho_grid_points < 2) bad("rho.n_grid", "must be >= 2");
    if (bootstrap_b < 50) bad("bootstrap_b", "must be >= 50");
    if (!(ci_level > 0.0 && ci_level < 1.0)) bad("ci_level", "must lie in (0,1)");
    if (se_method != "bootstrap" && se_method != "taylor" && se_method != "none") {
        bad("se_method", "must be bootstrap, taylor, or none");
    }
    if (within_se_method != "bootstrap" && within_se_method != "taylor") {
        bad("within_se_method", "must be bootstrap or taylor");
    }
    if (within_b < 50) bad("within_b", "must be >= 50");
    if (z.empty() && (method == "imputation" || method == "integration" || method == "both")) {
        // sensitivity analysis without a z column is impossible; the naive
        // initial estimate alone does not need this config
        bad("columns.z", "sensitivity analysis requires a z column");
    }
    if (covariates.empty()) bad("columns.covariates", "must list at least one covariate");
    if (!issues.empty()) {
        throw SchemaError("invalid analysis configuration", std::move(issues));
    }
}

AnalysisConfig AnalysisConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("config is not valid JSON", {{0, "(config)", e.what()}});
    }

    std::vector<SchemaIssue> issues;
    expect_keys(j,
                {"columns", "z_kind", "method", "k_imputations", "quadrature_order", "rho",
                 "bootstrap_b", "ci_level", "seed", "se_method", "within_se_method",
                 "within_b"},
                "", issues);

    AnalysisConfig cfg;
    try {
        if (j.contains("columns")) {
            const json& c = j["columns"];
            expect_keys(c,
                        {"treatment", "mediator", "outcome", "z", "covariates",
                         "z_predictors", "aux"},
                        "columns.", issues);
            cfg.treatment = c.value("treatment", cfg.treatment);
            cfg.mediator = c.value("mediator", cfg.mediator);
            cfg.outcome = c.value("outcome", cfg.outcome);
            cfg.z = c.value("z", cfg.z);
            cfg.covariates = c.value("covariates", cfg.covariates);
            cfg.z_predictors = c.value("z_predictors", cfg.z_predictors);
            cfg.aux = c.value("aux", cfg.aux);
        }
        std::string kind = j.value("z_kind", "continuous");
        if (kind != "continuous" && kind != "binary") {
            issues.push_back({0, "z_kind", "must be continuous or binary"});
        }
        cfg.z_kind = kind == "binary" ? ZKind::binary : ZKind::continuous;
        cfg.method = j.value("method", cfg.method);
        cfg.k_imputations = j.value("k_imputations", cfg.k_imputations);
        cfg.quadrature_order = j.value("quadrature_order", cfg.quadrature_order);
        if (j.contains("rho")) {
            const json& r = j["rho"];
            expect_keys(r, {"values", "n_grid"}, "rho.", issues);
            if (r.contains("values")) cfg.rho_values = r["values"].get<std::vector<double>>();
            cfg.rho_grid_points = r.value("n_grid", cfg.rho_grid_points);
        }
        cfg.bootstrap_b = j.value("bootstrap_b", cfg.bootstrap_b);
        cfg.ci_level = j.value("ci_level", cfg.ci_level);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.se_method = j.value("se_method", cfg.se_method);
        cfg.within_se_method = j.value("within_se_method", cfg.within_se_method);
        cfg.within_b = j.value("within_b", cfg.within_b);
    } catch (const json::exception& e) {
        throw SchemaError("config has a mistyped field", {{0, "(config)", e.what()}});
    }
    if (!issues.empty()) {
        throw SchemaError("invalid analysis configuration", std::move(issues));
    }
    cfg.validate();
    return cfg;
}

AnalysisConfig AnalysisConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open config file " + path, {{0, "(config)", "unreadable"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_string(buffer.str());
}

std::string AnalysisConfig::to_json_string() const {
    nlohmann::ordered_json c;
    c["treatment"] = treatment;
    c["mediator"] = mediator;
    c["outcome"] = outcome;
    if (!z.empty()) c["z"] = z;
    c["covariates"] = covariates;
    if (!z_predictors.empty()) c["z_predictors"] = z_predictors;
    if (!aux.empty()) c["aux"] = aux;

    nlohmann::ordered_json j;
    j["columns"] = c;
    j["z_kind"] = z_kind == ZKind::binary ? "binary" : "continuous";
    j["method"] = method;
    j["k_imputations"] = k_imputations;
    j["quadrature_order"] = quadrature_order;
    nlohmann::ordered_json r;
    if (!rho_values.empty()) r["values"] = rho_values;
    r["n_grid"] = rho_grid_points;
    j["rho"] = r;
    j["bootstrap_b"] = bootstrap_b;
    j["ci_level"] = ci_level;
    j["seed"] = seed;
    j["se_method"] = se_method;
    j["within_se_method"] = within_se_method;
    j["within_b"] = within_b;
    return j.dump(2) + "\n";
}

}  // namespace medsens
