#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medsens/estimators.hpp"

namespace medsens {

// Analysis configuration for the CLI: column mapping plus estimator
// settings. Serialized as a single JSON document; every default mirrors the
// published defaults (K=25, order 10, grid 20, level 0.95).
struct AnalysisConfig {
    // column mapping
    std::string treatment = "t";
    std::string mediator = "m";
    std::string outcome = "y";
    std::string z;  // empty: no post-treatment confounder column
    std::vector<std::string> covariates;    // mediator-model covariates
    std::vector<std::string> z_predictors;  // empty: same as covariates
    std::vector<std::string> aux;           // auxiliary baseline covariates

    ZKind z_kind = ZKind::continuous;
    std::string method = "integration";  // imputation | integration | both
    int k_imputations = 25;
    int quadrature_order = 10;
    std::vector<double> rho_values;  // explicit grid; empty: bounds-from-aux
    int rho_grid_points = 20;
    int bootstrap_b = 200;
    double ci_level = 0.95;
    std::uint64_t seed = 12345;
    std::string se_method = "bootstrap";         // bootstrap | taylor | none
    std::string within_se_method = "bootstrap";  // bootstrap | taylor
    int within_b = 100;

    std::vector<std::string> effective_z_predictors() const {
        return z_predictors.empty() ? covariates : z_predictors;
    }

    // value/range validation; throws SchemaError listing each problem
    void validate() const;

    static AnalysisConfig from_json_string(const std::string& text);
    static AnalysisConfig from_json_file(const std::string& path);
    std::string to_json_string() const;
};

}  // namespace medsens
