#include "medsens/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "medsens/csv.hpp"

namespace medsens {

namespace {

using nlohmann::ordered_json;

ordered_json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

ordered_json estimate_json(const EffectEstimate& est) {
    ordered_json j;
    j["method"] = method_name(est.method);
    if (est.rho) j["rho"] = *est.rho;
    if (est.k_imputations) j["k_imputations"] = *est.k_imputations;
    j["nie"] = est.nie;
    j["nie_se"] = finite_or_null(est.nie_se);
    j["nie_ci"] = std::isfinite(est.nie_se)
                      ? ordered_json{est.nie_ci.lower, est.nie_ci.upper}
                      : ordered_json(nullptr);
    j["nde"] = est.nde;
    j["nde_se"] = finite_or_null(est.nde_se);
    j["nde_ci"] = std::isfinite(est.nde_se)
                      ? ordered_json{est.nde_ci.lower, est.nde_ci.upper}
                      : ordered_json(nullptr);
    j["ci_level"] = est.ci_level;
    j["max_weight"] = finite_or_null(est.max_weight);
    j["effective_sample_size"] = finite_or_null(est.effective_sample_size);
    return j;
}

// significance verdict of a CI against zero: -1 below, +1 above, 0 spans
int ci_verdict(const Interval& ci) {
    if (ci.upper < 0.0) return -1;
    if (ci.lower > 0.0) return 1;
    return 0;
}

struct EffectVerdict {
    bool have_bounds = false;
    Interval bounds;
    bool initial_inside = false;
    bool have_significance = false;
    bool significance_flips = false;
};

EffectVerdict effect_verdict(double initial_point, const Interval& initial_ci,
                             bool initial_has_ci, bool is_nie,
                             const std::vector<const SensitivityResult*>& results) {
    EffectVerdict v;
    for (const SensitivityResult* res : results) {
        const Interval& b = is_nie ? res->nie_bounds : res->nde_bounds;
        if (!std::isfinite(b.lower)) continue;
        if (!v.have_bounds) {
            v.bounds = b;
            v.have_bounds = true;
        } else {
            v.bounds.lower = std::min(v.bounds.lower, b.lower);
            v.bounds.upper = std::max(v.bounds.upper, b.upper);
        }
    }
    if (v.have_bounds) {
        v.initial_inside =
            initial_point >= v.bounds.lower && initial_point <= v.bounds.upper;
    }
    if (initial_has_ci) {
        int initial_sig = ci_verdict(initial_ci);
        for (const SensitivityResult* res : results) {
            for (const auto& entry : res->grid) {
                if (!entry.estimate || !std::isfinite(entry.estimate->nie_se)) continue;
                const Interval& ci =
                    is_nie ? entry.estimate->nie_ci : entry.estimate->nde_ci;
                v.have_significance = true;
                if (ci_verdict(ci) != initial_sig) v.significance_flips = true;
            }
        }
    }
    return v;
}

}  // namespace

std::string initial_json(const EffectEstimate& initial,
                         const std::vector<std::string>& warnings) {
    ordered_json j;
    j["initial"] = estimate_json(initial);
    j["warnings"] = warnings;
    return j.dump(2) + "\n";
}

std::string sensitivity_csv(
    const std::vector<std::pair<std::string, SensitivityResult>>& by_method) {
    struct Row {
        std::string method;
        double rho;
        const EffectEstimate* est;
        const std::string* error;
    };
    std::vector<Row> rows;
    for (const auto& [name, result] : by_method) {
        for (const auto& entry : result.grid) {
            rows.push_back({name, entry.rho, entry.estimate ? &*entry.estimate : nullptr,
                            &entry.error});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.method != b.method) return a.method < b.method;
        return a.rho < b.rho;
    });

    std::ostringstream out;
    out << "method,rho,nie,nie_se,nie_ci_lo,nie_ci_hi,nde,nde_se,nde_ci_lo,nde_ci_hi,error\n";
    auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const Row& r : rows) {
        out << r.method << "," << format_double(r.rho) << ",";
        if (r.est) {
            out << cell(r.est->nie) << "," << cell(r.est->nie_se) << ","
                << cell(r.est->nie_ci.lower) << "," << cell(r.est->nie_ci.upper) << ","
                << cell(r.est->nde) << "," << cell(r.est->nde_se) << ","
                << cell(r.est->nde_ci.lower) << "," << cell(r.est->nde_ci.upper) << ",";
        } else {
            out << ",,,,,,,,";
        }
        out << (r.error ? *r.error : std::string()) << "\n";
    }
    return out.str();
}

std::string summary_json(
    const std::vector<std::pair<std::string, SensitivityResult>>& by_method,
    const RhoInterval& rho_range, const std::vector<std::string>& warnings) {
    ordered_json j;
    j["rho_range"] = {rho_range.lower, rho_range.upper};

    std::vector<const SensitivityResult*> results;
    for (const auto& [name, result] : by_method) results.push_back(&result);
    const SensitivityResult* first = results.empty() ? nullptr : results.front();

    ordered_json methods = ordered_json::object();
    for (const auto& [name, result] : by_method) {
        ordered_json m;
        m["nie_bounds"] = {finite_or_null(result.nie_bounds.lower),
                           finite_or_null(result.nie_bounds.upper)};
        m["nde_bounds"] = {finite_or_null(result.nde_bounds.lower),
                           finite_or_null(result.nde_bounds.upper)};
        int failed = 0;
        for (const auto& entry : result.grid) {
            if (!entry.estimate) ++failed;
        }
        m["grid_size"] = result.grid.size();
        m["failed_rhos"] = failed;
        methods[name] = m;
    }
    j["methods"] = methods;

    if (first) {
        j["initial"] = estimate_json(first->initial);
        bool has_ci = std::isfinite(first->initial.nie_se);
        for (bool is_nie : {true, false}) {
            EffectVerdict v = effect_verdict(
                is_nie ? first->initial.nie : first->initial.nde,
                is_nie ? first->initial.nie_ci : first->initial.nde_ci, has_ci, is_nie,
                results);
            ordered_json e;
            e["adjusted_bounds"] =
                v.have_bounds
                    ? ordered_json{v.bounds.lower, v.bounds.upper}
                    : ordered_json(nullptr);
            e["initial_inside_bounds"] =
                v.have_bounds ? ordered_json(v.initial_inside) : ordered_json(nullptr);
            e["significance_flips"] = v.have_significance
                                          ? ordered_json(v.significance_flips)
                                          : ordered_json(nullptr);
            j[is_nie ? "nie" : "nde"] = e;
        }
    }
    j["warnings"] = warnings;
    return j.dump(2) + "\n";
}

std::string replications_csv(const std::string& scenario,
                             const std::vector<ReplicationRow>& rows) {
    std::ostringstream out;
    out << "scenario,replication,estimator,rho,nie,nde,nie_se,nde_se,error\n";
    auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const ReplicationRow& r : rows) {
        out << scenario << "," << r.replication << "," << method_name(r.method) << ","
            << cell(r.rho) << "," << cell(r.nie) << "," << cell(r.nde) << ","
            << cell(r.nie_se) << "," << cell(r.nde_se) << "," << r.error << "\n";
    }
    return out.str();
}

std::string mc_summary_json(const MonteCarloSummary& summary) {
    ordered_json j;
    j["scenario"] = summary.scenario;
    j["replications"] = summary.replications;
    j["n"] = summary.n;
    j["failures"] = summary.failures;
    j["valid"] = summary.valid;
    j["at_rho"] = summary.at_rho;
    j["rho_grid"] = summary.rho_grid;
    if (summary.truth) {
        j["true_nie"] = summary.truth->nie;
        j["true_nde"] = summary.truth->nde;
    }
    ordered_json est = ordered_json::object();
    for (const auto& [name, col] : summary.estimators) {
        ordered_json c;
        c["mean_nie"] = finite_or_null(col.mean_nie);
        c["mean_nde"] = finite_or_null(col.mean_nde);
        c["mean_nie_se"] = finite_or_null(col.mean_nie_se);
        c["mean_nde_se"] = finite_or_null(col.mean_nde_se);
        c["sd_nie"] = finite_or_null(col.sd_nie);
        c["sd_nde"] = finite_or_null(col.sd_nde);
        c["nie_bounds"] = std::isfinite(col.nie_bounds.lower)
                              ? ordered_json{col.nie_bounds.lower, col.nie_bounds.upper}
                              : ordered_json(nullptr);
        c["nde_bounds"] = std::isfinite(col.nde_bounds.lower)
                              ? ordered_json{col.nde_bounds.lower, col.nde_bounds.upper}
                              : ordered_json(nullptr);
        c["replications_used"] = col.n_ok;
        est[name] = c;
    }
    j["estimators"] = est;
    return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write file " + path);
    }
    out << content;
}

}  // namespace medsens
