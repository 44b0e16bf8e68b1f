#pragma once

#include <string>
#include <vector>

#include "medsens/confounder.hpp"
#include "medsens/estimators.hpp"
#include "medsens/simulation.hpp"

namespace medsens {

// Machine-readable outputs for the CLI. All writers return the full file
// content; the CLI performs the single write.

std::string initial_json(const EffectEstimate& initial,
                         const std::vector<std::string>& warnings);

// one row per rho x method, sorted by (method, rho) ascending
std::string sensitivity_csv(
    const std::vector<std::pair<std::string, SensitivityResult>>& by_method);

std::string summary_json(const std::vector<std::pair<std::string, SensitivityResult>>& by_method,
                         const RhoInterval& rho_range, const std::vector<std::string>& warnings);

std::string replications_csv(const std::string& scenario,
                             const std::vector<ReplicationRow>& rows);

std::string mc_summary_json(const MonteCarloSummary& summary);

void write_file(const std::string& path, const std::string& content);

}  // namespace medsens
