#pragma once

#include <string>
#include <vector>

#include "medsens/config.hpp"
#include "medsens/estimators.hpp"

namespace medsens {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Plain comma-separated values with a mandatory header row; no quoting (the
// schemas here are purely numeric apart from the header).
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

// Builds a Dataset from a table under the config's column mapping.
// Covariate/z-predictor/aux tokens of the form "a*b" become product columns.
// Every offending cell is collected into one SchemaError.
Dataset load_dataset(const CsvTable& table, const AnalysisConfig& config);

// Full-precision (round-trippable) serialization of a dataset, column order:
// t, m, y, z (when present), covariate pool.
std::string dataset_csv(const Dataset& data);

double parse_double(const std::string& cell, bool& ok);

// shortest representation that parses back to the same double
std::string format_double(double v);

}  // namespace medsens
