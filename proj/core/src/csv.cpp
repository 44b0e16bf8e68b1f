#include "medsens/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "medsens/errors.hpp"

namespace medsens {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

double parse_double(const std::string& cell, bool& ok) {
    const std::string t = trim(cell);
    if (t.empty()) {
        ok = false;
        return 0.0;
    }
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    ok = end == t.c_str() + t.size() && std::isfinite(v);
    return v;
}

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        for (auto& c : cells) c = trim(c);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) {
        throw SchemaError("CSV has no header row", {{0, "(file)", "empty input"}});
    }
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open CSV file " + path, {{0, "(file)", "unreadable"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str());
}

Dataset load_dataset(const CsvTable& table, const AnalysisConfig& config) {
    std::vector<SchemaIssue> issues;

    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (!index.emplace(table.header[j], j).second) {
            issues.push_back({0, table.header[j], "duplicate column name"});
        }
    }

    // covariate pool: covariates, then z predictors, then aux, deduplicated
    std::vector<std::string> pool;
    auto add_pool = [&](const std::vector<std::string>& names) {
        for (const auto& n : names) {
            if (std::find(pool.begin(), pool.end(), n) == pool.end()) pool.push_back(n);
        }
    };
    add_pool(config.covariates);
    add_pool(config.effective_z_predictors());
    add_pool(config.aux);

    // each pool entry is either a raw column or a product token "a*b"
    struct Source {
        std::vector<std::size_t> factors;
    };
    std::vector<Source> sources(pool.size());
    auto require = [&](const std::string& name) -> long {
        auto it = index.find(name);
        if (it == index.end()) {
            issues.push_back({0, name, "column missing from CSV header"});
            return -1;
        }
        return static_cast<long>(it->second);
    };
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const std::string& token = pool[k];
        std::size_t star = token.find('*');
        if (star == std::string::npos) {
            long j = require(token);
            if (j >= 0) sources[k].factors = {static_cast<std::size_t>(j)};
        } else {
            long a = require(trim(token.substr(0, star)));
            long b = require(trim(token.substr(star + 1)));
            if (a >= 0 && b >= 0) {
                sources[k].factors = {static_cast<std::size_t>(a),
                                      static_cast<std::size_t>(b)};
            }
        }
    }
    long t_col = require(config.treatment);
    long m_col = require(config.mediator);
    long y_col = require(config.outcome);
    long z_col = config.z.empty() ? -1 : require(config.z);

    if (!issues.empty()) {
        throw SchemaError("CSV schema validation failed", std::move(issues));
    }

    const long n = static_cast<long>(table.rows.size());
    Dataset data;
    data.t.resize(n);
    data.m.resize(n);
    data.y.resize(n);
    data.x.resize(n, static_cast<Eigen::Index>(pool.size()));
    data.x_names = pool;
    if (z_col >= 0) data.z = Eigen::VectorXd(n);
    data.z_kind = config.z_kind;

    auto cell_at = [&](long row, std::size_t col) -> const std::string& {
        static const std::string empty;
        const auto& cells = table.rows[row];
        return col < cells.size() ? cells[col] : empty;
    };
    auto take_double = [&](long row, std::size_t col) {
        bool ok = false;
        double v = parse_double(cell_at(row, col), ok);
        if (!ok) {
            issues.push_back({row + 1, table.header[col], "not a finite number"});
        }
        return v;
    };
    auto take_binary = [&](long row, std::size_t col) {
        const std::string& cell = cell_at(row, col);
        const std::string t = cell;
        if (t == "0") return 0;
        if (t == "1") return 1;
        issues.push_back({row + 1, table.header[col], "must be literal 0 or 1"});
        return 0;
    };

    for (long i = 0; i < n; ++i) {
        data.t(i) = take_binary(i, static_cast<std::size_t>(t_col));
        data.m(i) = take_binary(i, static_cast<std::size_t>(m_col));
        data.y(i) = take_double(i, static_cast<std::size_t>(y_col));
        if (z_col >= 0) {
            double zv = take_double(i, static_cast<std::size_t>(z_col));
            if (config.z_kind == ZKind::binary && zv != 0.0 && zv != 1.0) {
                issues.push_back({i + 1, config.z, "binary z must be literal 0 or 1"});
            }
            (*data.z)(i) = zv;
        }
        for (std::size_t k = 0; k < sources.size(); ++k) {
            double v = 1.0;
            for (std::size_t f : sources[k].factors) {
                v *= take_double(i, f);
            }
            data.x(i, static_cast<Eigen::Index>(k)) = v;
        }
    }
    if (!issues.empty()) {
        throw SchemaError("CSV contains invalid cells", std::move(issues));
    }
    data.validate();
    return data;
}

std::string dataset_csv(const Dataset& data) {
    std::ostringstream out;
    out << "t,m,y";
    if (data.z) out << ",z";
    for (const auto& name : data.x_names) out << "," << name;
    out << "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << data.t(i) << "," << data.m(i) << "," << format_double(data.y(i));
        if (data.z) out << "," << format_double((*data.z)(i));
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            out << "," << format_double(data.x(i, j));
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace medsens
