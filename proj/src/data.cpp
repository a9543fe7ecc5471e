#include "fastbkmr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fastbkmr {

void Dataset::validate() const {
    const Eigen::Index rows = y.size();
    if (rows < 1) throw DataError("Dataset: empty outcome vector");
    if (x.rows() != rows && !(x.size() == 0 && x.rows() == 0)) {
        throw DataError("Dataset: confounder row count does not match outcome");
    }
    if (z.rows() != rows) throw DataError("Dataset: exposure row count does not match outcome");
    if (z.cols() < 1) throw DataError("Dataset: at least one exposure column is required");
    if (!y.allFinite() || !x.allFinite() || !z.allFinite()) {
        throw DataError("Dataset: non-finite entries");
    }
}

double ModelConfig::pi_for(Eigen::Index j) const {
    if (pi.size() == 0) return 0.5;
    if (pi.size() == 1) return pi[0];
    return pi[j];
}

void ModelConfig::validate(Eigen::Index q) const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw DomainError(std::string("ModelConfig: ") + name + " must be > 0");
    };
    positive(a_lambda, "a_lambda");
    positive(b_lambda, "b_lambda");
    positive(alpha_sigma, "alpha_sigma");
    positive(b_sigma, "b_sigma");
    positive(rho_shape, "rho_shape");
    positive(rho_rate, "rho_rate");
    positive(slab_shape, "slab_shape");
    positive(slab_rate, "slab_rate");
    if (pi.size() != 0 && pi.size() != 1 && pi.size() != q) {
        throw DomainError("ModelConfig: pi must be scalar or length q");
    }
    for (Eigen::Index j = 0; j < pi.size(); ++j) {
        if (!(pi[j] >= 0.0 && pi[j] <= 1.0)) throw DomainError("ModelConfig: pi_j must lie in [0,1]");
    }
    if (iters <= 0 || burnin < 0 || thin < 1) throw DomainError("ModelConfig: bad chain lengths");
    if (iters <= burnin) throw DomainError("ModelConfig: iters must exceed burnin");
    if (!(jitter >= 0.0)) throw DomainError("ModelConfig: jitter must be >= 0");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Returns false for empty cells or non-numeric text ("NA", "nan", ...).
bool parse_cell(const std::string& raw, double* out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;
    *out = v;
    return true;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 MissingPolicy policy, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open " + path);
    if (schema.outcome.empty()) throw DataError("load_csv: schema names no outcome column");
    if (schema.exposures.empty()) throw DataError("load_csv: schema names no exposure columns");

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: empty file " + path);
    const std::vector<std::string> header_cells = split_line(line);
    std::vector<std::string> header(header_cells.size());
    for (size_t i = 0; i < header_cells.size(); ++i) header[i] = trim(header_cells[i]);

    auto column_index = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("load_csv: MissingColumn(\"" + name + "\")");
        return static_cast<int>(it - header.begin());
    };

    const int y_col = column_index(schema.outcome);
    std::vector<int> x_cols, z_cols;
    for (const auto& c : schema.confounders) x_cols.push_back(column_index(c));
    for (const auto& c : schema.exposures) z_cols.push_back(column_index(c));

    std::vector<double> y_vals;
    std::vector<std::vector<double>> x_rows, z_rows;
    int dropped = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        bool ok = true;
        double yv = 0.0;
        std::vector<double> xv(x_cols.size()), zv(z_cols.size());
        auto get = [&](int col, double* out) {
            if (col >= static_cast<int>(cells.size())) return false;
            return parse_cell(cells[col], out);
        };
        ok = ok && get(y_col, &yv);
        for (size_t j = 0; ok && j < x_cols.size(); ++j) ok = get(x_cols[j], &xv[j]);
        for (size_t j = 0; ok && j < z_cols.size(); ++j) ok = get(z_cols[j], &zv[j]);
        if (!ok) {
            if (policy == MissingPolicy::error) {
                throw DataError("load_csv: missing or non-numeric cell at line " +
                                std::to_string(line_no));
            }
            ++dropped;
            continue;
        }
        y_vals.push_back(yv);
        x_rows.push_back(std::move(xv));
        z_rows.push_back(std::move(zv));
    }
    if (y_vals.empty()) throw DataError("load_csv: zero usable rows in " + path);

    const Eigen::Index n = static_cast<Eigen::Index>(y_vals.size());
    Dataset ds;
    ds.y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
    ds.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
    ds.z.resize(n, static_cast<Eigen::Index>(z_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < ds.x.cols(); ++j) ds.x(i, j) = x_rows[i][j];
        for (Eigen::Index j = 0; j < ds.z.cols(); ++j) ds.z(i, j) = z_rows[i][j];
    }
    ds.validate();
    if (report) report->dropped_rows = dropped;
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds, const CsvSchema& schema) {
    if (static_cast<Eigen::Index>(schema.confounders.size()) != ds.p() ||
        static_cast<Eigen::Index>(schema.exposures.size()) != ds.q()) {
        throw DataError("write_csv: schema does not match dataset shape");
    }
    std::ofstream out(path);
    if (!out) throw DataError("write_csv: cannot open " + path);
    out << schema.outcome;
    for (const auto& c : schema.confounders) out << ',' << c;
    for (const auto& c : schema.exposures) out << ',' << c;
    out << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        put(ds.y[i]);
        for (Eigen::Index j = 0; j < ds.p(); ++j) {
            out << ',';
            put(ds.x(i, j));
        }
        for (Eigen::Index j = 0; j < ds.q(); ++j) {
            out << ',';
            put(ds.z(i, j));
        }
        out << '\n';
    }
}

namespace {

// Population SD column scaling in place; returns (mean, sd) per column.
void scale_columns(Eigen::MatrixXd& m, Eigen::VectorXd& means, Eigen::VectorXd& sds,
                   const char* what) {
    const auto n = static_cast<double>(m.rows());
    means.resize(m.cols());
    sds.resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double mu = m.col(j).mean();
        const double var = (m.col(j).array() - mu).square().sum() / n;
        const double sd = std::sqrt(var);
        if (!(sd > 0.0)) {
            throw DataError(std::string("standardize: DegenerateColumn in ") + what +
                            " column " + std::to_string(j + 1));
        }
        m.col(j) = (m.col(j).array() - mu) / sd;
        means[j] = mu;
        sds[j] = sd;
    }
}

}  // namespace

std::pair<Dataset, ScalingRecord> standardize(const Dataset& ds, bool include_x) {
    ds.validate();
    Dataset out = ds;
    ScalingRecord rec;
    scale_columns(out.z, rec.z_mean, rec.z_sd, "exposure");
    if (include_x && out.p() > 0) {
        scale_columns(out.x, rec.x_mean, rec.x_sd, "confounder");
    }
    return {std::move(out), std::move(rec)};
}

}  // namespace fastbkmr
