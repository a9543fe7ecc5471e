#pragma once

#include <map>
#include <string>
#include <vector>

#include "fastbkmr/data.hpp"
#include "fastbkmr/transport.hpp"

namespace fastbkmr {

// Flat key = value configuration file ('#' comments, lists comma-separated).
std::map<std::string, std::string> read_config_file(const std::string& path);

// Parser for the shared config keys; CLI flags override file values.
struct FitConfig {
    CsvSchema schema;
    ModelConfig model;
    MissingPolicy missing_policy = MissingPolicy::error;
    bool standardize_x = false;
    double splits_exponent = 0.5;
    int min_subset_size = 32;
    bool with_replacement = false;
    CombineOptions combine;
    std::vector<int> surfaces;                    // univariate exposures (1-based)
    std::vector<std::pair<int, int>> bivariate;   // exposure pairs
    int grid_points = 21;
    double fix_quantile = 0.5;
};

FitConfig parse_fit_config(const std::map<std::string, std::string>& kv);

// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
int run_cli(int argc, const char* const* argv);

}  // namespace fastbkmr
