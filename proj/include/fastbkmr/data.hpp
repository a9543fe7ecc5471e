#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastbkmr/errors.hpp"

namespace fastbkmr {

// Observed sample: outcome y (n), confounders x (n x p, p may be 0),
// exposures z (n x q). Immutable after construction; shared read-only by
// parallel subset chains.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return x.cols(); }
    Eigen::Index q() const { return z.cols(); }

    // Throws DataError on inconsistent row counts, non-finite entries,
    // n < 1 or q < 1.
    void validate() const;
};

enum class KernelMode { isotropic, ard };

// Prior and chain-length configuration for one model fit.
struct ModelConfig {
    KernelMode kernel_mode = KernelMode::isotropic;

    // Gamma prior on lambda = tau / sigma^2.
    double a_lambda = 1.0;
    double b_lambda = 0.2;

    // Prior on the error variance: 1/sigma^2 ~ Gamma(alpha_sigma, b_sigma)
    // by default; sigma2_literal_gamma = true draws sigma^2 itself from the
    // Gamma conditional as written.
    double alpha_sigma = 1.0;
    double b_sigma = 0.1;
    bool sigma2_literal_gamma = false;

    // Gamma prior on the isotropic bandwidth rho.
    double rho_shape = 2.0;
    double rho_rate = 1.0;

    // ard mode: inclusion prior probabilities (broadcast if size 1) and the
    // slab density f1 = Gamma(slab_shape, slab_rate) over r_j.
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(1, 0.5);
    double slab_shape = 2.0;
    double slab_rate = 4.0;

    // sqrt(K) sketch scaling per the modified subset model.
    bool temper = true;

    int iters = 2000;
    int burnin = 1000;
    int thin = 5;

    // Isotropic kernel exponent: entry = exp(-||dz||^2 / rho^iso_exponent).
    // 0 selects the literal default 2q.
    double iso_exponent = 0.0;

    double jitter = 1e-8;

    // Sampler controls. update_* = false freezes a block (used by the
    // validation suites); init_* = NaN/empty selects data-driven
    // initialization.
    bool update_beta = true;
    bool update_sigma2 = true;
    bool update_lambda = true;
    bool update_kernel = true;
    double init_lambda = std::numeric_limits<double>::quiet_NaN();
    double init_sigma2 = std::numeric_limits<double>::quiet_NaN();
    double init_rho = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd init_beta;  // empty = least squares
    Eigen::VectorXd init_r;     // empty = draw from prior

    double iso_exponent_for(Eigen::Index q) const {
        return iso_exponent > 0.0 ? iso_exponent : 2.0 * static_cast<double>(q);
    }

    // Inclusion prior for exposure j (pi broadcast if scalar).
    double pi_for(Eigen::Index j) const;

    // Throws DomainError when shapes/rates are non-positive, pi is outside
    // [0, 1], or iters <= burnin / thin < 1.
    void validate(Eigen::Index q) const;
};

// One joint posterior state. r/eta are used in ard mode, rho in isotropic
// mode. h holds function-scale values over the draw's site set.
struct PosteriorDraw {
    Eigen::VectorXd beta;
    double sigma2 = 1.0;
    double lambda = 1.0;
    double rho = 1.0;
    Eigen::VectorXd r;
    Eigen::VectorXi eta;
    Eigen::VectorXd h;
};

// Per-column centering/scaling retained for back-transformation.
struct ScalingRecord {
    Eigen::VectorXd z_mean, z_sd;
    Eigen::VectorXd x_mean, x_sd;  // empty unless confounders were scaled
};

struct CsvSchema {
    std::string outcome;
    std::vector<std::string> confounders;
    std::vector<std::string> exposures;
};

enum class MissingPolicy { error, drop };

struct LoadReport {
    int dropped_rows = 0;
};

// Reads a comma-separated file (header row, decimal point, UTF-8) and
// assigns columns by role. Rows with missing or non-numeric cells are
// rejected per `policy`. Throws DataError on absent columns, zero usable
// rows, or bad cells under policy = error.
Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 MissingPolicy policy = MissingPolicy::error,
                 LoadReport* report = nullptr);

// Writes y, x, z back out under the schema's column names.
void write_csv(const std::string& path, const Dataset& ds, const CsvSchema& schema);

// Centers each exposure column to mean 0 and scales to SD 1 (population SD,
// divide by n). include_x additionally standardizes confounder columns.
// Throws DataError (DegenerateColumn) when a scaled column is constant.
std::pair<Dataset, ScalingRecord> standardize(const Dataset& ds, bool include_x = false);

}  // namespace fastbkmr
