#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastbkmr/data.hpp"
#include "fastbkmr/kernel.hpp"
#include "fastbkmr/rng.hpp"
#include "fastbkmr/sampler.hpp"
#include "fastbkmr/transport.hpp"

namespace fastbkmr {

// GP predictive extension of one draw's h values to new sites under the
// prior scale tau = lambda sigma2: mean K_{*,t} K_{t,t}^{-1} h, covariance
// tau (K_{*,*} - K_{*,t} K_{t,t}^{-1} K_{t,*}). rng == nullptr gives the
// deterministic mean-only mode.
Eigen::VectorXd predict_h(const PosteriorDraw& draw, const Eigen::MatrixXd& z_train,
                          const Eigen::MatrixXd& z_star, KernelMode mode, Rng* rng = nullptr,
                          double iso_exponent = 0.0, double jitter = 1e-8);

// Weighted empirical quantile: smallest atom whose cumulative weight
// reaches u.
double weighted_quantile(const Eigen::VectorXd& values, const Eigen::VectorXd& weights, double u);

// 21-point (by default) equispaced grid spanning the central 98% of the
// observed exposure values.
Eigen::VectorXd make_grid(const Eigen::VectorXd& observed, int points = 21);

// Prediction sites for the exposure-response slices: component j sweeps the
// grid while every other component is fixed at the `fix` quantile of its
// observed values.
Eigen::MatrixXd zstar_univariate(const Eigen::MatrixXd& z_obs, int j, const Eigen::VectorXd& grid,
                                 double fix = 0.5);
Eigen::MatrixXd zstar_bivariate(const Eigen::MatrixXd& z_obs, int i, int j,
                                const Eigen::VectorXd& grid_i, const Eigen::VectorXd& grid_j,
                                double fix = 0.5);

// Reconstructs each chain's exposure submatrix from its site indices.
std::vector<Eigen::MatrixXd> subset_exposures(const std::vector<ChainOutput>& outputs,
                                              const Eigen::MatrixXd& z_full);

// Per-chain matrices of predictive means (n_draws x n_sites) at z_star.
std::vector<Eigen::MatrixXd> predict_h_means(const std::vector<ChainOutput>& outputs,
                                             const std::vector<Eigen::MatrixXd>& z_subs,
                                             const Eigen::MatrixXd& z_star,
                                             double iso_exponent = 0.0, double jitter = 1e-8,
                                             int jobs = 0);

// Pointwise combination of the h posterior across subsets on a shared site
// set; element s is the combined measure of h(z_star row s).
std::vector<CombinedPosterior> combine_h_pointwise(const std::vector<ChainOutput>& outputs,
                                                   const std::vector<Eigen::MatrixXd>& z_subs,
                                                   const Eigen::MatrixXd& z_star,
                                                   const CombineOptions& opts,
                                                   double iso_exponent = 0.0, double jitter = 1e-8,
                                                   int jobs = 0);

// Combined posterior mean of h at each z_eval row (weighted mean over the
// combined atoms of predictive means).
Eigen::VectorXd combined_h_at(const std::vector<ChainOutput>& outputs,
                              const std::vector<Eigen::MatrixXd>& z_subs,
                              const Eigen::MatrixXd& z_eval, const CombineOptions& opts,
                              double iso_exponent = 0.0, double jitter = 1e-8, int jobs = 0);

struct UnivariateSurface {
    int exposure = 0;  // 1-based
    Eigen::VectorXd grid, mean, lo95, hi95, lo50, hi50;
};

struct BivariateSurface {
    int exposure_i = 0, exposure_j = 0;  // 1-based
    Eigen::VectorXd grid_i, grid_j;
    Eigen::MatrixXd mean, lo95, hi95;
};

// Exposure-response slice for one exposure with pointwise posterior bands;
// all other exposures fixed at the `fix` quantile. Throws DomainError on an
// empty grid.
UnivariateSurface surface_univariate(const std::vector<ChainOutput>& outputs,
                                     const Eigen::MatrixXd& z_obs, int exposure_j,
                                     int grid_points, double fix, const CombineOptions& opts,
                                     double iso_exponent = 0.0, double jitter = 1e-8,
                                     int jobs = 0);

BivariateSurface surface_bivariate(const std::vector<ChainOutput>& outputs,
                                   const Eigen::MatrixXd& z_obs, int exposure_i, int exposure_j,
                                   int grid_points, double fix, const CombineOptions& opts,
                                   double iso_exponent = 0.0, double jitter = 1e-8, int jobs = 0);

// Posterior inclusion probabilities: weighted frequency of eta_j = 1 under
// the combined weights. Throws DomainError (ModeError) when the combined
// map carries no eta functionals (isotropic fits).
Eigen::VectorXd inclusion_probabilities(const std::map<std::string, CombinedPosterior>& combined,
                                        int q);

struct Calibration {
    double gamma0 = 0.0, gamma1 = 0.0, r2 = 0.0;
};

// OLS of h_true on h_hat (the Fig. 1 diagnostic): returns intercept, slope,
// and R^2. Throws DomainError for length < 3 and DataError
// (DegenerateRegressor) when h_hat has zero variance.
Calibration calibration_regression(const Eigen::VectorXd& h_true, const Eigen::VectorXd& h_hat);

void write_surface_csv(const std::string& path, const UnivariateSurface& s);
void write_surface_csv(const std::string& path, const BivariateSurface& s);

}  // namespace fastbkmr
