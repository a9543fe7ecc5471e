#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastbkmr/errors.hpp"
#include "fastbkmr/sampler.hpp"

namespace fastbkmr {

// Weighted atoms in R^d representing an empirical posterior measure.
struct AtomicMeasure {
    Eigen::MatrixXd atoms;    // m x d
    Eigen::VectorXd weights;  // sums to 1

    Eigen::Index size() const { return atoms.rows(); }
    Eigen::Index dim() const { return atoms.cols(); }

    // Throws DomainError unless weights are nonnegative, sum to 1 within
    // 1e-10, and all atoms are finite.
    void validate() const;

    static AtomicMeasure from_samples(const Eigen::MatrixXd& atoms);
    static AtomicMeasure from_samples(const Eigen::VectorXd& scalars);
};

struct CombineDiagnostics {
    std::string method;
    int iterations = 0;
    double objective = 0.0;
    double epsilon = 0.0;
    bool converged = true;
};

// Aggregated posterior for one functional: atoms with simplex weights
// (renormalized on output) plus solver metadata.
struct CombinedPosterior {
    Eigen::MatrixXd atoms;
    Eigen::VectorXd weights;
    CombineDiagnostics diag;

    double mean_scalar() const;  // weighted mean, 1-D atoms
};

// Wasserstein-2 distance via the transport linear program (successive
// shortest augmenting paths with node potentials) with squared Euclidean
// cost. Throws NumericalError (TooLarge) above 500x500 atoms and
// DomainError on dimension mismatch.
double w2_exact(const AtomicMeasure& mu, const AtomicMeasure& nu);

// Entropy-regularized barycenter with fixed support: iterative Bregman
// projections in the log domain. weights empty = uniform 1/K. epsilon <= 0
// selects 0.01 x median pairwise squared cost. Non-convergence is flagged
// in diagnostics, not an error.
CombinedPosterior barycenter_sinkhorn(const std::vector<AtomicMeasure>& measures,
                                      const Eigen::MatrixXd& support, double epsilon,
                                      const Eigen::VectorXd& weights = Eigen::VectorXd(),
                                      int max_iters = 5000, double tol = 1e-8);

// Exact 1-D barycenter by quantile averaging: atom m is the mean across
// subsets of the (m - 1/2)/n_out empirical quantile. n_out <= 0 uses the
// largest subset sample size.
Eigen::VectorXd barycenter_1d(const std::vector<Eigen::VectorXd>& samples, int n_out = 0);

// Weiszfeld iteration for the W2 geometric median over quantile functions
// (1-D Wasserstein space is flat, so this is exact up to discretization).
Eigen::VectorXd geometric_median_1d(const std::vector<Eigen::VectorXd>& samples, int n_out = 0,
                                    int max_iters = 200, double tol = 1e-6);

// General-dimension W2 geometric median: Weiszfeld reweighting over
// Sinkhorn barycenter solves on the pooled-atom support. K = 2 returns the
// midpoint barycenter (any point on the geodesic minimizes). Throws
// DomainError for K < 2.
CombinedPosterior geometric_median_w2(const std::vector<AtomicMeasure>& measures,
                                      double epsilon = 0.0, int max_iters = 100,
                                      double tol = 1e-6);

enum class CombineMethod { barycenter, median };

struct CombineOptions {
    CombineMethod method = CombineMethod::barycenter;
    double epsilon = 0.0;  // Sinkhorn regularization; <= 0 selects the default
    int n_out = 0;
    bool joint_beta = false;  // combine the beta vector jointly via Sinkhorn
    int sinkhorn_max_iters = 5000;
    double sinkhorn_tol = 1e-8;
};

// Scalar combination: 1-D quantile barycenter (default) or quantile-space
// Weiszfeld median. K = 1 reproduces the input's empirical measure.
CombinedPosterior combine_scalar(const std::vector<Eigen::VectorXd>& samples,
                                 const CombineOptions& opts);

// Names of the scalar functionals a chain output carries
// (beta_j, sigma2, lambda, rho or r_j, eta_j).
std::vector<std::string> scalar_functional_names(const ChainOutput& ref);

// Draw sequence of one named functional.
Eigen::VectorXd extract_scalar(const ChainOutput& out, const std::string& name);

// Throws DataError (ConfigMismatch) unless all chains share one fingerprint
// (p, q, kernel mode, chain lengths).
void check_config_match(const std::vector<ChainOutput>& outputs);

// Combines every scalar functional across subset chains; joint_beta adds a
// "beta" entry with the p-dimensional Sinkhorn (or Weiszfeld) combination
// over pooled atoms.
std::map<std::string, CombinedPosterior> combine(const std::vector<ChainOutput>& outputs,
                                                 const CombineOptions& opts);

// Combined-posterior file: `functional,atom,weight` rows (one value column
// per atom dimension) plus a diagnostics sidecar writer.
void write_combined_csv(const std::string& path, const std::string& functional,
                        const CombinedPosterior& cp);
CombinedPosterior read_combined_csv(const std::string& path);
void write_combine_diagnostics_csv(const std::string& path,
                                   const std::map<std::string, CombinedPosterior>& combined);

}  // namespace fastbkmr
