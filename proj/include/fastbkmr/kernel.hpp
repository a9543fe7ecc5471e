#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fastbkmr/errors.hpp"

namespace fastbkmr {

// Symmetric kernel matrix with its stabilizing diagonal jitter.
struct GramMatrix {
    Eigen::MatrixXd m;
    double jitter = 0.0;

    Eigen::Index n() const { return m.rows(); }
};

// Rescaled squared exponential: entry (i,j) = exp(-||z_i - z_j||^2 / rho^exponent),
// exponent defaulting to the literal 2q. Throws DomainError for rho <= 0.
GramMatrix gram_isotropic(const Eigen::MatrixXd& z, double rho, double exponent = 0.0,
                          double jitter = 1e-8);

// Component-weighted kernel: entry (i,j) = exp(-sum_l r_l (z_il - z_jl)^2).
// Throws DomainError for negative r_l.
GramMatrix gram_ard(const Eigen::MatrixXd& z, const Eigen::VectorXd& r, double jitter = 1e-8);

// Cross-covariance blocks used by the GP predictive extension.
Eigen::MatrixXd gram_cross_isotropic(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb,
                                     double rho, double exponent = 0.0);
Eigen::MatrixXd gram_cross_ard(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb,
                               const Eigen::VectorXd& r);

// Factorization of scale * (I + lambda K). Downstream conditionals consume V
// only through solves, log-determinants and quadratic forms; no inverse is
// ever formed.
class VMatrix {
  public:
    // Throws DomainError for lambda <= 0 (lambda == 0 is allowed as the
    // documented limit V = scale * I) and NumericalError when Cholesky
    // fails even after the jitter already present in `k`.
    VMatrix(const GramMatrix& k, double lambda, double scale = 1.0);

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

    // log|scale * (I + lambda K)|
    double logdet() const;

    // u' V^{-1} u
    double quad(const Eigen::VectorXd& u) const;

    double lambda() const { return lambda_; }
    double scale() const { return scale_; }
    Eigen::Index n() const { return n_; }

  private:
    Eigen::LLT<Eigen::MatrixXd> llt_;  // factors I + lambda K
    double lambda_;
    double scale_;
    Eigen::Index n_;
};

// Draws from N(mean, cov) via Cholesky with escalating diagonal jitter;
// cov is symmetrized first. Throws NumericalError when factorization keeps
// failing. `noise` is a standard normal vector of matching length.
Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                           const Eigen::VectorXd& noise);

}  // namespace fastbkmr
