#include "fastbkmr/kernel.hpp"

#include <cmath>

namespace fastbkmr {

namespace {

// Pairwise squared distances scaled per column by w_l, as one matrix
// identity: D = s_a 1' + 1 s_b' - 2 (za W) zb'.
Eigen::MatrixXd weighted_sqdist(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb,
                                const Eigen::VectorXd& w) {
    const Eigen::MatrixXd zaw = za * w.asDiagonal();
    Eigen::MatrixXd d = -2.0 * zaw * zb.transpose();
    const Eigen::VectorXd sa = za.array().square().matrix() * w;
    const Eigen::VectorXd sb = zb.array().square().matrix() * w;
    d.colwise() += sa;
    d.rowwise() += sb.transpose();
    return d.cwiseMax(0.0);
}

}  // namespace

GramMatrix gram_isotropic(const Eigen::MatrixXd& z, double rho, double exponent,
                          double jitter) {
    if (!(rho > 0.0)) throw DomainError("gram_isotropic: rho must be > 0");
    const double e = exponent > 0.0 ? exponent : 2.0 * static_cast<double>(z.cols());
    const double inv_scale = std::pow(rho, -e);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(z.cols(), inv_scale);
    GramMatrix g;
    g.m = (-weighted_sqdist(z, z, w)).array().exp();
    g.m.diagonal().setOnes();
    g.m.diagonal().array() += jitter;
    g.m = 0.5 * (g.m + g.m.transpose()).eval();
    g.jitter = jitter;
    return g;
}

GramMatrix gram_ard(const Eigen::MatrixXd& z, const Eigen::VectorXd& r, double jitter) {
    if (r.size() != z.cols()) throw DomainError("gram_ard: r length must equal q");
    if ((r.array() < 0.0).any()) throw DomainError("gram_ard: r_j must be >= 0");
    GramMatrix g;
    g.m = (-weighted_sqdist(z, z, r)).array().exp();
    g.m.diagonal().setOnes();
    g.m.diagonal().array() += jitter;
    g.m = 0.5 * (g.m + g.m.transpose()).eval();
    g.jitter = jitter;
    return g;
}

Eigen::MatrixXd gram_cross_isotropic(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb,
                                     double rho, double exponent) {
    if (!(rho > 0.0)) throw DomainError("gram_cross_isotropic: rho must be > 0");
    const double e = exponent > 0.0 ? exponent : 2.0 * static_cast<double>(za.cols());
    const double inv_scale = std::pow(rho, -e);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(za.cols(), inv_scale);
    return (-weighted_sqdist(za, zb, w)).array().exp();
}

Eigen::MatrixXd gram_cross_ard(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb,
                               const Eigen::VectorXd& r) {
    if ((r.array() < 0.0).any()) throw DomainError("gram_cross_ard: r_j must be >= 0");
    return (-weighted_sqdist(za, zb, r)).array().exp();
}

VMatrix::VMatrix(const GramMatrix& k, double lambda, double scale)
    : lambda_(lambda), scale_(scale), n_(k.n()) {
    if (!(lambda >= 0.0)) throw DomainError("v_matrix: lambda must be >= 0");
    if (!(scale > 0.0)) throw DomainError("v_matrix: scale must be > 0");
    Eigen::MatrixXd v = lambda * k.m;
    v.diagonal().array() += 1.0;
    llt_.compute(v);
    if (llt_.info() != Eigen::Success) {
        throw NumericalError("v_matrix: Cholesky factorization of I + lambda K failed (lambda=" +
                             std::to_string(lambda) + ", n=" + std::to_string(n_) + ")");
    }
}

Eigen::VectorXd VMatrix::solve(const Eigen::VectorXd& b) const {
    return llt_.solve(b) / scale_;
}

Eigen::MatrixXd VMatrix::solve(const Eigen::MatrixXd& b) const {
    return llt_.solve(b) / scale_;
}

double VMatrix::logdet() const {
    const double base =
        2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    return base + static_cast<double>(n_) * std::log(scale_);
}

double VMatrix::quad(const Eigen::VectorXd& u) const {
    return u.dot(solve(u));
}

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                           const Eigen::VectorXd& noise) {
    const Eigen::Index n = mean.size();
    Eigen::MatrixXd c = 0.5 * (cov + cov.transpose());
    const double scale = std::max(1.0, c.diagonal().cwiseAbs().maxCoeff());
    double extra = 0.0;
    for (int attempt = 0; attempt < 5; ++attempt) {
        Eigen::MatrixXd cj = c;
        if (extra > 0.0) cj.diagonal().array() += extra;
        Eigen::LLT<Eigen::MatrixXd> llt(cj);
        if (llt.info() == Eigen::Success) {
            return mean + llt.matrixL() * noise;
        }
        extra = (extra == 0.0) ? 1e-12 * scale : extra * 100.0;
    }
    throw NumericalError("mvn_sample: covariance factorization failed after jitter escalation (n=" +
                         std::to_string(n) + ")");
}

}  // namespace fastbkmr
