#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastbkmr/data.hpp"
#include "fastbkmr/kernel.hpp"
#include "fastbkmr/partition.hpp"
#include "fastbkmr/rng.hpp"

namespace fastbkmr {

// Weighted sum of squares (y - x beta)' V^{-1} (y - x beta) on the sketched
// scale; the sqrt(scale_c) factors cancel against V's scale, so the value
// is invariant to tempering.
double weighted_ss(const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                   const Eigen::VectorXd& beta, const VMatrix& v);

// Exact draw from beta | sigma2, lambda, r: N(V_beta X'V^{-1}Y, sigma2 V_beta)
// with V_beta = (X'V^{-1}X)^{-1}. Throws NumericalError (RankDeficient) when
// X'V^{-1}X is not positive definite.
Eigen::VectorXd sample_beta(Rng& rng, const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                            const VMatrix& v, double sigma2);

// Conjugate error-variance update: draws the precision 1/sigma2 from
// Gamma(alpha_sigma + n/2, b_sigma + wss/2) and returns its reciprocal.
// cfg.sigma2_literal_gamma instead returns a Gamma draw for sigma2 itself
// (the conditional as literally written). n == 0 falls back to the prior.
double sample_sigma2(Rng& rng, double wss, Eigen::Index n, const ModelConfig& cfg);

// Exact draw of the exposure-response values at the subset sites, returned
// on the function-value scale (the sketch scaling is removed). Mean
// lambda K V^{-1}(Y - X beta); covariance symmetrized before factorization.
Eigen::VectorXd sample_h(Rng& rng, const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                         const Eigen::VectorXd& beta, const GramMatrix& gram, const VMatrix& v,
                         double sigma2, double lambda);

// log f(lambda | beta, r, Y) up to an additive constant:
// -1/2 log|V| - WSS/(2 sigma2) + log Gamma(lambda | a_lambda, b_lambda).
// |V| includes the documented n_k log(scale_c) sketch term.
double lambda_log_target(double lambda, double logdet_v, double wss, double sigma2,
                         const ModelConfig& cfg);

// Gamma(rho | rho_shape, rho_rate) analogue for the isotropic bandwidth.
double rho_log_target(double rho, double logdet_v, double wss, double sigma2,
                      const ModelConfig& cfg);

struct ChainDiagnostics {
    double lambda_accept_rate = 0.0;
    double rho_accept_rate = 0.0;
    Eigen::VectorXd r_accept_rate;
    double lambda_step = 0.0;
    double seconds = 0.0;
};

// Retained draws from one chain plus provenance and a config fingerprint
// used to detect mismatched combinations.
struct ChainOutput {
    std::vector<PosteriorDraw> draws;
    ChainDiagnostics diag;
    int subset_id = 0;  // 0 = full data
    int n_k = 0;
    std::uint64_t seed = 0;
    double scale_c = 1.0;
    std::vector<int> site_indices;
    int p = 0, q = 0;
    KernelMode kernel_mode = KernelMode::isotropic;
    int iters = 0, burnin = 0, thin = 0;

    Eigen::Index n_draws() const { return static_cast<Eigen::Index>(draws.size()); }
};

// One MCMC chain on a (possibly sketched) subset. Update sweep:
// beta -> sigma2 -> lambda (MH) -> bandwidth/selection MH -> h, with h
// sampled only on retained sweeps (no other update reads it). The chain is
// a deterministic function of (data, config, seed).
class GibbsChain {
  public:
    GibbsChain(const SketchedSubset& data, const ModelConfig& cfg, std::uint64_t seed);

    // One update sweep without the h draw.
    void sweep();

    // h draw consistent with the current hyperparameters.
    Eigen::VectorXd draw_h();

    const PosteriorDraw& state() const { return state_; }
    const GramMatrix& gram() const { return gram_; }
    const VMatrix& v() const { return *v_; }
    long iteration() const { return iteration_; }
    double current_wss() const;

    double lambda_acceptance() const;
    double rho_acceptance() const;
    Eigen::VectorXd r_acceptance() const;
    double lambda_step() const { return lambda_step_; }

  private:
    void rebuild_kernel();
    void update_beta();
    void update_sigma2();
    void update_lambda();
    void update_rho();
    void update_r(int j);
    void adapt(double* step, long accepts, long window_proposals);

    SketchedSubset data_;
    ModelConfig cfg_;
    PosteriorDraw state_;
    Rng rng_;
    GramMatrix gram_;
    std::unique_ptr<VMatrix> v_;
    long iteration_ = 0;
    bool in_burnin_ = true;

    double lambda_step_ = 0.5, rho_step_ = 0.5, r_step_ = 0.5;
    long lambda_props_ = 0, lambda_accepts_ = 0, lambda_window_accepts_ = 0;
    long rho_props_ = 0, rho_accepts_ = 0, rho_window_accepts_ = 0;
    Eigen::VectorXd r_props_, r_accepts_;

    friend ChainOutput run_chain(const SketchedSubset&, const ModelConfig&, std::uint64_t);
    friend class ChainTestAccess;
};

// Runs the full sweep schedule and retains post-burn-in thinned draws;
// N = floor((iters - burnin)/thin). Numerical failures are annotated with
// the iteration number.
ChainOutput run_chain(const SketchedSubset& data, const ModelConfig& cfg, std::uint64_t seed);
ChainOutput run_chain(const Dataset& ds, const ModelConfig& cfg, std::uint64_t seed);

// Draw-file round trip (CSV with a `# subset=...` provenance comment).
void write_draws_csv(const std::string& path, const ChainOutput& out);
ChainOutput read_draws_csv(const std::string& path);

}  // namespace fastbkmr
