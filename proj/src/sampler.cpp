#include "fastbkmr/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fastbkmr {

namespace {

double log_gamma_density(double x, double shape, double rate) {
    // Unnormalized: (shape-1) log x - rate x.
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - rate * x;
}

constexpr int kAdaptWindow = 50;
constexpr double kTargetAcceptance = 0.35;

}  // namespace

double weighted_ss(const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                   const Eigen::VectorXd& beta, const VMatrix& v) {
    Eigen::VectorXd resid = y_t;
    if (x_t.cols() > 0) resid -= x_t * beta;
    return v.quad(resid);
}

Eigen::VectorXd sample_beta(Rng& rng, const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                            const VMatrix& v, double sigma2) {
    const Eigen::Index p = x_t.cols();
    if (p < 1) throw DomainError("sample_beta: requires p >= 1 confounders");
    const Eigen::MatrixXd vinv_x = v.solve(x_t);
    const Eigen::MatrixXd vb_inv = x_t.transpose() * vinv_x;
    Eigen::LLT<Eigen::MatrixXd> llt(vb_inv);
    if (llt.info() != Eigen::Success || !vb_inv.allFinite()) {
        throw NumericalError("sample_beta: RankDeficient (X'V^{-1}X not positive definite)");
    }
    const Eigen::VectorXd mean = llt.solve(x_t.transpose() * v.solve(y_t));
    const Eigen::MatrixXd v_beta =
        llt.solve(Eigen::MatrixXd::Identity(p, p));
    return mvn_sample(mean, sigma2 * v_beta, rng.normal_vector(p));
}

double sample_sigma2(Rng& rng, double wss, Eigen::Index n, const ModelConfig& cfg) {
    if (!std::isfinite(wss) || wss < 0.0) {
        throw NumericalError("sample_sigma2: non-finite weighted sum of squares");
    }
    const double shape = cfg.alpha_sigma + 0.5 * static_cast<double>(n);
    const double rate = cfg.b_sigma + 0.5 * wss;
    if (cfg.sigma2_literal_gamma) return rng.gamma(shape, rate);
    const double precision = rng.gamma(shape, rate);
    return 1.0 / precision;
}

Eigen::VectorXd sample_h(Rng& rng, const Eigen::VectorXd& y_t, const Eigen::MatrixXd& x_t,
                         const Eigen::VectorXd& beta, const GramMatrix& gram, const VMatrix& v,
                         double sigma2, double lambda) {
    const Eigen::Index n = y_t.size();
    Eigen::VectorXd resid = y_t;
    if (x_t.cols() > 0) resid -= x_t * beta;
    const double c = v.scale();
    const double root_c = std::sqrt(c);
    // Function-scale conditional: the sketched draw is sqrt(c) times this
    // one, with covariance c times larger; dividing by sqrt(c) recovers
    // mean lambda K V^{-1} resid and covariance sigma2 lambda K V^{-1} of
    // the plain subset.
    const Eigen::VectorXd mean = lambda * root_c * (gram.m * v.solve(resid));
    if (lambda * sigma2 < 1e-300) return mean;
    Eigen::MatrixXd cov = (sigma2 * lambda * c) * v.solve(gram.m);
    return mvn_sample(mean, cov, rng.normal_vector(n));
}

double lambda_log_target(double lambda, double logdet_v, double wss, double sigma2,
                         const ModelConfig& cfg) {
    if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
    return -0.5 * logdet_v - 0.5 * wss / sigma2 +
           log_gamma_density(lambda, cfg.a_lambda, cfg.b_lambda);
}

double rho_log_target(double rho, double logdet_v, double wss, double sigma2,
                      const ModelConfig& cfg) {
    if (!(rho > 0.0)) return -std::numeric_limits<double>::infinity();
    return -0.5 * logdet_v - 0.5 * wss / sigma2 +
           log_gamma_density(rho, cfg.rho_shape, cfg.rho_rate);
}

GibbsChain::GibbsChain(const SketchedSubset& data, const ModelConfig& cfg, std::uint64_t seed)
    : data_(data), cfg_(cfg), rng_(seed) {
    cfg_.validate(data_.z_sub.cols());
    if (data_.n_k < 2) throw DomainError("run_chain: subset needs n >= 2 rows");
    const Eigen::Index p = data_.x_t.cols();
    const Eigen::Index q = data_.z_sub.cols();

    // Initialization: least-squares beta, residual-variance sigma2,
    // lambda = 1, kernel parameters at prior draws/means.
    const Eigen::VectorXd y = data_.y_plain();
    const Eigen::MatrixXd x = data_.x_plain();
    if (p > 0) {
        state_.beta = cfg_.init_beta.size() == p ? cfg_.init_beta
                                                 : x.colPivHouseholderQr().solve(y).eval();
    } else {
        state_.beta.resize(0);
    }
    Eigen::VectorXd resid = p > 0 ? (y - x * state_.beta).eval() : y;
    const double rvar = resid.squaredNorm() / std::max<Eigen::Index>(1, data_.n_k - p);
    state_.sigma2 = std::isnan(cfg_.init_sigma2) ? std::max(rvar, 1e-6) : cfg_.init_sigma2;
    state_.lambda = std::isnan(cfg_.init_lambda) ? 1.0 : cfg_.init_lambda;

    if (cfg_.kernel_mode == KernelMode::isotropic) {
        state_.rho = std::isnan(cfg_.init_rho) ? cfg_.rho_shape / cfg_.rho_rate : cfg_.init_rho;
        state_.r.resize(0);
        state_.eta.resize(0);
    } else {
        state_.rho = 0.0;
        state_.r.resize(q);
        state_.eta.resize(q);
        if (cfg_.init_r.size() == q) {
            state_.r = cfg_.init_r;
            for (Eigen::Index j = 0; j < q; ++j) state_.eta[j] = state_.r[j] > 0.0 ? 1 : 0;
        } else {
            const double prior_mean = cfg_.slab_shape / cfg_.slab_rate;
            for (Eigen::Index j = 0; j < q; ++j) {
                state_.eta[j] = rng_.bernoulli(cfg_.pi_for(j)) ? 1 : 0;
                state_.r[j] = prior_mean * state_.eta[j];
            }
        }
        r_props_ = Eigen::VectorXd::Zero(q);
        r_accepts_ = Eigen::VectorXd::Zero(q);
    }
    rebuild_kernel();
}

void GibbsChain::rebuild_kernel() {
    if (cfg_.kernel_mode == KernelMode::isotropic) {
        gram_ = gram_isotropic(data_.z_sub, state_.rho,
                               cfg_.iso_exponent_for(data_.z_sub.cols()), cfg_.jitter);
    } else {
        gram_ = gram_ard(data_.z_sub, state_.r, cfg_.jitter);
    }
    v_ = std::make_unique<VMatrix>(gram_, state_.lambda, data_.scale_c);
}

double GibbsChain::current_wss() const {
    return weighted_ss(data_.y_t, data_.x_t, state_.beta, *v_);
}

void GibbsChain::update_beta() {
    if (data_.x_t.cols() < 1) return;
    state_.beta = sample_beta(rng_, data_.y_t, data_.x_t, *v_, state_.sigma2);
}

void GibbsChain::update_sigma2() {
    state_.sigma2 = sample_sigma2(rng_, current_wss(), data_.n_k, cfg_);
}

void GibbsChain::adapt(double* step, long window_accepts, long window_proposals) {
    if (!in_burnin_ || window_proposals < kAdaptWindow) return;
    const double rate = static_cast<double>(window_accepts) / static_cast<double>(window_proposals);
    *step = std::clamp(*step * std::exp(rate - kTargetAcceptance), 1e-3, 10.0);
}

void GibbsChain::update_lambda() {
    const double cur = state_.lambda;
    const double prop = cur * std::exp(lambda_step_ * rng_.normal());
    const double log_u = std::log(rng_.uniform());
    ++lambda_props_;

    const double cur_target =
        lambda_log_target(cur, v_->logdet(), current_wss(), state_.sigma2, cfg_);
    bool accepted = false;
    try {
        VMatrix v_prop(gram_, prop, data_.scale_c);
        const double prop_wss = weighted_ss(data_.y_t, data_.x_t, state_.beta, v_prop);
        const double prop_target =
            lambda_log_target(prop, v_prop.logdet(), prop_wss, state_.sigma2, cfg_);
        // log-normal proposal Jacobian: + log(prop) - log(cur)
        const double log_ratio = prop_target - cur_target + std::log(prop) - std::log(cur);
        if (std::isfinite(prop_target) && log_u <= log_ratio) {
            state_.lambda = prop;
            v_ = std::make_unique<VMatrix>(std::move(v_prop));
            accepted = true;
        }
    } catch (const NumericalError&) {
        // Proposal rejected; state unchanged.
    }
    if (accepted) {
        ++lambda_accepts_;
        ++lambda_window_accepts_;
    }
    if (lambda_props_ % kAdaptWindow == 0) {
        adapt(&lambda_step_, lambda_window_accepts_, kAdaptWindow);
        lambda_window_accepts_ = 0;
    }
}

void GibbsChain::update_rho() {
    const double cur = state_.rho;
    const double prop = cur * std::exp(rho_step_ * rng_.normal());
    const double log_u = std::log(rng_.uniform());
    ++rho_props_;

    const double cur_target =
        rho_log_target(cur, v_->logdet(), current_wss(), state_.sigma2, cfg_);
    bool accepted = false;
    try {
        const GramMatrix gram_prop = gram_isotropic(
            data_.z_sub, prop, cfg_.iso_exponent_for(data_.z_sub.cols()), cfg_.jitter);
        VMatrix v_prop(gram_prop, state_.lambda, data_.scale_c);
        const double prop_wss = weighted_ss(data_.y_t, data_.x_t, state_.beta, v_prop);
        const double prop_target =
            rho_log_target(prop, v_prop.logdet(), prop_wss, state_.sigma2, cfg_);
        const double log_ratio = prop_target - cur_target + std::log(prop) - std::log(cur);
        if (std::isfinite(prop_target) && log_u <= log_ratio) {
            state_.rho = prop;
            gram_ = gram_prop;
            v_ = std::make_unique<VMatrix>(std::move(v_prop));
            accepted = true;
        }
    } catch (const NumericalError&) {
    }
    if (accepted) {
        ++rho_accepts_;
        ++rho_window_accepts_;
    }
    if (rho_props_ % kAdaptWindow == 0) {
        adapt(&rho_step_, rho_window_accepts_, kAdaptWindow);
        rho_window_accepts_ = 0;
    }
}

void GibbsChain::update_r(int j) {
    const double pi_j = cfg_.pi_for(j);
    const int cur_eta = state_.eta[j];
    const double cur_r = state_.r[j];
    ++r_props_[j];

    // Move mix: 50% spike/slab toggle, 50% within-slab log walk (no-op when
    // the component is in the spike).
    const bool toggle = rng_.uniform() < 0.5;
    double prop_r;
    int prop_eta;
    double log_prior_ratio;
    if (toggle) {
        if (cur_eta == 0) {
            if (pi_j <= 0.0) return;  // spike pinned
            prop_r = rng_.gamma(cfg_.slab_shape, cfg_.slab_rate);
            prop_eta = 1;
            // Slab value proposed from f1, which cancels; prior odds remain.
            log_prior_ratio = std::log(pi_j) - std::log1p(-pi_j);
        } else {
            if (pi_j >= 1.0) return;  // slab pinned
            prop_r = 0.0;
            prop_eta = 0;
            log_prior_ratio = std::log1p(-pi_j) - std::log(pi_j);
        }
    } else {
        if (cur_eta == 0) return;
        prop_r = cur_r * std::exp(r_step_ * rng_.normal());
        prop_eta = 1;
        // f1 ratio plus log-walk Jacobian.
        log_prior_ratio = log_gamma_density(prop_r, cfg_.slab_shape, cfg_.slab_rate) -
                          log_gamma_density(cur_r, cfg_.slab_shape, cfg_.slab_rate) +
                          std::log(prop_r) - std::log(cur_r);
    }
    const double log_u = std::log(rng_.uniform());

    const double cur_loglik = -0.5 * v_->logdet() - 0.5 * current_wss() / state_.sigma2;
    try {
        Eigen::VectorXd r_prop = state_.r;
        r_prop[j] = prop_r;
        const GramMatrix gram_prop = gram_ard(data_.z_sub, r_prop, cfg_.jitter);
        VMatrix v_prop(gram_prop, state_.lambda, data_.scale_c);
        const double prop_wss = weighted_ss(data_.y_t, data_.x_t, state_.beta, v_prop);
        const double prop_loglik = -0.5 * v_prop.logdet() - 0.5 * prop_wss / state_.sigma2;
        const double log_ratio = prop_loglik - cur_loglik + log_prior_ratio;
        if (std::isfinite(prop_loglik) && log_u <= log_ratio) {
            state_.r[j] = prop_r;
            state_.eta[j] = prop_eta;
            gram_ = gram_prop;
            v_ = std::make_unique<VMatrix>(std::move(v_prop));
            ++r_accepts_[j];
        }
    } catch (const NumericalError&) {
    }
}

void GibbsChain::sweep() {
    ++iteration_;
    if (cfg_.update_beta) update_beta();
    if (cfg_.update_sigma2) update_sigma2();
    if (cfg_.update_lambda) update_lambda();
    if (cfg_.update_kernel) {
        if (cfg_.kernel_mode == KernelMode::isotropic) {
            update_rho();
        } else {
            for (int j = 0; j < state_.r.size(); ++j) update_r(j);
        }
    }
}

Eigen::VectorXd GibbsChain::draw_h() {
    return sample_h(rng_, data_.y_t, data_.x_t, state_.beta, gram_, *v_, state_.sigma2,
                    state_.lambda);
}

double GibbsChain::lambda_acceptance() const {
    return lambda_props_ > 0 ? static_cast<double>(lambda_accepts_) / lambda_props_ : 0.0;
}

double GibbsChain::rho_acceptance() const {
    return rho_props_ > 0 ? static_cast<double>(rho_accepts_) / rho_props_ : 0.0;
}

Eigen::VectorXd GibbsChain::r_acceptance() const {
    if (r_props_.size() == 0) return Eigen::VectorXd();
    return (r_accepts_.array() / r_props_.array().max(1.0)).matrix();
}

ChainOutput run_chain(const SketchedSubset& data, const ModelConfig& cfg, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    GibbsChain chain(data, cfg, seed);
    ChainOutput out;
    out.subset_id = data.subset_id;
    out.n_k = data.n_k;
    out.seed = seed;
    out.scale_c = data.scale_c;
    out.site_indices = data.indices;
    out.p = static_cast<int>(data.x_t.cols());
    out.q = static_cast<int>(data.z_sub.cols());
    out.kernel_mode = cfg.kernel_mode;
    out.iters = cfg.iters;
    out.burnin = cfg.burnin;
    out.thin = cfg.thin;
    out.draws.reserve((cfg.iters - cfg.burnin) / cfg.thin);

    for (int it = 1; it <= cfg.iters; ++it) {
        try {
            chain.in_burnin_ = it <= cfg.burnin;
            chain.sweep();
            if (it > cfg.burnin && (it - cfg.burnin) % cfg.thin == 0) {
                PosteriorDraw d = chain.state();
                d.h = chain.draw_h();
                out.draws.push_back(std::move(d));
            }
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (iteration " + std::to_string(it) +
                                 ", subset " + std::to_string(data.subset_id) + ")");
        }
    }
    out.diag.lambda_accept_rate = chain.lambda_acceptance();
    out.diag.rho_accept_rate = chain.rho_acceptance();
    out.diag.r_accept_rate = chain.r_acceptance();
    out.diag.lambda_step = chain.lambda_step();
    out.diag.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

ChainOutput run_chain(const Dataset& ds, const ModelConfig& cfg, std::uint64_t seed) {
    ds.validate();
    return run_chain(full_data_subset(ds), cfg, seed);
}

void write_draws_csv(const std::string& path, const ChainOutput& out) {
    std::ofstream f(path);
    if (!f) throw DataError("write_draws_csv: cannot open " + path);
    f << "# subset=" << (out.subset_id == 0 ? std::string("FULL") : std::to_string(out.subset_id))
      << " n_k=" << out.n_k << " seed=" << out.seed << " scale_c=" << out.scale_c
      << " kernel=" << (out.kernel_mode == KernelMode::isotropic ? "isotropic" : "ard")
      << " iters=" << out.iters << " burnin=" << out.burnin << " thin=" << out.thin
      << " sites=";
    for (size_t i = 0; i < out.site_indices.size(); ++i) {
        if (i) f << ';';
        f << out.site_indices[i];
    }
    f << '\n';
    f << "draw";
    for (int j = 1; j <= out.p; ++j) f << ",beta_" << j;
    f << ",sigma2,lambda";
    if (out.kernel_mode == KernelMode::isotropic) {
        f << ",rho";
    } else {
        for (int j = 1; j <= out.q; ++j) f << ",r_" << j;
        for (int j = 1; j <= out.q; ++j) f << ",eta_" << j;
    }
    for (int j = 1; j <= out.n_k; ++j) f << ",h_" << j;
    f << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << ',' << buf;
    };
    for (Eigen::Index i = 0; i < out.n_draws(); ++i) {
        const PosteriorDraw& d = out.draws[i];
        f << (i + 1);
        for (Eigen::Index j = 0; j < d.beta.size(); ++j) put(d.beta[j]);
        put(d.sigma2);
        put(d.lambda);
        if (out.kernel_mode == KernelMode::isotropic) {
            put(d.rho);
        } else {
            for (Eigen::Index j = 0; j < d.r.size(); ++j) put(d.r[j]);
            for (Eigen::Index j = 0; j < d.eta.size(); ++j) f << ',' << d.eta[j];
        }
        for (Eigen::Index j = 0; j < d.h.size(); ++j) put(d.h[j]);
        f << '\n';
    }
}

ChainOutput read_draws_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("read_draws_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# subset=", 0) != 0) {
        throw DataError("read_draws_csv: missing provenance comment in " + path);
    }
    ChainOutput out;
    {
        std::stringstream ss(line.substr(2));
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "subset") {
                out.subset_id = (val == "FULL") ? 0 : std::stoi(val);
            } else if (key == "n_k") {
                out.n_k = std::stoi(val);
            } else if (key == "seed") {
                out.seed = std::stoull(val);
            } else if (key == "scale_c") {
                out.scale_c = std::stod(val);
            } else if (key == "kernel") {
                out.kernel_mode = (val == "ard") ? KernelMode::ard : KernelMode::isotropic;
            } else if (key == "iters") {
                out.iters = std::stoi(val);
            } else if (key == "burnin") {
                out.burnin = std::stoi(val);
            } else if (key == "thin") {
                out.thin = std::stoi(val);
            } else if (key == "sites") {
                std::stringstream sv(val);
                std::string s;
                while (std::getline(sv, s, ';')) {
                    if (!s.empty()) out.site_indices.push_back(std::stoi(s));
                }
            }
        }
    }
    if (!std::getline(f, line)) throw DataError("read_draws_csv: missing header");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    int p = 0, q_r = 0, q_eta = 0, m = 0;
    for (const auto& c : cols) {
        if (c.rfind("beta_", 0) == 0) ++p;
        else if (c.rfind("r_", 0) == 0) ++q_r;
        else if (c.rfind("eta_", 0) == 0) ++q_eta;
        else if (c.rfind("h_", 0) == 0) ++m;
    }
    out.p = p;
    out.q = std::max(q_r, q_eta);
    if (out.q == 0 && out.kernel_mode == KernelMode::ard) {
        throw DataError("read_draws_csv: ard draw file without r columns");
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != cols.size()) throw DataError("read_draws_csv: ragged row in " + path);
        PosteriorDraw d;
        size_t at = 1;  // skip draw index
        d.beta.resize(p);
        for (int j = 0; j < p; ++j) d.beta[j] = vals[at++];
        d.sigma2 = vals[at++];
        d.lambda = vals[at++];
        if (out.kernel_mode == KernelMode::isotropic) {
            d.rho = vals[at++];
        } else {
            d.r.resize(out.q);
            d.eta.resize(out.q);
            for (int j = 0; j < out.q; ++j) d.r[j] = vals[at++];
            for (int j = 0; j < out.q; ++j) d.eta[j] = static_cast<int>(vals[at++]);
        }
        d.h.resize(m);
        for (int j = 0; j < m; ++j) d.h[j] = vals[at++];
        out.draws.push_back(std::move(d));
    }
    return out;
}

}  // namespace fastbkmr
