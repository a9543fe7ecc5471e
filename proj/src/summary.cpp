#include "fastbkmr/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fastbkmr/threading.hpp"

namespace fastbkmr {

Eigen::VectorXd predict_h(const PosteriorDraw& draw, const Eigen::MatrixXd& z_train,
                          const Eigen::MatrixXd& z_star, KernelMode mode, Rng* rng,
                          double iso_exponent, double jitter) {
    if (draw.h.size() != z_train.rows()) {
        throw DomainError("predict_h: draw carries h at a different site count");
    }
    GramMatrix ktt;
    Eigen::MatrixXd kts;  // train x star
    if (mode == KernelMode::isotropic) {
        ktt = gram_isotropic(z_train, draw.rho, iso_exponent, jitter);
        kts = gram_cross_isotropic(z_train, z_star, draw.rho, iso_exponent);
    } else {
        ktt = gram_ard(z_train, draw.r, jitter);
        kts = gram_cross_ard(z_train, z_star, draw.r);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(ktt.m);
    double extra = jitter;
    while (llt.info() != Eigen::Success && extra < 1e-2) {
        extra *= 100.0;
        Eigen::MatrixXd bumped = ktt.m;
        bumped.diagonal().array() += extra;
        llt.compute(bumped);
    }
    if (llt.info() != Eigen::Success) {
        throw NumericalError("predict_h: training kernel factorization failed after jitter escalation");
    }
    const Eigen::MatrixXd alpha = llt.solve(kts);       // K_tt^{-1} K_ts
    const Eigen::VectorXd mean = alpha.transpose() * draw.h;
    if (rng == nullptr) return mean;

    const double tau = draw.lambda * draw.sigma2;
    Eigen::MatrixXd kss;
    if (mode == KernelMode::isotropic) {
        kss = gram_cross_isotropic(z_star, z_star, draw.rho, iso_exponent);
    } else {
        kss = gram_cross_ard(z_star, z_star, draw.r);
    }
    const Eigen::MatrixXd cov = tau * (kss - kts.transpose() * alpha);
    return mvn_sample(mean, cov, rng->normal_vector(z_star.rows()));
}

double weighted_quantile(const Eigen::VectorXd& values, const Eigen::VectorXd& weights, double u) {
    if (values.size() == 0) throw DomainError("weighted_quantile: empty sample");
    if (values.size() != weights.size()) throw DomainError("weighted_quantile: size mismatch");
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    const double total = weights.sum();
    if (!(total > 0.0)) throw DomainError("weighted_quantile: nonpositive total weight");
    double acc = 0.0;
    for (int idx : order) {
        acc += weights[idx];
        if (acc >= u * total) return values[idx];
    }
    return values[order.back()];
}

Eigen::VectorXd make_grid(const Eigen::VectorXd& observed, int points) {
    if (points < 1) throw DomainError("make_grid: empty grid");
    if (observed.size() < 2) throw DomainError("make_grid: needs at least two observed values");
    Eigen::VectorXd sorted = observed;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(sorted.size());
    const double lo = weighted_quantile(sorted, w, 0.01);
    const double hi = weighted_quantile(sorted, w, 0.99);
    if (points == 1) return Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
    return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

namespace {

Eigen::VectorXd fixed_profile(const Eigen::MatrixXd& z_obs, double fix) {
    Eigen::VectorXd profile(z_obs.cols());
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(z_obs.rows());
    for (Eigen::Index c = 0; c < z_obs.cols(); ++c) {
        profile[c] = weighted_quantile(z_obs.col(c), w, fix);
    }
    return profile;
}

}  // namespace

Eigen::MatrixXd zstar_univariate(const Eigen::MatrixXd& z_obs, int j, const Eigen::VectorXd& grid,
                                 double fix) {
    if (grid.size() == 0) throw DomainError("zstar_univariate: empty grid");
    if (j < 1 || j > z_obs.cols()) throw DomainError("zstar_univariate: exposure index out of range");
    const Eigen::VectorXd profile = fixed_profile(z_obs, fix);
    Eigen::MatrixXd z_star(grid.size(), z_obs.cols());
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
        z_star.row(g) = profile.transpose();
        z_star(g, j - 1) = grid[g];
    }
    return z_star;
}

Eigen::MatrixXd zstar_bivariate(const Eigen::MatrixXd& z_obs, int i, int j,
                                const Eigen::VectorXd& grid_i, const Eigen::VectorXd& grid_j,
                                double fix) {
    if (grid_i.size() == 0 || grid_j.size() == 0) throw DomainError("zstar_bivariate: empty grid");
    if (i < 1 || i > z_obs.cols() || j < 1 || j > z_obs.cols() || i == j) {
        throw DomainError("zstar_bivariate: bad exposure pair");
    }
    const Eigen::VectorXd profile = fixed_profile(z_obs, fix);
    Eigen::MatrixXd z_star(grid_i.size() * grid_j.size(), z_obs.cols());
    Eigen::Index row = 0;
    for (Eigen::Index a = 0; a < grid_i.size(); ++a) {
        for (Eigen::Index b = 0; b < grid_j.size(); ++b, ++row) {
            z_star.row(row) = profile.transpose();
            z_star(row, i - 1) = grid_i[a];
            z_star(row, j - 1) = grid_j[b];
        }
    }
    return z_star;
}

std::vector<Eigen::MatrixXd> subset_exposures(const std::vector<ChainOutput>& outputs,
                                              const Eigen::MatrixXd& z_full) {
    std::vector<Eigen::MatrixXd> subs;
    subs.reserve(outputs.size());
    for (const auto& o : outputs) {
        Eigen::MatrixXd z(o.site_indices.size(), z_full.cols());
        for (size_t i = 0; i < o.site_indices.size(); ++i) {
            const int idx = o.site_indices[i];
            if (idx < 0 || idx >= z_full.rows()) {
                throw DataError("subset_exposures: site index outside the dataset");
            }
            z.row(static_cast<Eigen::Index>(i)) = z_full.row(idx);
        }
        subs.push_back(std::move(z));
    }
    return subs;
}

std::vector<Eigen::MatrixXd> predict_h_means(const std::vector<ChainOutput>& outputs,
                                             const std::vector<Eigen::MatrixXd>& z_subs,
                                             const Eigen::MatrixXd& z_star, double iso_exponent,
                                             double jitter, int jobs) {
    if (outputs.size() != z_subs.size()) throw DomainError("predict_h_means: size mismatch");
    std::vector<Eigen::MatrixXd> means(outputs.size());
    // Flatten (chain, draw) pairs for the worker pool.
    std::vector<std::pair<int, int>> tasks;
    for (size_t k = 0; k < outputs.size(); ++k) {
        means[k].resize(outputs[k].n_draws(), z_star.rows());
        for (Eigen::Index i = 0; i < outputs[k].n_draws(); ++i) {
            tasks.emplace_back(static_cast<int>(k), static_cast<int>(i));
        }
    }
    parallel_for(static_cast<int>(tasks.size()), jobs, [&](int t) {
        const auto [k, i] = tasks[t];
        means[k].row(i) = predict_h(outputs[k].draws[i], z_subs[k], z_star,
                                    outputs[k].kernel_mode, nullptr, iso_exponent, jitter)
                              .transpose();
    });
    return means;
}

std::vector<CombinedPosterior> combine_h_pointwise(const std::vector<ChainOutput>& outputs,
                                                   const std::vector<Eigen::MatrixXd>& z_subs,
                                                   const Eigen::MatrixXd& z_star,
                                                   const CombineOptions& opts, double iso_exponent,
                                                   double jitter, int jobs) {
    check_config_match(outputs);
    const std::vector<Eigen::MatrixXd> means =
        predict_h_means(outputs, z_subs, z_star, iso_exponent, jitter, jobs);
    std::vector<CombinedPosterior> points(z_star.rows());
    parallel_for(static_cast<int>(z_star.rows()), jobs, [&](int s) {
        std::vector<Eigen::VectorXd> samples;
        samples.reserve(outputs.size());
        for (const auto& m : means) samples.push_back(m.col(s));
        points[s] = combine_scalar(samples, opts);
    });
    return points;
}

Eigen::VectorXd combined_h_at(const std::vector<ChainOutput>& outputs,
                              const std::vector<Eigen::MatrixXd>& z_subs,
                              const Eigen::MatrixXd& z_eval, const CombineOptions& opts,
                              double iso_exponent, double jitter, int jobs) {
    const std::vector<CombinedPosterior> points =
        combine_h_pointwise(outputs, z_subs, z_eval, opts, iso_exponent, jitter, jobs);
    Eigen::VectorXd h(points.size());
    for (size_t s = 0; s < points.size(); ++s) h[static_cast<Eigen::Index>(s)] = points[s].mean_scalar();
    return h;
}

UnivariateSurface surface_univariate(const std::vector<ChainOutput>& outputs,
                                     const Eigen::MatrixXd& z_obs, int exposure_j,
                                     int grid_points, double fix, const CombineOptions& opts,
                                     double iso_exponent, double jitter, int jobs) {
    UnivariateSurface s;
    s.exposure = exposure_j;
    s.grid = make_grid(z_obs.col(exposure_j - 1), grid_points);
    const Eigen::MatrixXd z_star = zstar_univariate(z_obs, exposure_j, s.grid, fix);
    const std::vector<Eigen::MatrixXd> z_subs = subset_exposures(outputs, z_obs);
    const std::vector<CombinedPosterior> points =
        combine_h_pointwise(outputs, z_subs, z_star, opts, iso_exponent, jitter, jobs);
    const auto g = s.grid.size();
    s.mean.resize(g);
    s.lo95.resize(g);
    s.hi95.resize(g);
    s.lo50.resize(g);
    s.hi50.resize(g);
    for (Eigen::Index i = 0; i < g; ++i) {
        const auto& cp = points[i];
        s.mean[i] = cp.mean_scalar();
        s.lo95[i] = weighted_quantile(cp.atoms.col(0), cp.weights, 0.025);
        s.hi95[i] = weighted_quantile(cp.atoms.col(0), cp.weights, 0.975);
        s.lo50[i] = weighted_quantile(cp.atoms.col(0), cp.weights, 0.25);
        s.hi50[i] = weighted_quantile(cp.atoms.col(0), cp.weights, 0.75);
    }
    return s;
}

BivariateSurface surface_bivariate(const std::vector<ChainOutput>& outputs,
                                   const Eigen::MatrixXd& z_obs, int exposure_i, int exposure_j,
                                   int grid_points, double fix, const CombineOptions& opts,
                                   double iso_exponent, double jitter, int jobs) {
    BivariateSurface s;
    s.exposure_i = exposure_i;
    s.exposure_j = exposure_j;
    s.grid_i = make_grid(z_obs.col(exposure_i - 1), grid_points);
    s.grid_j = make_grid(z_obs.col(exposure_j - 1), grid_points);
    const Eigen::MatrixXd z_star =
        zstar_bivariate(z_obs, exposure_i, exposure_j, s.grid_i, s.grid_j, fix);
    const std::vector<Eigen::MatrixXd> z_subs = subset_exposures(outputs, z_obs);
    const std::vector<CombinedPosterior> points =
        combine_h_pointwise(outputs, z_subs, z_star, opts, iso_exponent, jitter, jobs);
    const auto gi = s.grid_i.size();
    const auto gj = s.grid_j.size();
    s.mean.resize(gi, gj);
    s.lo95.resize(gi, gj);
    s.hi95.resize(gi, gj);
    Eigen::Index row = 0;
    for (Eigen::Index a = 0; a < gi; ++a) {
        for (Eigen::Index b = 0; b < gj; ++b, ++row) {
            const auto& cp = points[row];
            s.mean(a, b) = cp.mean_scalar();
            s.lo95(a, b) = weighted_quantile(cp.atoms.col(0), cp.weights, 0.025);
            s.hi95(a, b) = weighted_quantile(cp.atoms.col(0), cp.weights, 0.975);
        }
    }
    return s;
}

Eigen::VectorXd inclusion_probabilities(const std::map<std::string, CombinedPosterior>& combined,
                                        int q) {
    if (q < 1) throw DomainError("inclusion_probabilities: q must be >= 1");
    Eigen::VectorXd pip(q);
    for (int j = 1; j <= q; ++j) {
        const auto it = combined.find("eta_" + std::to_string(j));
        if (it == combined.end()) {
            throw DomainError(
                "inclusion_probabilities: ModeError (no eta functionals; ard mode required)");
        }
        pip[j - 1] = std::clamp(it->second.mean_scalar(), 0.0, 1.0);
    }
    return pip;
}

Calibration calibration_regression(const Eigen::VectorXd& h_true, const Eigen::VectorXd& h_hat) {
    if (h_true.size() != h_hat.size()) throw DomainError("calibration_regression: length mismatch");
    if (h_true.size() < 3) throw DomainError("calibration_regression: needs length >= 3");
    const double mx = h_hat.mean();
    const double my = h_true.mean();
    const Eigen::ArrayXd dx = h_hat.array() - mx;
    const Eigen::ArrayXd dy = h_true.array() - my;
    const double sxx = (dx * dx).sum();
    if (!(sxx > 0.0)) throw DataError("calibration_regression: DegenerateRegressor");
    const double sxy = (dx * dy).sum();
    Calibration c;
    c.gamma1 = sxy / sxx;
    c.gamma0 = my - c.gamma1 * mx;
    const double sst = (dy * dy).sum();
    const double ssr = (dy - c.gamma1 * dx).square().sum();
    c.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    return c;
}

void write_surface_csv(const std::string& path, const UnivariateSurface& s) {
    std::ofstream f(path);
    if (!f) throw DataError("write_surface_csv: cannot open " + path);
    f << "grid_value,mean,lo95,hi95\n";
    char buf[128];
    for (Eigen::Index i = 0; i < s.grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", s.grid[i], s.mean[i],
                      s.lo95[i], s.hi95[i]);
        f << buf;
    }
}

void write_surface_csv(const std::string& path, const BivariateSurface& s) {
    std::ofstream f(path);
    if (!f) throw DataError("write_surface_csv: cannot open " + path);
    f << "grid_value_i,grid_value_j,mean,lo95,hi95\n";
    char buf[160];
    for (Eigen::Index a = 0; a < s.grid_i.size(); ++a) {
        for (Eigen::Index b = 0; b < s.grid_j.size(); ++b) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.grid_i[a],
                          s.grid_j[b], s.mean(a, b), s.lo95(a, b), s.hi95(a, b));
            f << buf;
        }
    }
}

}  // namespace fastbkmr
