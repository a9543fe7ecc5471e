// Independent test oracles: brute-force and closed-form routes kept separate
// from the library implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// Monte-Carlo standard error via batch means (autocorrelation-robust).
inline double batch_means_se(const Eigen::VectorXd& draws, int batches = 50) {
    const auto n = draws.size();
    const auto per = n / batches;
    Eigen::VectorXd means(batches);
    for (int b = 0; b < batches; ++b) means[b] = draws.segment(b * per, per).mean();
    const double grand = means.mean();
    const double var = (means.array() - grand).square().sum() / (batches - 1);
    return std::sqrt(var / batches);
}

// Trapezoid-normalized CDF of exp(logf) on [lo, hi].
struct GridCdf {
    Eigen::VectorXd grid;
    Eigen::VectorXd cdf;
};

inline GridCdf normalize_on_grid(const std::function<double(double)>& logf, double lo, double hi,
                                 int points) {
    GridCdf out;
    out.grid = Eigen::VectorXd::LinSpaced(points, lo, hi);
    Eigen::VectorXd dens(points);
    double max_log = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
        dens[i] = logf(out.grid[i]);
        max_log = std::max(max_log, dens[i]);
    }
    for (int i = 0; i < points; ++i) dens[i] = std::exp(dens[i] - max_log);
    out.cdf.resize(points);
    out.cdf[0] = 0.0;
    for (int i = 1; i < points; ++i) {
        const double step = out.grid[i] - out.grid[i - 1];
        out.cdf[i] = out.cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * step;
    }
    out.cdf /= out.cdf[points - 1];
    return out;
}

inline double ks_statistic(std::vector<double> samples, const GridCdf& target) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (Eigen::Index g = 0; g < target.grid.size(); ++g) {
        const auto it = std::upper_bound(samples.begin(), samples.end(), target.grid[g]);
        const double emp = static_cast<double>(it - samples.begin()) / n;
        ks = std::max(ks, std::abs(emp - target.cdf[g]));
    }
    return ks;
}

// Exact 1-D W2 between weighted empirical measures: L2 distance between
// quantile functions, integrated over the union of cumulative-weight
// breakpoints.
inline double w2_1d(Eigen::VectorXd xa, Eigen::VectorXd wa, Eigen::VectorXd xb,
                    Eigen::VectorXd wb) {
    auto sort_measure = [](Eigen::VectorXd& x, Eigen::VectorXd& w) {
        std::vector<int> order(x.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
        Eigen::VectorXd xs(x.size()), ws(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            xs[i] = x[order[i]];
            ws[i] = w[order[i]];
        }
        x = xs;
        w = ws / ws.sum();
    };
    sort_measure(xa, wa);
    sort_measure(xb, wb);
    Eigen::Index ia = 0, ib = 0;
    double ca = wa[0], cb = wb[0], prev = 0.0, total = 0.0;
    for (;;) {
        const double next = std::min(ca, cb);
        const double diff = xa[ia] - xb[ib];
        total += diff * diff * (next - prev);
        prev = next;
        if (next >= 1.0 - 1e-15) break;
        if (ca <= cb) ca += wa[++ia];
        else cb += wb[++ib];
    }
    return std::sqrt(std::max(0.0, total));
}

// Exact fixed-support barycenter objective for K equal-size uniform 1-D
// measures: decompose the objective around the pointwise quantile average
// and project it onto the support.
inline double exact_barycenter_objective_1d(const std::vector<Eigen::VectorXd>& samples,
                                            const Eigen::VectorXd& support) {
    const int K = static_cast<int>(samples.size());
    const auto n = samples[0].size();
    std::vector<Eigen::VectorXd> sorted(samples.begin(), samples.end());
    for (auto& s : sorted) {
        if (s.size() != n) throw std::invalid_argument("equal sizes required");
        std::sort(s.data(), s.data() + s.size());
    }
    double projection_term = 0.0, spread_term = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double qstar = 0.0;
        for (const auto& s : sorted) qstar += s[i];
        qstar /= K;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index m = 0; m < support.size(); ++m) {
            best = std::min(best, (support[m] - qstar) * (support[m] - qstar));
        }
        projection_term += best;
        for (const auto& s : sorted) spread_term += (qstar - s[i]) * (qstar - s[i]) / K;
    }
    return (projection_term + spread_term) / static_cast<double>(n);
}

// Textbook OLS closed form (normal equations) for y = b0 + b1 x.
struct Ols {
    double intercept, slope, r2;
};

inline Ols ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double mx = x.mean(), my = y.mean();
    const double sxx = (x.array() - mx).square().sum();
    const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
    const double syy = (y.array() - my).square().sum();
    Ols o;
    o.slope = sxy / sxx;
    o.intercept = my - o.slope * mx;
    o.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return o;
}

}  // namespace oracles
