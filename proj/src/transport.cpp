#include "fastbkmr/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace fastbkmr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd sq_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd c = -2.0 * a * b.transpose();
    c.colwise() += a.rowwise().squaredNorm();
    c.rowwise() += b.rowwise().squaredNorm().transpose();
    return c.cwiseMax(0.0);
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

// Default regularization: 0.01 x median pairwise squared cost between the
// support and the measures' atoms.
double default_epsilon(const std::vector<Eigen::MatrixXd>& costs) {
    std::vector<double> all;
    for (const auto& c : costs) {
        all.insert(all.end(), c.data(), c.data() + c.size());
    }
    const double med = median_of(std::move(all));
    return std::max(1e-12, 0.01 * med);
}

double logsumexp(const Eigen::ArrayXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v - m).exp().sum());
}

}  // namespace

void AtomicMeasure::validate() const {
    if (atoms.rows() != weights.size()) throw DomainError("AtomicMeasure: atom/weight mismatch");
    if (atoms.rows() == 0) throw DomainError("AtomicMeasure: empty measure");
    if (!atoms.allFinite()) throw DomainError("AtomicMeasure: non-finite atoms");
    if ((weights.array() < 0.0).any()) throw DomainError("AtomicMeasure: negative weight");
    if (std::abs(weights.sum() - 1.0) >= 1e-10) {
        throw DomainError("AtomicMeasure: weights must sum to 1");
    }
}

AtomicMeasure AtomicMeasure::from_samples(const Eigen::MatrixXd& atoms) {
    AtomicMeasure m;
    m.atoms = atoms;
    m.weights = Eigen::VectorXd::Constant(atoms.rows(), 1.0 / static_cast<double>(atoms.rows()));
    return m;
}

AtomicMeasure AtomicMeasure::from_samples(const Eigen::VectorXd& scalars) {
    return from_samples(Eigen::MatrixXd(scalars));
}

double CombinedPosterior::mean_scalar() const {
    if (atoms.cols() != 1) throw DomainError("mean_scalar: atoms are not scalar");
    return (atoms.col(0).array() * weights.array()).sum();
}

// ---------------------------------------------------------------------------
// Exact transport LP: successive shortest augmenting paths with Johnson
// potentials on the dense bipartite network.
double w2_exact(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    mu.validate();
    nu.validate();
    if (mu.dim() != nu.dim()) throw DomainError("w2_exact: dimension mismatch");
    const int m = static_cast<int>(mu.size());
    const int n = static_cast<int>(nu.size());
    if (m > 500 || n > 500) {
        throw NumericalError("w2_exact: TooLarge (" + std::to_string(m) + "x" +
                             std::to_string(n) + " exceeds the 500x500 LP guard)");
    }
    const Eigen::MatrixXd cost = sq_cost(mu.atoms, nu.atoms);

    Eigen::VectorXd rem_a = mu.weights;
    // Rescale demands so total supply and demand agree exactly.
    Eigen::VectorXd rem_b = nu.weights * (rem_a.sum() / nu.weights.sum());
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd pot = Eigen::VectorXd::Zero(m + n);  // sources then sinks

    constexpr double kActive = 1e-15;
    const int node_count = m + n;
    std::vector<double> dist(node_count);
    std::vector<int> parent(node_count);
    std::vector<char> done(node_count);

    const int max_rounds = 50 * (node_count + 1);
    int rounds = 0;
    while (rem_a.maxCoeff() > kActive) {
        if (++rounds > max_rounds) {
            throw NumericalError("w2_exact: augmentation limit exceeded");
        }
        // Multi-source Dijkstra over reduced costs.
        for (int v = 0; v < node_count; ++v) {
            dist[v] = (v < m && rem_a[v] > kActive) ? 0.0 : kInf;
            parent[v] = -1;
            done[v] = 0;
        }
        int target = -1;
        for (;;) {
            int u = -1;
            double best = kInf;
            for (int v = 0; v < node_count; ++v) {
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            }
            if (u < 0) break;
            done[u] = 1;
            if (u >= m && rem_b[u - m] > kActive) {
                target = u - m;
                break;
            }
            if (u < m) {
                const int i = u;
                for (int j = 0; j < n; ++j) {
                    const int v = m + j;
                    if (done[v]) continue;
                    const double rc = std::max(0.0, cost(i, j) + pot[i] - pot[v]);
                    if (dist[u] + rc < dist[v]) {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                const int j = u - m;
                for (int i = 0; i < m; ++i) {
                    if (done[i] || flow(i, j) <= kActive) continue;
                    const double rc = std::max(0.0, -cost(i, j) + pot[u] - pot[i]);
                    if (dist[u] + rc < dist[i]) {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }
        if (target < 0) throw NumericalError("w2_exact: no augmenting path (infeasible weights)");

        // Trace the path back to its origin source and find the bottleneck.
        const double d_target = dist[m + target];
        double bottleneck = rem_b[target];
        int v = m + target;
        while (parent[v] >= 0) {
            const int u = parent[v];
            if (u < m && v >= m) {
                // forward arc u -> v
            } else {
                bottleneck = std::min(bottleneck, flow(v, u - m));
            }
            v = u;
        }
        bottleneck = std::min(bottleneck, rem_a[v]);

        const int origin = v;
        v = m + target;
        while (parent[v] >= 0) {
            const int u = parent[v];
            if (u < m && v >= m) {
                flow(u, v - m) += bottleneck;
            } else {
                flow(v, u - m) -= bottleneck;
            }
            v = u;
        }
        rem_a[origin] -= bottleneck;
        rem_b[target] -= bottleneck;

        for (int w = 0; w < node_count; ++w) {
            if (std::isfinite(dist[w])) pot[w] += std::min(dist[w], d_target);
            else pot[w] += d_target;
        }
    }
    const double total = (flow.array() * cost.array()).sum();
    return std::sqrt(std::max(0.0, total));
}

// ---------------------------------------------------------------------------
// Log-domain iterative Bregman projections for the fixed-support barycenter.
CombinedPosterior barycenter_sinkhorn(const std::vector<AtomicMeasure>& measures,
                                      const Eigen::MatrixXd& support, double epsilon,
                                      const Eigen::VectorXd& weights, int max_iters,
                                      double tol) {
    const int K = static_cast<int>(measures.size());
    if (K < 1) throw DomainError("barycenter_sinkhorn: needs K >= 1 measures");
    const Eigen::Index m = support.rows();
    if (m < 1) throw DomainError("barycenter_sinkhorn: empty support");
    Eigen::VectorXd w = weights;
    if (w.size() == 0) w = Eigen::VectorXd::Constant(K, 1.0 / K);
    if (w.size() != K) throw DomainError("barycenter_sinkhorn: weight count mismatch");
    w /= w.sum();

    std::vector<Eigen::MatrixXd> costs(K);
    for (int k = 0; k < K; ++k) {
        measures[k].validate();
        if (measures[k].dim() != support.cols()) {
            throw DomainError("barycenter_sinkhorn: dimension mismatch");
        }
        costs[k] = sq_cost(support, measures[k].atoms);
    }
    if (epsilon <= 0.0) epsilon = default_epsilon(costs);

    std::vector<Eigen::MatrixXd> lkernel(K);
    for (int k = 0; k < K; ++k) lkernel[k] = -costs[k] / epsilon;

    std::vector<Eigen::VectorXd> lu(K, Eigen::VectorXd::Zero(m));
    std::vector<Eigen::VectorXd> lv(K);
    Eigen::VectorXd la = Eigen::VectorXd::Constant(m, -std::log(static_cast<double>(m)));
    Eigen::VectorXd a_prev = la.array().exp();

    int iters = 0;
    bool converged = false;
    Eigen::MatrixXd t(m, K);
    for (iters = 1; iters <= max_iters; ++iters) {
        for (int k = 0; k < K; ++k) {
            const Eigen::Index nk = measures[k].size();
            lv[k].resize(nk);
            for (Eigen::Index j = 0; j < nk; ++j) {
                lv[k][j] = std::log(measures[k].weights[j]) -
                           logsumexp(lu[k].array() + lkernel[k].col(j).array());
            }
        }
        for (int k = 0; k < K; ++k) {
            for (Eigen::Index i = 0; i < m; ++i) {
                t(i, k) = logsumexp(lv[k].array() + lkernel[k].row(i).transpose().array());
            }
        }
        la.setZero();
        for (int k = 0; k < K; ++k) la += w[k] * (lu[k] + t.col(k));
        for (int k = 0; k < K; ++k) lu[k] = la - t.col(k);

        const Eigen::VectorXd a = la.array().exp();
        const double delta = (a - a_prev).cwiseAbs().maxCoeff();
        a_prev = a;
        if (delta < tol) {
            converged = true;
            break;
        }
    }

    CombinedPosterior out;
    out.atoms = support;
    out.weights = la.array().exp();
    const double sum = out.weights.sum();
    if (sum > 0.0) out.weights /= sum;
    else out.weights.setConstant(1.0 / static_cast<double>(m));
    out.diag.method = "sinkhorn";
    out.diag.iterations = std::min(iters, max_iters);
    out.diag.epsilon = epsilon;
    out.diag.converged = converged;

    // Sharp transport objective at the final plans.
    double obj = 0.0;
    for (int k = 0; k < K; ++k) {
        const Eigen::Index nk = measures[k].size();
        double ok = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < nk; ++j) {
                const double lp = lu[k][i] + lkernel[k](i, j) + lv[k][j];
                ok += std::exp(lp) * costs[k](i, j);
            }
        }
        obj += w[k] * ok;
    }
    out.diag.objective = obj;
    return out;
}

// ---------------------------------------------------------------------------
namespace {

// Empirical quantile, midpoint convention: u = (i - 1/2)/N maps exactly to
// the i-th order statistic; linear interpolation between.
double quantile_sorted(const Eigen::VectorXd& sorted, double u) {
    const Eigen::Index n = sorted.size();
    const double pos = u * static_cast<double>(n) + 0.5;
    if (pos <= 1.0) return sorted[0];
    if (pos >= static_cast<double>(n)) return sorted[n - 1];
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    return sorted[i0 - 1] * (1.0 - frac) + sorted[i0] * frac;
}

std::vector<Eigen::VectorXd> sorted_samples(const std::vector<Eigen::VectorXd>& samples) {
    std::vector<Eigen::VectorXd> sorted = samples;
    for (auto& s : sorted) {
        if (s.size() == 0) throw DomainError("1-D combiner: empty sample list");
        std::sort(s.data(), s.data() + s.size());
    }
    return sorted;
}

int resolve_n_out(const std::vector<Eigen::VectorXd>& samples, int n_out) {
    if (n_out > 0) return n_out;
    Eigen::Index best = 1;
    for (const auto& s : samples) best = std::max(best, s.size());
    return static_cast<int>(best);
}

// Quantile matrix: row m holds Q_k((m - 1/2)/n_out) for each subset k.
Eigen::MatrixXd quantile_matrix(const std::vector<Eigen::VectorXd>& sorted, int n_out) {
    const int K = static_cast<int>(sorted.size());
    Eigen::MatrixXd q(n_out, K);
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < n_out; ++i) {
            q(i, k) = quantile_sorted(sorted[k], (i + 0.5) / n_out);
        }
    }
    return q;
}

}  // namespace

Eigen::VectorXd barycenter_1d(const std::vector<Eigen::VectorXd>& samples, int n_out) {
    if (samples.empty()) throw DomainError("barycenter_1d: needs K >= 1 sample lists");
    const int n = resolve_n_out(samples, n_out);
    const Eigen::MatrixXd q = quantile_matrix(sorted_samples(samples), n);
    return q.rowwise().mean();
}

Eigen::VectorXd geometric_median_1d(const std::vector<Eigen::VectorXd>& samples, int n_out,
                                    int max_iters, double tol) {
    const int K = static_cast<int>(samples.size());
    if (K < 1) throw DomainError("geometric_median_1d: needs K >= 1 sample lists");
    const int n = resolve_n_out(samples, n_out);
    const Eigen::MatrixXd q = quantile_matrix(sorted_samples(samples), n);
    if (K <= 2) return q.rowwise().mean();  // K=2: midpoint convention

    // Weiszfeld in quantile space; W2 between 1-D empirical measures is the
    // L2 distance between quantile functions.
    Eigen::VectorXd cur = q.rowwise().mean();
    double prev_obj = kInf;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd d(K);
        for (int k = 0; k < K; ++k) {
            d[k] = std::sqrt((cur - q.col(k)).squaredNorm() / n);
        }
        const double scale = std::max(1e-300, d.maxCoeff());
        double obj = d.sum();
        // Coincidence guard: snap to a measure we have (numerically) reached.
        for (int k = 0; k < K; ++k) {
            if (d[k] < 1e-12 * scale) return q.col(k);
        }
        Eigen::VectorXd w = d.cwiseInverse();
        w /= w.sum();
        cur = q * w;
        if (std::abs(prev_obj - obj) <= tol * std::max(1.0, obj)) break;
        prev_obj = obj;
    }
    return cur;
}

CombinedPosterior geometric_median_w2(const std::vector<AtomicMeasure>& measures, double epsilon,
                                      int max_iters, double tol) {
    const int K = static_cast<int>(measures.size());
    if (K < 2) throw DomainError("geometric_median_w2: needs K >= 2 measures");
    Eigen::Index rows = 0;
    for (const auto& msr : measures) {
        msr.validate();
        rows += msr.size();
    }
    Eigen::MatrixXd support(rows, measures[0].dim());
    Eigen::Index at = 0;
    for (const auto& msr : measures) {
        support.middleRows(at, msr.size()) = msr.atoms;
        at += msr.size();
    }

    Eigen::VectorXd w = Eigen::VectorXd::Constant(K, 1.0 / K);
    CombinedPosterior cur = barycenter_sinkhorn(measures, support, epsilon, w);
    if (K == 2) {
        cur.diag.method = "weiszfeld-midpoint";
        return cur;
    }

    double prev_obj = kInf;
    int outer = 0;
    for (outer = 1; outer <= max_iters; ++outer) {
        AtomicMeasure cur_measure{cur.atoms, cur.weights};
        Eigen::VectorXd d(K);
        for (int k = 0; k < K; ++k) d[k] = w2_exact(cur_measure, measures[k]);
        const double scale = std::max(1e-300, d.maxCoeff());
        const double obj = d.sum();
        for (int k = 0; k < K; ++k) {
            if (d[k] < 1e-12 * scale) {
                CombinedPosterior out;
                out.atoms = measures[k].atoms;
                out.weights = measures[k].weights;
                out.diag.method = "weiszfeld";
                out.diag.iterations = outer;
                out.diag.objective = obj;
                return out;
            }
        }
        w = d.cwiseInverse();
        w /= w.sum();
        cur = barycenter_sinkhorn(measures, support, epsilon, w);
        if (std::abs(prev_obj - obj) <= tol * std::max(1.0, obj)) break;
        prev_obj = obj;
    }
    cur.diag.method = "weiszfeld";
    cur.diag.iterations = outer;
    return cur;
}

// ---------------------------------------------------------------------------
CombinedPosterior combine_scalar(const std::vector<Eigen::VectorXd>& samples,
                                 const CombineOptions& opts) {
    if (samples.empty()) throw DomainError("combine_scalar: no subset samples");
    CombinedPosterior out;
    if (samples.size() == 1) {
        out.atoms = samples[0];
        out.weights =
            Eigen::VectorXd::Constant(samples[0].size(), 1.0 / static_cast<double>(samples[0].size()));
        out.diag.method = "identity";
        return out;
    }
    Eigen::VectorXd atoms;
    if (opts.method == CombineMethod::barycenter) {
        atoms = barycenter_1d(samples, opts.n_out);
        out.diag.method = "quantile-barycenter";
    } else {
        atoms = geometric_median_1d(samples, opts.n_out);
        out.diag.method = "quantile-median";
    }
    out.atoms = atoms;
    out.weights = Eigen::VectorXd::Constant(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    return out;
}

std::vector<std::string> scalar_functional_names(const ChainOutput& ref) {
    std::vector<std::string> names;
    for (int j = 1; j <= ref.p; ++j) names.push_back("beta_" + std::to_string(j));
    names.emplace_back("sigma2");
    names.emplace_back("lambda");
    if (ref.kernel_mode == KernelMode::isotropic) {
        names.emplace_back("rho");
    } else {
        for (int j = 1; j <= ref.q; ++j) names.push_back("r_" + std::to_string(j));
        for (int j = 1; j <= ref.q; ++j) names.push_back("eta_" + std::to_string(j));
    }
    return names;
}

Eigen::VectorXd extract_scalar(const ChainOutput& out, const std::string& name) {
    const Eigen::Index n = out.n_draws();
    Eigen::VectorXd v(n);
    auto indexed = [&](const std::string& prefix) -> int {
        if (name.rfind(prefix, 0) != 0) return -1;
        return std::stoi(name.substr(prefix.size()));
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        const PosteriorDraw& d = out.draws[i];
        if (name == "sigma2") v[i] = d.sigma2;
        else if (name == "lambda") v[i] = d.lambda;
        else if (name == "rho") v[i] = d.rho;
        else if (int j = indexed("beta_"); j > 0) v[i] = d.beta[j - 1];
        else if (int j = indexed("r_"); j > 0) v[i] = d.r[j - 1];
        else if (int j = indexed("eta_"); j > 0) v[i] = d.eta[j - 1];
        else throw DomainError("extract_scalar: unknown functional " + name);
    }
    return v;
}

void check_config_match(const std::vector<ChainOutput>& outputs) {
    if (outputs.empty()) throw DataError("combine: no subset outputs");
    const ChainOutput& ref = outputs.front();
    for (const auto& o : outputs) {
        if (o.p != ref.p || o.q != ref.q || o.kernel_mode != ref.kernel_mode ||
            o.iters != ref.iters || o.burnin != ref.burnin || o.thin != ref.thin) {
            throw DataError("combine: ConfigMismatch across subset chains");
        }
    }
}

std::map<std::string, CombinedPosterior> combine(const std::vector<ChainOutput>& outputs,
                                                 const CombineOptions& opts) {
    check_config_match(outputs);
    std::map<std::string, CombinedPosterior> result;
    for (const std::string& name : scalar_functional_names(outputs.front())) {
        std::vector<Eigen::VectorXd> samples;
        samples.reserve(outputs.size());
        for (const auto& o : outputs) samples.push_back(extract_scalar(o, name));
        result[name] = combine_scalar(samples, opts);
    }
    if (opts.joint_beta && outputs.front().p > 0) {
        std::vector<AtomicMeasure> measures;
        Eigen::Index total = 0;
        for (const auto& o : outputs) {
            Eigen::MatrixXd atoms(o.n_draws(), o.p);
            for (Eigen::Index i = 0; i < o.n_draws(); ++i) atoms.row(i) = o.draws[i].beta;
            measures.push_back(AtomicMeasure::from_samples(atoms));
            total += o.n_draws();
        }
        if (outputs.size() == 1) {
            CombinedPosterior cp;
            cp.atoms = measures[0].atoms;
            cp.weights = measures[0].weights;
            cp.diag.method = "identity";
            result["beta"] = std::move(cp);
        } else if (opts.method == CombineMethod::median) {
            result["beta"] = geometric_median_w2(measures, opts.epsilon);
        } else {
            Eigen::MatrixXd support(total, outputs.front().p);
            Eigen::Index at = 0;
            for (const auto& msr : measures) {
                support.middleRows(at, msr.size()) = msr.atoms;
                at += msr.size();
            }
            result["beta"] = barycenter_sinkhorn(measures, support, opts.epsilon,
                                                 Eigen::VectorXd(), opts.sinkhorn_max_iters,
                                                 opts.sinkhorn_tol);
        }
    }
    return result;
}

void write_combined_csv(const std::string& path, const std::string& functional,
                        const CombinedPosterior& cp) {
    std::ofstream f(path);
    if (!f) throw DataError("write_combined_csv: cannot open " + path);
    f << "functional";
    if (cp.atoms.cols() == 1) {
        f << ",atom";
    } else {
        for (Eigen::Index j = 1; j <= cp.atoms.cols(); ++j) f << ",atom_" << j;
    }
    f << ",weight\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << ',' << buf;
    };
    for (Eigen::Index i = 0; i < cp.atoms.rows(); ++i) {
        f << functional;
        for (Eigen::Index j = 0; j < cp.atoms.cols(); ++j) put(cp.atoms(i, j));
        put(cp.weights[i]);
        f << '\n';
    }
}

CombinedPosterior read_combined_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("read_combined_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("read_combined_csv: empty file");
    const auto header_cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',')) + 1;
    const Eigen::Index d = header_cols - 2;
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // functional name
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<Eigen::Index>(vals.size()) != d + 1) {
            throw DataError("read_combined_csv: ragged row");
        }
        rows.push_back(std::move(vals));
    }
    CombinedPosterior cp;
    cp.atoms.resize(static_cast<Eigen::Index>(rows.size()), d);
    cp.weights.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) cp.atoms(static_cast<Eigen::Index>(i), j) = rows[i][j];
        cp.weights[static_cast<Eigen::Index>(i)] = rows[i][d];
    }
    return cp;
}

void write_combine_diagnostics_csv(const std::string& path,
                                   const std::map<std::string, CombinedPosterior>& combined) {
    std::ofstream f(path);
    if (!f) throw DataError("write_combine_diagnostics_csv: cannot open " + path);
    f << "functional,method,iterations,objective,epsilon,converged\n";
    for (const auto& [name, cp] : combined) {
        f << name << ',' << cp.diag.method << ',' << cp.diag.iterations << ','
          << cp.diag.objective << ',' << cp.diag.epsilon << ',' << (cp.diag.converged ? 1 : 0)
          << '\n';
    }
}

}  // namespace fastbkmr
