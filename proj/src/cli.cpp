#include "fastbkmr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fastbkmr/partition.hpp"
#include "fastbkmr/rng.hpp"
#include "fastbkmr/simulation.hpp"
#include "fastbkmr/summary.hpp"
#include "fastbkmr/threading.hpp"

namespace fs = std::filesystem;

namespace fastbkmr {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw DomainError("config: bad boolean for " + key + ": " + v);
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw DomainError("config: bad number for " + key + ": " + v);
    }
}

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw DomainError("config: bad integer for " + key + ": " + v);
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("config: expected key = value at line " + std::to_string(line_no));
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

FitConfig parse_fit_config(const std::map<std::string, std::string>& kv) {
    FitConfig fc;
    for (const auto& [key, value] : kv) {
        if (key == "outcome") fc.schema.outcome = value;
        else if (key == "confounders") fc.schema.confounders = split_list(value);
        else if (key == "exposures") fc.schema.exposures = split_list(value);
        else if (key == "kernel_mode") {
            if (value == "isotropic") fc.model.kernel_mode = KernelMode::isotropic;
            else if (value == "ard") fc.model.kernel_mode = KernelMode::ard;
            else throw DomainError("config: kernel_mode must be isotropic or ard");
        } else if (key == "a_lambda") fc.model.a_lambda = to_double(value, key);
        else if (key == "b_lambda") fc.model.b_lambda = to_double(value, key);
        else if (key == "alpha_sigma") fc.model.alpha_sigma = to_double(value, key);
        else if (key == "b_sigma") fc.model.b_sigma = to_double(value, key);
        else if (key == "sigma2_literal_gamma") fc.model.sigma2_literal_gamma = to_bool(value, key);
        else if (key == "rho_shape") fc.model.rho_shape = to_double(value, key);
        else if (key == "rho_rate") fc.model.rho_rate = to_double(value, key);
        else if (key == "pi") {
            const auto items = split_list(value);
            fc.model.pi.resize(static_cast<Eigen::Index>(items.size()));
            for (size_t i = 0; i < items.size(); ++i) fc.model.pi[i] = to_double(items[i], key);
        } else if (key == "slab_shape") fc.model.slab_shape = to_double(value, key);
        else if (key == "slab_rate") fc.model.slab_rate = to_double(value, key);
        else if (key == "temper") fc.model.temper = to_bool(value, key);
        else if (key == "iters") fc.model.iters = to_int(value, key);
        else if (key == "burnin") fc.model.burnin = to_int(value, key);
        else if (key == "thin") fc.model.thin = to_int(value, key);
        else if (key == "iso_exponent") fc.model.iso_exponent = to_double(value, key);
        else if (key == "jitter") fc.model.jitter = to_double(value, key);
        else if (key == "missing_policy") {
            if (value == "error") fc.missing_policy = MissingPolicy::error;
            else if (value == "drop") fc.missing_policy = MissingPolicy::drop;
            else throw DomainError("config: missing_policy must be error or drop");
        } else if (key == "standardize_x") fc.standardize_x = to_bool(value, key);
        else if (key == "splits_exponent") fc.splits_exponent = to_double(value, key);
        else if (key == "min_subset_size") fc.min_subset_size = to_int(value, key);
        else if (key == "with_replacement") fc.with_replacement = to_bool(value, key);
        else if (key == "method") {
            if (value == "barycenter") fc.combine.method = CombineMethod::barycenter;
            else if (value == "median") fc.combine.method = CombineMethod::median;
            else throw DomainError("config: method must be barycenter or median");
        } else if (key == "epsilon") fc.combine.epsilon = to_double(value, key);
        else if (key == "n_out") fc.combine.n_out = to_int(value, key);
        else if (key == "joint_beta") fc.combine.joint_beta = to_bool(value, key);
        else if (key == "surfaces") {
            for (const auto& item : split_list(value)) fc.surfaces.push_back(to_int(item, key));
        } else if (key == "bivariate") {
            for (const auto& item : split_list(value)) {
                const auto pair = split_list(item, ':');
                if (pair.size() != 2) throw DomainError("config: bivariate entries look like i:j");
                fc.bivariate.emplace_back(to_int(pair[0], key), to_int(pair[1], key));
            }
        } else if (key == "grid_points") fc.grid_points = to_int(value, key);
        else if (key == "fix_quantile") fc.fix_quantile = to_double(value, key);
        else throw DomainError("config: unknown key " + key);
    }
    if (fc.schema.outcome.empty()) throw DomainError("config: outcome column is required");
    if (fc.schema.exposures.empty()) throw DomainError("config: exposure columns are required");
    return fc;
}

namespace {

// ---------------------------------------------------------------------------
// Artifact helpers

struct ManifestWriter {
    std::ofstream f;
    explicit ManifestWriter(const fs::path& path) : f(path) {
        if (!f) throw DataError("manifest: cannot open " + path.string());
    }
    void put(const std::string& key, const std::string& value) {
        f << key << " = " << value << '\n';
    }
    void put(const std::string& key, double value) { put(key, format_double(value)); }
    void put(const std::string& key, int value) { put(key, std::to_string(value)); }
    void put(const std::string& key, std::uint64_t value) { put(key, std::to_string(value)); }
};

std::string now_string() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

std::string vector_csv(const Eigen::VectorXd& v) {
    std::vector<std::string> items;
    items.reserve(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) items.push_back(format_double(v[i]));
    return join(items, ",");
}

void write_manifest(const fs::path& path, const std::string& command, const std::string& data_path,
                    const FitConfig& fc, int n, int K, std::uint64_t seed, int jobs,
                    int dropped_rows, const ScalingRecord& scaling,
                    const std::vector<std::uint64_t>& subset_seeds) {
    ManifestWriter mw(path);
    mw.put("version", "fastbkmr 0.1.0");
    mw.put("created", now_string());
    mw.put("command", command);
    mw.put("data", data_path);
    mw.put("outcome", fc.schema.outcome);
    mw.put("confounders", join(fc.schema.confounders, ","));
    mw.put("exposures", join(fc.schema.exposures, ","));
    mw.put("missing_policy", fc.missing_policy == MissingPolicy::error ? "error" : "drop");
    mw.put("dropped_rows", dropped_rows);
    mw.put("standardize_x", fc.standardize_x ? "1" : "0");
    mw.put("n", n);
    mw.put("kernel_mode", fc.model.kernel_mode == KernelMode::isotropic ? "isotropic" : "ard");
    mw.put("a_lambda", fc.model.a_lambda);
    mw.put("b_lambda", fc.model.b_lambda);
    mw.put("alpha_sigma", fc.model.alpha_sigma);
    mw.put("b_sigma", fc.model.b_sigma);
    mw.put("sigma2_literal_gamma", fc.model.sigma2_literal_gamma ? "1" : "0");
    mw.put("rho_shape", fc.model.rho_shape);
    mw.put("rho_rate", fc.model.rho_rate);
    mw.put("pi", vector_csv(fc.model.pi));
    mw.put("slab_shape", fc.model.slab_shape);
    mw.put("slab_rate", fc.model.slab_rate);
    mw.put("temper", fc.model.temper ? "1" : "0");
    mw.put("iters", fc.model.iters);
    mw.put("burnin", fc.model.burnin);
    mw.put("thin", fc.model.thin);
    mw.put("iso_exponent", fc.model.iso_exponent);
    mw.put("jitter", fc.model.jitter);
    mw.put("splits_exponent", fc.splits_exponent);
    mw.put("min_subset_size", fc.min_subset_size);
    mw.put("with_replacement", fc.with_replacement ? "1" : "0");
    mw.put("K", K);
    mw.put("seed", seed);
    mw.put("jobs", jobs);
    mw.put("combine_method",
           fc.combine.method == CombineMethod::barycenter ? "barycenter" : "median");
    mw.put("epsilon", fc.combine.epsilon);
    mw.put("n_out", fc.combine.n_out);
    mw.put("joint_beta", fc.combine.joint_beta ? "1" : "0");
    mw.put("grid_points", fc.grid_points);
    mw.put("fix_quantile", fc.fix_quantile);
    mw.put("z_mean", vector_csv(scaling.z_mean));
    mw.put("z_sd", vector_csv(scaling.z_sd));
    if (scaling.x_mean.size() > 0) {
        mw.put("x_mean", vector_csv(scaling.x_mean));
        mw.put("x_sd", vector_csv(scaling.x_sd));
    }
    std::vector<std::string> seeds;
    seeds.reserve(subset_seeds.size());
    for (auto s : subset_seeds) seeds.push_back(std::to_string(s));
    mw.put("subset_seeds", join(seeds, ";"));
}

FitConfig fit_config_from_manifest(const std::map<std::string, std::string>& kv) {
    std::map<std::string, std::string> filtered;
    static const char* keys[] = {"outcome", "confounders", "exposures", "kernel_mode",
                                 "a_lambda", "b_lambda", "alpha_sigma", "b_sigma",
                                 "sigma2_literal_gamma", "rho_shape", "rho_rate", "pi",
                                 "slab_shape", "slab_rate", "temper", "iters", "burnin", "thin",
                                 "iso_exponent", "jitter", "missing_policy", "standardize_x",
                                 "splits_exponent", "min_subset_size", "with_replacement",
                                 "grid_points", "fix_quantile"};
    for (const char* k : keys) {
        const auto it = kv.find(k);
        if (it != kv.end()) filtered[k] = it->second;
    }
    return parse_fit_config(filtered);
}

std::vector<ChainOutput> read_artifact_draws(const fs::path& dir, int K) {
    std::vector<ChainOutput> chains;
    chains.reserve(K);
    for (int k = 1; k <= K; ++k) {
        const fs::path p = dir / "draws" / ("subset_" + std::to_string(k) + ".csv");
        chains.push_back(read_draws_csv(p.string()));
    }
    return chains;
}

void write_report(const fs::path& path, const FitConfig& fc, int n, int K,
                  const std::vector<ChainOutput>& chains,
                  const std::map<std::string, CombinedPosterior>& combined) {
    std::ofstream f(path);
    if (!f) throw DataError("report: cannot open " + path.string());
    const ChainOutput& ref = chains.front();
    f << "fastbkmr fit summary\n";
    f << "n = " << n << ", p = " << ref.p << ", q = " << ref.q << ", K = " << K
      << ", retained draws per subset = " << ref.n_draws() << "\n";
    f << "kernel = " << (ref.kernel_mode == KernelMode::isotropic ? "isotropic" : "ard")
      << ", combine method = "
      << (fc.combine.method == CombineMethod::barycenter ? "barycenter" : "median") << "\n\n";
    f << "combined posterior summaries (mean [2.5%, 50%, 97.5%]):\n";
    char buf[256];
    for (const auto& [name, cp] : combined) {
        if (cp.atoms.cols() != 1) continue;
        const double mean = cp.mean_scalar();
        const double lo = weighted_quantile(cp.atoms.col(0), cp.weights, 0.025);
        const double mid = weighted_quantile(cp.atoms.col(0), cp.weights, 0.5);
        const double hi = weighted_quantile(cp.atoms.col(0), cp.weights, 0.975);
        std::snprintf(buf, sizeof(buf), "  %-10s %10.5g  [%10.5g, %10.5g, %10.5g]\n", name.c_str(),
                      mean, lo, mid, hi);
        f << buf;
    }
    if (ref.kernel_mode == KernelMode::ard) {
        const Eigen::VectorXd pip = inclusion_probabilities(combined, ref.q);
        f << "\nposterior inclusion probabilities:\n";
        for (int j = 0; j < ref.q; ++j) {
            std::snprintf(buf, sizeof(buf), "  PIP_%d = %.4f\n", j + 1, pip[j]);
            f << buf;
        }
    }
    f << "\nlambda acceptance per subset:";
    for (const auto& c : chains) {
        std::snprintf(buf, sizeof(buf), " %.3f", c.diag.lambda_accept_rate);
        f << buf;
    }
    f << "\n";
}

void write_surfaces(const fs::path& summary_dir, const FitConfig& fc,
                    const std::vector<ChainOutput>& chains, const Eigen::MatrixXd& z, int jobs) {
    std::vector<int> uni = fc.surfaces;
    if (uni.empty()) {
        for (int j = 1; j <= static_cast<int>(z.cols()); ++j) uni.push_back(j);
    }
    const double exponent = fc.model.iso_exponent_for(z.cols());
    for (int j : uni) {
        const UnivariateSurface s = surface_univariate(chains, z, j, fc.grid_points,
                                                       fc.fix_quantile, fc.combine, exponent,
                                                       fc.model.jitter, jobs);
        write_surface_csv((summary_dir / ("surface_z" + std::to_string(j) + ".csv")).string(), s);
    }
    for (const auto& [i, j] : fc.bivariate) {
        const BivariateSurface s = surface_bivariate(chains, z, i, j, fc.grid_points,
                                                     fc.fix_quantile, fc.combine, exponent,
                                                     fc.model.jitter, jobs);
        write_surface_csv(
            (summary_dir / ("surface_z" + std::to_string(i) + "_z" + std::to_string(j) + ".csv"))
                .string(),
            s);
    }
}

// ---------------------------------------------------------------------------
// Subcommand drivers

struct CommonArgs {
    std::string data_path, config_path, out_dir = "fastbkmr_out";
    std::uint64_t seed = 1;
    int jobs = 0;
    double splits_exponent = std::numeric_limits<double>::quiet_NaN();
    int iters = -1, burnin = -1, thin = -1;
    std::string method;
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    bool joint_beta = false;
    std::string surfaces, bivariate;
    int grid_points = -1;
    double fix = std::numeric_limits<double>::quiet_NaN();
};

void apply_overrides(FitConfig& fc, const CommonArgs& args) {
    if (!std::isnan(args.splits_exponent)) fc.splits_exponent = args.splits_exponent;
    if (args.iters > 0) fc.model.iters = args.iters;
    if (args.burnin >= 0) fc.model.burnin = args.burnin;
    if (args.thin > 0) fc.model.thin = args.thin;
    if (!args.method.empty()) {
        if (args.method == "barycenter") fc.combine.method = CombineMethod::barycenter;
        else if (args.method == "median") fc.combine.method = CombineMethod::median;
        else throw DomainError("--method must be barycenter or median");
    }
    if (!std::isnan(args.epsilon)) fc.combine.epsilon = args.epsilon;
    if (args.joint_beta) fc.combine.joint_beta = true;
    if (!args.surfaces.empty()) {
        fc.surfaces.clear();
        for (const auto& s : split_list(args.surfaces)) fc.surfaces.push_back(to_int(s, "surfaces"));
    }
    if (!args.bivariate.empty()) {
        fc.bivariate.clear();
        for (const auto& item : split_list(args.bivariate)) {
            const auto pair = split_list(item, ':');
            if (pair.size() != 2) throw DomainError("--bivariate entries look like i:j");
            fc.bivariate.emplace_back(to_int(pair[0], "bivariate"), to_int(pair[1], "bivariate"));
        }
    }
    if (args.grid_points > 0) fc.grid_points = args.grid_points;
    if (!std::isnan(args.fix)) fc.fix_quantile = args.fix;
}

int cmd_fit(const CommonArgs& args) {
    FitConfig fc = parse_fit_config(read_config_file(args.config_path));
    apply_overrides(fc, args);

    LoadReport load_report;
    const Dataset raw = load_csv(args.data_path, fc.schema, fc.missing_policy, &load_report);
    auto [ds, scaling] = standardize(raw, fc.standardize_x);
    fc.model.validate(ds.q());

    const int n = static_cast<int>(ds.n());
    const int K = split_count(n, fc.splits_exponent, fc.min_subset_size);

    const fs::path out(args.out_dir);
    fs::create_directories(out / "draws");
    fs::create_directories(out / "combined");
    fs::create_directories(out / "summary");
    const fs::path incomplete = out / "INCOMPLETE";
    {
        std::ofstream marker(incomplete);
        marker << "fit in progress or aborted; artifacts may be partial\n";
    }

    const PartitionPlan plan = make_partition(n, K, Rng::derive(args.seed, 1), fc.with_replacement);
    write_partition_csv((out / "partition.csv").string(), plan);

    std::vector<std::uint64_t> subset_seeds(K);
    for (int k = 0; k < K; ++k) subset_seeds[k] = Rng::derive(args.seed, 2 + k);

    std::vector<ChainOutput> chains(K);
    parallel_for(K, args.jobs, [&](int k) {
        const SketchedSubset sk = sketch(ds, plan, k + 1, fc.model.temper);
        chains[k] = run_chain(sk, fc.model, subset_seeds[k]);
    });
    for (int k = 0; k < K; ++k) {
        write_draws_csv((out / "draws" / ("subset_" + std::to_string(k + 1) + ".csv")).string(),
                        chains[k]);
    }

    const auto combined = combine(chains, fc.combine);
    for (const auto& [name, cp] : combined) {
        write_combined_csv((out / "combined" / (name + ".csv")).string(), name, cp);
    }
    write_combine_diagnostics_csv((out / "combined" / "diagnostics.csv").string(), combined);

    write_report(out / "summary" / "report.txt", fc, n, K, chains, combined);
    write_surfaces(out / "summary", fc, chains, ds.z, args.jobs);

    write_manifest(out / "manifest", "fit", args.data_path, fc, n, K, args.seed, args.jobs,
                   load_report.dropped_rows, scaling, subset_seeds);
    fs::remove(incomplete);
    return 0;
}

// Shared loader for combine/surface: manifest -> config + data + chains.
struct ArtifactBundle {
    FitConfig fc;
    Dataset ds;
    std::vector<ChainOutput> chains;
    int K = 0;
};

ArtifactBundle load_artifact(const std::string& artifact_dir, const std::string& data_override) {
    const fs::path dir(artifact_dir);
    const auto kv = read_config_file((dir / "manifest").string());
    ArtifactBundle ab;
    ab.fc = fit_config_from_manifest(kv);
    const auto k_it = kv.find("K");
    if (k_it == kv.end()) throw DataError("artifact manifest lacks K");
    ab.K = to_int(k_it->second, "K");
    std::string data_path = data_override;
    if (data_path.empty()) {
        const auto d_it = kv.find("data");
        if (d_it == kv.end()) throw DataError("artifact manifest lacks the data path");
        data_path = d_it->second;
    }
    const Dataset raw = load_csv(data_path, ab.fc.schema, ab.fc.missing_policy);
    ab.ds = standardize(raw, ab.fc.standardize_x).first;
    ab.chains = read_artifact_draws(dir, ab.K);
    return ab;
}

int cmd_combine(const std::string& artifact_dir, const std::string& data_override,
                const CommonArgs& args, const std::string& out_name) {
    ArtifactBundle ab = load_artifact(artifact_dir, data_override);
    apply_overrides(ab.fc, args);
    const fs::path out = fs::path(artifact_dir) / out_name;
    fs::create_directories(out);
    const auto combined = combine(ab.chains, ab.fc.combine);
    for (const auto& [name, cp] : combined) {
        write_combined_csv((out / (name + ".csv")).string(), name, cp);
    }
    write_combine_diagnostics_csv((out / "diagnostics.csv").string(), combined);
    return 0;
}

int cmd_surface(const std::string& artifact_dir, const std::string& data_override,
                const CommonArgs& args, const std::string& type, const std::string& exposures) {
    ArtifactBundle ab = load_artifact(artifact_dir, data_override);
    apply_overrides(ab.fc, args);
    const fs::path summary_dir = fs::path(artifact_dir) / "summary";
    fs::create_directories(summary_dir);
    const auto items = split_list(exposures);
    const double exponent = ab.fc.model.iso_exponent_for(ab.ds.q());
    if (type == "uni") {
        if (items.size() != 1) throw DomainError("--type uni expects --exposures j");
        const int j = to_int(items[0], "exposures");
        const UnivariateSurface s =
            surface_univariate(ab.chains, ab.ds.z, j, ab.fc.grid_points, ab.fc.fix_quantile,
                               ab.fc.combine, exponent, ab.fc.model.jitter, args.jobs);
        write_surface_csv((summary_dir / ("surface_z" + std::to_string(j) + ".csv")).string(), s);
    } else if (type == "bi") {
        if (items.size() != 2) throw DomainError("--type bi expects --exposures i,j");
        const int i = to_int(items[0], "exposures");
        const int j = to_int(items[1], "exposures");
        const BivariateSurface s =
            surface_bivariate(ab.chains, ab.ds.z, i, j, ab.fc.grid_points, ab.fc.fix_quantile,
                              ab.fc.combine, exponent, ab.fc.model.jitter, args.jobs);
        write_surface_csv(
            (summary_dir / ("surface_z" + std::to_string(i) + "_z" + std::to_string(j) + ".csv"))
                .string(),
            s);
    } else {
        throw DomainError("--type must be uni or bi");
    }
    return 0;
}

int cmd_simulate(const std::vector<int>& n_list, const std::vector<double>& t_list, int reps,
                 bool paper_scale, const CommonArgs& args, const std::string& out_path,
                 const std::string& kernel) {
    ExperimentOptions opts;
    opts.n_list = n_list;
    opts.t_list = t_list;
    opts.reps = reps;
    opts.seed = args.seed;
    opts.jobs = args.jobs;
    opts.model.iters = 2000;
    opts.model.burnin = 1000;
    opts.model.thin = 5;
    if (kernel == "ard") opts.model.kernel_mode = KernelMode::ard;
    else if (kernel != "isotropic") throw DomainError("--kernel must be isotropic or ard");
    if (paper_scale) {
        opts.reps = 300;
        opts.model.iters = 10000;
        opts.model.burnin = 5000;
    }
    if (args.iters > 0) opts.model.iters = args.iters;
    if (args.burnin >= 0) opts.model.burnin = args.burnin;
    if (args.thin > 0) opts.model.thin = args.thin;
    if (!args.method.empty()) {
        opts.combine.method =
            args.method == "median" ? CombineMethod::median : CombineMethod::barycenter;
    }
    // Validate the grid before any computation.
    for (double t : t_list) {
        if (!(t >= 0.0 && t <= 0.7)) throw DomainError("simulate: t must lie in [0, 0.7]");
    }
    for (int n : n_list) {
        if (n < 64) throw DomainError("simulate: n must be >= 64");
    }
    const std::vector<CellResult> rows = run_experiment(opts);
    write_results_csv(out_path, rows);
    write_run_manifest(out_path + ".manifest", opts, rows);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"fastbkmr: scalable semi-parametric GP regression via median posterior inference"};
    app.require_subcommand(1);

    CommonArgs args;

    auto add_common = [&](CLI::App* sub, bool with_seed = true) {
        if (with_seed) sub->add_option("--seed", args.seed, "master seed");
        sub->add_option("--jobs", args.jobs, "worker cap (0 = cores; env FASTBKMR_JOBS)");
    };
    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--iters", args.iters, "MCMC iterations");
        sub->add_option("--burnin", args.burnin, "burn-in iterations");
        sub->add_option("--thin", args.thin, "thinning stride");
        sub->add_option("--method", args.method, "combiner: barycenter | median");
        sub->add_option("--epsilon", args.epsilon, "Sinkhorn regularization");
        sub->add_flag("--joint-beta", args.joint_beta, "combine the beta vector jointly");
        sub->add_option("--grid", args.grid_points, "surface grid points");
        sub->add_option("--fix", args.fix, "quantile fixing the other exposures");
    };

    // fit
    auto* fit = app.add_subcommand("fit", "partition, fit subset chains in parallel, combine");
    fit->add_option("--data", args.data_path, "input CSV")->required();
    fit->add_option("--config", args.config_path, "key = value config file")->required();
    fit->add_option("--out", args.out_dir, "artifact directory");
    fit->add_option("--splits-exponent", args.splits_exponent, "t in K = round(n^t)");
    fit->add_option("--surfaces", args.surfaces, "univariate surface exposures, e.g. 1,2");
    fit->add_option("--bivariate", args.bivariate, "bivariate pairs, e.g. 1:2");
    add_common(fit);
    add_overrides(fit);

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthetic-study sweep over (n, t) with replication");
    std::string n_list_str = "512", t_list_str = "0", out_path = "results.csv",
                kernel = "isotropic";
    int reps = 10;
    bool paper_scale = false;
    sim->add_option("--n-list", n_list_str, "comma list of sample sizes");
    sim->add_option("--t-list", t_list_str, "comma list of split exponents");
    sim->add_option("--reps", reps, "replications per cell");
    sim->add_option("--out", out_path, "results table path");
    sim->add_option("--kernel", kernel, "isotropic | ard");
    sim->add_flag("--paper-scale", paper_scale, "300 reps and 10^4 iterations");
    add_common(sim);
    add_overrides(sim);

    // combine
    auto* comb = app.add_subcommand("combine", "re-combine existing draw files");
    std::string artifact_dir, data_override, out_name = "combined";
    comb->add_option("--artifact", artifact_dir, "fit artifact directory")->required();
    comb->add_option("--data", data_override, "override the manifest's data path");
    comb->add_option("--out-name", out_name, "output subdirectory inside the artifact");
    add_common(comb, false);
    add_overrides(comb);

    // surface
    auto* surf = app.add_subcommand("surface", "exposure-response surface extraction");
    std::string type = "uni", exposures = "1";
    surf->add_option("--artifact", artifact_dir, "fit artifact directory")->required();
    surf->add_option("--data", data_override, "override the manifest's data path");
    surf->add_option("--type", type, "uni | bi");
    surf->add_option("--exposures", exposures, "exposure index j, or pair i,j");
    add_common(surf, false);
    add_overrides(surf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fit->parsed()) return cmd_fit(args);
        if (sim->parsed()) {
            std::vector<int> n_list;
            for (const auto& s : split_list(n_list_str)) n_list.push_back(to_int(s, "n-list"));
            std::vector<double> t_list;
            for (const auto& s : split_list(t_list_str)) t_list.push_back(to_double(s, "t-list"));
            return cmd_simulate(n_list, t_list, reps, paper_scale, args, out_path, kernel);
        }
        if (comb->parsed()) return cmd_combine(artifact_dir, data_override, args, out_name);
        if (surf->parsed()) return cmd_surface(artifact_dir, data_override, args, type, exposures);
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}

}  // namespace fastbkmr
