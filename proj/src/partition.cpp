#include "fastbkmr/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fastbkmr/rng.hpp"

namespace fastbkmr {

PartitionPlan make_partition(int n, int K, std::uint64_t seed, bool with_replacement) {
    if (K < 1) throw DomainError("make_partition: K must be >= 1");
    if (K > n) throw DomainError("make_partition: K exceeds sample size n");
    PartitionPlan plan;
    plan.K = K;
    plan.seed = seed;
    plan.with_replacement = with_replacement;
    plan.n = n;
    plan.index_sets.resize(K);
    Rng rng(seed);
    if (with_replacement) {
        const int base = n / K;
        for (int k = 0; k < K; ++k) {
            const int size = base + (k < n % K ? 1 : 0);
            plan.index_sets[k].resize(size);
            for (int i = 0; i < size; ++i) {
                plan.index_sets[k][i] = static_cast<int>(rng.integer(n));
            }
            std::sort(plan.index_sets[k].begin(), plan.index_sets[k].end());
        }
        return plan;
    }
    const std::vector<int> perm = rng.permutation(n);
    int pos = 0;
    const int base = n / K;
    for (int k = 0; k < K; ++k) {
        const int size = base + (k < n % K ? 1 : 0);
        plan.index_sets[k].assign(perm.begin() + pos, perm.begin() + pos + size);
        std::sort(plan.index_sets[k].begin(), plan.index_sets[k].end());
        pos += size;
    }
    return plan;
}

int split_count(int n, double t, int min_subset_size) {
    if (n < 1) throw DomainError("split_count: n must be >= 1");
    if (!(t >= 0.0 && t <= 0.7)) throw DomainError("split_count: t must lie in [0, 0.7]");
    const int K = std::max(1, static_cast<int>(std::llround(std::pow(static_cast<double>(n), t))));
    if (n / K < min_subset_size && K > 1) {
        throw DomainError("split_count: SubsetTooSmall (n=" + std::to_string(n) + ", t=" +
                          std::to_string(t) + " gives K=" + std::to_string(K) +
                          " with subsets below " + std::to_string(min_subset_size) + ")");
    }
    return K;
}

SketchedSubset sketch(const Dataset& ds, const PartitionPlan& plan, int k, bool temper) {
    if (k < 1 || k > plan.K) throw DomainError("sketch: subset index out of range");
    const std::vector<int>& idx = plan.index_sets[k - 1];
    SketchedSubset sk;
    sk.n_k = static_cast<int>(idx.size());
    sk.subset_id = k;
    sk.indices = idx;
    sk.scale_c = temper ? static_cast<double>(plan.K) : 1.0;
    const double root = std::sqrt(sk.scale_c);
    sk.y_t.resize(sk.n_k);
    sk.x_t.resize(sk.n_k, ds.p());
    sk.z_sub.resize(sk.n_k, ds.q());
    for (int i = 0; i < sk.n_k; ++i) {
        sk.y_t[i] = root * ds.y[idx[i]];
        sk.x_t.row(i) = root * ds.x.row(idx[i]);
        sk.z_sub.row(i) = ds.z.row(idx[i]);
    }
    return sk;
}

SketchedSubset full_data_subset(const Dataset& ds) {
    SketchedSubset sk;
    sk.n_k = static_cast<int>(ds.n());
    sk.subset_id = 0;
    sk.scale_c = 1.0;
    sk.y_t = ds.y;
    sk.x_t = ds.x;
    sk.z_sub = ds.z;
    sk.indices.resize(sk.n_k);
    for (int i = 0; i < sk.n_k; ++i) sk.indices[i] = i;
    return sk;
}

VMatrix subset_v_matrix(const SketchedSubset& sk, const GramMatrix& gram_sub, double lambda) {
    return VMatrix(gram_sub, lambda, sk.scale_c);
}

void write_partition_csv(const std::string& path, const PartitionPlan& plan) {
    std::ofstream out(path);
    if (!out) throw DataError("write_partition_csv: cannot open " + path);
    out << "row_index,subset_id\n";
    std::vector<std::pair<int, int>> rows;
    for (int k = 0; k < plan.K; ++k) {
        for (int idx : plan.index_sets[k]) rows.emplace_back(idx, k + 1);
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [idx, k] : rows) out << idx << ',' << k << '\n';
}

PartitionPlan read_partition_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_partition_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("read_partition_csv: empty file");
    std::map<int, std::vector<int>> sets;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
            throw DataError("read_partition_csv: malformed line");
        }
        sets[std::stoi(b)].push_back(std::stoi(a));
        ++n;
    }
    PartitionPlan plan;
    plan.K = static_cast<int>(sets.size());
    plan.n = n;
    plan.index_sets.resize(plan.K);
    for (auto& [k, idx] : sets) {
        if (k < 1 || k > plan.K) throw DataError("read_partition_csv: subset ids must be 1..K");
        std::sort(idx.begin(), idx.end());
        plan.index_sets[k - 1] = std::move(idx);
    }
    return plan;
}

}  // namespace fastbkmr
