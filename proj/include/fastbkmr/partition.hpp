#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastbkmr/data.hpp"
#include "fastbkmr/kernel.hpp"

namespace fastbkmr {

// Random balanced partition of {0..n-1} into K index sets.
struct PartitionPlan {
    int K = 1;
    std::vector<std::vector<int>> index_sets;
    std::uint64_t seed = 0;
    bool with_replacement = false;
    int n = 0;
};

// Uniformly random partition with subset sizes floor(n/K) or ceil(n/K);
// deterministic given seed. with_replacement draws each subset's indices
// uniformly with replacement instead (experimental mode; sets need not be
// disjoint). Throws DomainError for K < 1 or K > n.
PartitionPlan make_partition(int n, int K, std::uint64_t seed, bool with_replacement = false);

// Split policy K = max(1, round(n^t)). Throws DomainError (SubsetTooSmall)
// when floor(n/K) < min_subset_size, and for t outside [0, 0.7].
int split_count(int n, double t, int min_subset_size = 32);

// One subset's sketched data: y_t = sqrt(scale_c) * y[I_k] entrywise (and
// likewise x_t); z rows are never scaled. scale_c = K under tempering,
// 1 otherwise. The n x n_k selector is held implicitly via `indices`.
struct SketchedSubset {
    Eigen::VectorXd y_t;
    Eigen::MatrixXd x_t;
    Eigen::MatrixXd z_sub;
    double scale_c = 1.0;
    int n_k = 0;
    int subset_id = 0;  // 1-based; 0 marks a full-data (unsplit) fit
    std::vector<int> indices;

    // Reduced (unscaled) views; the sqrt(scale_c) factors cancel in every
    // conditional, so samplers consume these.
    Eigen::VectorXd y_plain() const { return y_t / std::sqrt(scale_c); }
    Eigen::MatrixXd x_plain() const { return x_t / std::sqrt(scale_c); }
};

// Extracts subset k (1-based) of the plan. temper applies the sqrt(K)
// scaling of the modified model; otherwise the plain subset is returned.
SketchedSubset sketch(const Dataset& ds, const PartitionPlan& plan, int k, bool temper);

// Wraps the full dataset as a single unsketched subset (K = 1 path).
SketchedSubset full_data_subset(const Dataset& ds);

// Factorized V_t = scale_c * (I_{n_k} + lambda * gram_sub).
VMatrix subset_v_matrix(const SketchedSubset& sk, const GramMatrix& gram_sub, double lambda);

// Audit file: rows `row_index,subset_id`, ordered by row index.
void write_partition_csv(const std::string& path, const PartitionPlan& plan);
PartitionPlan read_partition_csv(const std::string& path);

}  // namespace fastbkmr
