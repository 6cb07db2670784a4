#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cyclelr {

// In-memory classification dataset with a fixed train/test split.
struct Dataset {
    Eigen::MatrixXd features;  // n x d
    std::vector<int> labels;   // n, each in [0, classes)
    int classes = 0;
    std::vector<Eigen::Index> train_indices;
    std::vector<Eigen::Index> test_indices;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index feature_dim() const { return features.cols(); }
    Eigen::Index train_size() const { return static_cast<Eigen::Index>(train_indices.size()); }
    Eigen::Index test_size() const { return static_cast<Eigen::Index>(test_indices.size()); }

    Eigen::MatrixXd gather_features(const std::vector<Eigen::Index>& idx) const;
    std::vector<int> gather_labels(const std::vector<Eigen::Index>& idx) const;
};

// Two interleaving half-circles (n/2 points each, labels 0/1) with
// isotropic Gaussian noise. Split is a seeded shuffle.
Dataset two_moons(Eigen::Index n, double noise_sigma, std::uint64_t seed,
                  double test_fraction = 0.2);

// k unit-variance Gaussian clusters, centroids on a circle of radius
// `separation`, n/k points per class.
Dataset gaussian_blobs(Eigen::Index n, int k, double separation, std::uint64_t seed,
                       double test_fraction = 0.2);

// `arms` interleaved spiral arms making `turns` revolutions, n/arms points
// per class, plus Gaussian noise.
Dataset spirals(Eigen::Index n, double turns, double noise_sigma, std::uint64_t seed,
                int arms = 2, double test_fraction = 0.2);

// Comma-separated file with a header row; every non-label column must be
// numeric and the label column integral. Labels are re-indexed densely to
// [0, k) in ascending value order; row order is preserved, and the split
// takes the last test_fraction of rows.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 double test_fraction = 0.2);

// header f0,...,f{d-1},label
void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column = "label");

// Training-row indices grouped into ceil(n_train/batchsize) minibatches.
// Order is a Fisher-Yates shuffle seeded by (seed, epoch); a single
// full-size batch is left in stored train order.
std::vector<std::vector<Eigen::Index>> minibatches(const Dataset& dataset, Eigen::Index batchsize,
                                                   std::uint64_t seed, long long epoch);

} // namespace cyclelr
