#include "cyclelr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cyclelr/common.hpp"
#include "cyclelr/rng.hpp"

namespace cyclelr {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706C74;  // substream tag for splits
constexpr std::uint64_t kBatchStream = 0x62746368;  // substream tag for minibatches

void assign_split(Dataset& ds, double test_fraction, Rng& rng) {
    const Eigen::Index n = ds.rows();
    check_config(test_fraction >= 0.0 && test_fraction < 1.0, "test_fraction must be in [0, 1)");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(order);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));
    ds.test_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    ds.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
}

} // namespace

Eigen::MatrixXd Dataset::gather_features(const std::vector<Eigen::Index>& idx) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), features.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = features.row(idx[i]);
    return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<Eigen::Index>& idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[static_cast<std::size_t>(idx[i])];
    return out;
}

Dataset two_moons(Eigen::Index n, double noise_sigma, std::uint64_t seed, double test_fraction) {
    check_config(n >= 2 && n % 2 == 0, "two_moons: n must be even and >= 2");
    check_config(noise_sigma >= 0.0, "two_moons: noise_sigma must be non-negative");

    const Eigen::Index half = n / 2;
    Dataset ds;
    ds.features.resize(n, 2);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.classes = 2;

    Rng rng(seed);
    for (Eigen::Index i = 0; i < half; ++i) {
        const double t = std::numbers::pi * static_cast<double>(i) / static_cast<double>(half);
        ds.features(i, 0) = std::cos(t);
        ds.features(i, 1) = std::sin(t);
        ds.labels[static_cast<std::size_t>(i)] = 0;
        ds.features(half + i, 0) = 1.0 - std::cos(t);
        ds.features(half + i, 1) = 0.5 - std::sin(t);
        ds.labels[static_cast<std::size_t>(half + i)] = 1;
    }
    if (noise_sigma > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            ds.features(i, 0) += noise_sigma * rng.normal();
            ds.features(i, 1) += noise_sigma * rng.normal();
        }
    }

    Rng split_rng(mix_seed(seed, kSplitStream));
    assign_split(ds, test_fraction, split_rng);
    return ds;
}

Dataset gaussian_blobs(Eigen::Index n, int k, double separation, std::uint64_t seed,
                       double test_fraction) {
    check_config(k >= 2, "gaussian_blobs: k must be >= 2");
    check_config(n % k == 0, "gaussian_blobs: n must be divisible by k");

    const Eigen::Index per_class = n / k;
    Dataset ds;
    ds.features.resize(n, 2);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.classes = k;

    Rng rng(seed);
    for (int c = 0; c < k; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / k;
        const double cx = separation * std::cos(angle);
        const double cy = separation * std::sin(angle);
        for (Eigen::Index i = 0; i < per_class; ++i) {
            const Eigen::Index row = c * per_class + i;
            ds.features(row, 0) = cx + rng.normal();
            ds.features(row, 1) = cy + rng.normal();
            ds.labels[static_cast<std::size_t>(row)] = c;
        }
    }

    Rng split_rng(mix_seed(seed, kSplitStream));
    assign_split(ds, test_fraction, split_rng);
    return ds;
}

Dataset spirals(Eigen::Index n, double turns, double noise_sigma, std::uint64_t seed, int arms,
                double test_fraction) {
    check_config(arms >= 2, "spirals: arms must be >= 2");
    check_config(n % arms == 0, "spirals: n must be divisible by arms");
    check_config(noise_sigma >= 0.0, "spirals: noise_sigma must be non-negative");

    const Eigen::Index per_arm = n / arms;
    Dataset ds;
    ds.features.resize(n, 2);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.classes = arms;

    Rng rng(seed);
    for (int a = 0; a < arms; ++a) {
        const double offset = 2.0 * std::numbers::pi * static_cast<double>(a) / arms;
        for (Eigen::Index i = 0; i < per_arm; ++i) {
            const double s = static_cast<double>(i + 1) / static_cast<double>(per_arm);
            const double angle = 2.0 * std::numbers::pi * turns * s + offset;
            const Eigen::Index row = a * per_arm + i;
            ds.features(row, 0) = s * std::cos(angle);
            ds.features(row, 1) = s * std::sin(angle);
            ds.labels[static_cast<std::size_t>(row)] = a;
        }
    }
    if (noise_sigma > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            ds.features(i, 0) += noise_sigma * rng.normal();
            ds.features(i, 1) += noise_sigma * rng.normal();
        }
    }

    Rng split_rng(mix_seed(seed, kSplitStream));
    assign_split(ds, test_fraction, split_rng);
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 double test_fraction) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open \"" + path.string() + "\"");

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("\"" + path.string() + "\" is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_line(line);

    std::ptrdiff_t label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_col = static_cast<std::ptrdiff_t>(i);
    }
    check_config(label_col >= 0, "label column \"" + label_column + "\" not found in \"" +
                              path.string() + "\"");

    std::vector<std::vector<double>> rows;
    std::vector<long long> raw_labels;
    long long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
        }
        std::vector<double> features;
        features.reserve(cells.size() - 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            std::size_t consumed = 0;
            double value = 0.0;
            try {
                value = std::stod(cells[i], &consumed);
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                            ": cannot parse \"" + cells[i] + "\" as a number");
            }
            if (consumed != cells[i].size()) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                            ": cannot parse \"" + cells[i] + "\" as a number");
            }
            if (static_cast<std::ptrdiff_t>(i) == label_col) {
                if (value != std::floor(value)) {
                    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": label \"" +
                                cells[i] + "\" is not an integer");
                }
                raw_labels.push_back(static_cast<long long>(value));
            } else {
                features.push_back(value);
            }
        }
        rows.push_back(std::move(features));
    }
    check_config(!rows.empty(), "\"" + path.string() + "\" contains no data rows");

    // dense re-indexing in ascending label-value order
    std::vector<long long> distinct = raw_labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    Dataset ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    check_config(d >= 1, "\"" + path.string() + "\" has no feature columns");
    ds.features.resize(n, d);
    ds.labels.resize(rows.size());
    ds.classes = static_cast<int>(distinct.size());
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c)
            ds.features(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        const auto it =
            std::lower_bound(distinct.begin(), distinct.end(), raw_labels[static_cast<std::size_t>(r)]);
        ds.labels[static_cast<std::size_t>(r)] = static_cast<int>(it - distinct.begin());
    }

    check_config(test_fraction >= 0.0 && test_fraction < 1.0, "test_fraction must be in [0, 1)");
    const auto n_test =
        static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
    for (Eigen::Index i = 0; i < n - n_test; ++i) ds.train_indices.push_back(i);
    for (Eigen::Index i = n - n_test; i < n; ++i) ds.test_indices.push_back(i);
    return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column) {
    std::string out;
    for (Eigen::Index c = 0; c < dataset.feature_dim(); ++c)
        out += "f" + std::to_string(c) + ",";
    out += label_column + "\n";
    for (Eigen::Index r = 0; r < dataset.rows(); ++r) {
        for (Eigen::Index c = 0; c < dataset.feature_dim(); ++c)
            out += fmt_double(dataset.features(r, c)) + ",";
        out += std::to_string(dataset.labels[static_cast<std::size_t>(r)]) + "\n";
    }
    write_file_atomic(path, out);
}

std::vector<std::vector<Eigen::Index>> minibatches(const Dataset& dataset, Eigen::Index batchsize,
                                                   std::uint64_t seed, long long epoch) {
    const auto n_train = dataset.train_size();
    check_config(batchsize >= 1 && batchsize <= n_train,
                 "minibatches: batchsize must be in [1, n_train]");

    std::vector<Eigen::Index> order = dataset.train_indices;
    if (batchsize < n_train) {
        Rng rng(mix_seed(mix_seed(seed, kBatchStream), static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
    }
    std::vector<std::vector<Eigen::Index>> batches;
    for (Eigen::Index begin = 0; begin < n_train; begin += batchsize) {
        const Eigen::Index end = std::min(begin + batchsize, n_train);
        batches.emplace_back(order.begin() + begin, order.begin() + end);
    }
    return batches;
}

} // namespace cyclelr
