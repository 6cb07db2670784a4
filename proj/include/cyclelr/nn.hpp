#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cyclelr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, sigmoid, tanh };
enum class Mode { train, eval };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
    int units = 0;
    Activation activation = Activation::relu;
    bool batchnorm = false;
};

struct ModelSpec {
    std::vector<LayerSpec> hidden;
};

// Dense feed-forward classifier: per hidden layer dense -> [batchnorm] ->
// activation, then a final dense layer producing pre-softmax scores.
// Rows are samples throughout.
class Mlp {
public:
    struct Dense {
        Matrix w;  // out x in
        Vector b;  // out
    };
    struct BatchNorm {
        Vector scale, shift;
        Vector running_mean, running_var;
        double eps = 1e-5;
        double momentum = 0.9;  // fraction of the old running stat kept per batch
    };
    struct Act {
        Activation fn = Activation::relu;
    };
    using Layer = std::variant<Dense, BatchNorm, Act>;

    // Seed-deterministic initialization: He for dense layers feeding relu,
    // Glorot for sigmoid/tanh and for the output layer; biases zero;
    // batchnorm scale 1, shift 0, running stats (0, 1).
    static Mlp make(int input_dim, const ModelSpec& spec, int n_classes, std::uint64_t seed,
                    double bn_eps = 1e-5, double bn_momentum = 0.9);

    Mode mode() const { return mode_; }
    void set_mode(Mode m) { mode_ = m; }

    // Pre-softmax scores. In train mode batchnorm normalizes with batch
    // statistics and updates the running stats; in eval mode it uses the
    // running stats and nothing is mutated.
    Matrix forward(const Matrix& x);

    // Mean softmax cross-entropy over the batch (same mode semantics as forward).
    double loss(const Matrix& x, const std::vector<int>& labels);

    // Loss plus the gradient with respect to the parameter flat view.
    std::pair<double, Vector> loss_and_grad(const Matrix& x, const std::vector<int>& labels);

    // Flat view order: per layer, dense w (row-major) then b; batchnorm
    // scale then shift. Running stats are not trainable.
    Eigen::Index param_count() const;
    Vector params() const;
    void set_params(const Vector& flat);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

private:
    struct ForwardCache;
    Matrix forward_impl(const Matrix& x, bool train, bool update_running, ForwardCache* cache);

    std::vector<Layer> layers_;
    Mode mode_ = Mode::train;
    int input_dim_ = 0;
    int output_dim_ = 0;
};

double softmax_cross_entropy(const Matrix& scores, const std::vector<int>& labels);

struct GradCheckReport {
    struct Block {
        std::string name;
        double error = 0.0;
    };
    double max_relative_error = 0.0;
    std::vector<Block> blocks;
};

// Central finite differences against the analytic gradient. Per-parameter
// error is |a-n| / max(|a|, |n|, 1e-12), except where both are below
// 1e-8 in magnitude, where the absolute difference is reported instead.
// Leaves the model (including batchnorm running stats) unchanged.
GradCheckReport grad_check(Mlp& model, const Matrix& x, const std::vector<int>& labels,
                           double fd_step = 1e-5);

} // namespace cyclelr
