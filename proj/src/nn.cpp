#include "cyclelr/nn.hpp"

#include <cmath>

#include "cyclelr/common.hpp"
#include "cyclelr/rng.hpp"

namespace cyclelr {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation \"" + name + "\"");
}

struct Mlp::ForwardCache {
    std::vector<Matrix> inputs;    // input to every layer
    std::vector<Matrix> bn_xhat;   // batchnorm layers only
    std::vector<Vector> bn_inv_std;
    std::vector<Matrix> act_out;   // activation layers only
};

Mlp Mlp::make(int input_dim, const ModelSpec& spec, int n_classes, std::uint64_t seed,
              double bn_eps, double bn_momentum) {
    check_config(input_dim >= 1, "model requires input_dim >= 1");
    check_config(n_classes >= 2, "model requires at least 2 classes");

    Mlp model;
    model.input_dim_ = input_dim;
    model.output_dim_ = n_classes;

    int in_dim = input_dim;
    for (const auto& layer : spec.hidden) {
        check_config(layer.units >= 1, "hidden layer requires units >= 1");
        model.layers_.push_back(
            Dense{Matrix::Zero(layer.units, in_dim), Vector::Zero(layer.units)});
        if (layer.batchnorm) {
            BatchNorm bn;
            bn.scale = Vector::Ones(layer.units);
            bn.shift = Vector::Zero(layer.units);
            bn.running_mean = Vector::Zero(layer.units);
            bn.running_var = Vector::Ones(layer.units);
            bn.eps = bn_eps;
            bn.momentum = bn_momentum;
            model.layers_.push_back(bn);
        }
        model.layers_.push_back(Act{layer.activation});
        in_dim = layer.units;
    }
    model.layers_.push_back(Dense{Matrix::Zero(n_classes, in_dim), Vector::Zero(n_classes)});

    Rng rng(seed);
    for (std::size_t i = 0; i < model.layers_.size(); ++i) {
        auto* dense = std::get_if<Dense>(&model.layers_[i]);
        if (!dense) continue;
        // the activation that consumes this layer (possibly behind batchnorm)
        // picks the init scale; the output layer gets Glorot
        bool relu_next = false;
        for (std::size_t j = i + 1; j < model.layers_.size(); ++j) {
            if (std::holds_alternative<BatchNorm>(model.layers_[j])) continue;
            if (auto* act = std::get_if<Act>(&model.layers_[j]))
                relu_next = act->fn == Activation::relu;
            break;
        }
        const double fan_in = static_cast<double>(dense->w.cols());
        const double fan_out = static_cast<double>(dense->w.rows());
        const double stddev =
            relu_next ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
        for (Eigen::Index r = 0; r < dense->w.rows(); ++r)
            for (Eigen::Index c = 0; c < dense->w.cols(); ++c)
                dense->w(r, c) = stddev * rng.normal();
    }
    return model;
}

Matrix Mlp::forward_impl(const Matrix& x, bool train, bool update_running, ForwardCache* cache) {
    Matrix cur = x;
    for (auto& layer : layers_) {
        if (cache) cache->inputs.push_back(cur);
        if (auto* dense = std::get_if<Dense>(&layer)) {
            check(cur.cols() == dense->w.cols(),
                  "forward: input has " + std::to_string(cur.cols()) +
                      " features, layer expects " + std::to_string(dense->w.cols()));
            cur = (cur * dense->w.transpose()).rowwise() + dense->b.transpose();
        } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
            const double n = static_cast<double>(cur.rows());
            Eigen::RowVectorXd mean, var;
            if (train) {
                mean = cur.colwise().mean();
                var = (cur.rowwise() - mean).array().square().matrix().colwise().sum() / n;
                if (update_running) {
                    bn->running_mean =
                        bn->momentum * bn->running_mean + (1.0 - bn->momentum) * mean.transpose();
                    bn->running_var =
                        bn->momentum * bn->running_var + (1.0 - bn->momentum) * var.transpose();
                }
            } else {
                mean = bn->running_mean.transpose();
                var = bn->running_var.transpose();
            }
            const Eigen::RowVectorXd inv_std = (var.array() + bn->eps).rsqrt().matrix();
            const Matrix xhat =
                ((cur.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
            if (cache) {
                cache->bn_xhat.push_back(xhat);
                cache->bn_inv_std.push_back(inv_std.transpose());
            }
            cur = ((xhat.array().rowwise() * bn->scale.transpose().array()).rowwise() +
                   bn->shift.transpose().array())
                      .matrix();
        } else {
            const auto& act = std::get<Act>(layer);
            switch (act.fn) {
                case Activation::relu: cur = cur.cwiseMax(0.0); break;
                case Activation::sigmoid:
                    cur = ((-cur.array()).exp() + 1.0).inverse().matrix();
                    break;
                case Activation::tanh: cur = cur.array().tanh().matrix(); break;
            }
            if (cache) cache->act_out.push_back(cur);
        }
    }
    return cur;
}

Matrix Mlp::forward(const Matrix& x) {
    return forward_impl(x, mode_ == Mode::train, mode_ == Mode::train, nullptr);
}

double softmax_cross_entropy(const Matrix& scores, const std::vector<int>& labels) {
    check(static_cast<std::size_t>(scores.rows()) == labels.size(),
          "loss: scores/labels length mismatch");
    const Eigen::Index n = scores.rows();
    const Eigen::Index k = scores.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        check(y >= 0 && y < k,
              "loss: label " + std::to_string(y) + " out of range [0, " + std::to_string(k) + ")");
        const double m = scores.row(i).maxCoeff();
        const double lse = std::log((scores.row(i).array() - m).exp().sum());
        total += lse - (scores(i, y) - m);
    }
    return total / static_cast<double>(n);
}

double Mlp::loss(const Matrix& x, const std::vector<int>& labels) {
    return softmax_cross_entropy(forward(x), labels);
}

namespace {

Eigen::Index layer_param_count(const Mlp::Layer& layer) {
    if (auto* dense = std::get_if<Mlp::Dense>(&layer)) return dense->w.size() + dense->b.size();
    if (auto* bn = std::get_if<Mlp::BatchNorm>(&layer)) return bn->scale.size() + bn->shift.size();
    return 0;
}

void pack_matrix_row_major(const Matrix& m, Vector& flat, Eigen::Index& pos) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat[pos++] = m(r, c);
}

void unpack_matrix_row_major(Matrix& m, const Vector& flat, Eigen::Index& pos) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[pos++];
}

} // namespace

Eigen::Index Mlp::param_count() const {
    Eigen::Index total = 0;
    for (const auto& layer : layers_) total += layer_param_count(layer);
    return total;
}

Vector Mlp::params() const {
    Vector flat(param_count());
    Eigen::Index pos = 0;
    for (const auto& layer : layers_) {
        if (auto* dense = std::get_if<Dense>(&layer)) {
            pack_matrix_row_major(dense->w, flat, pos);
            flat.segment(pos, dense->b.size()) = dense->b;
            pos += dense->b.size();
        } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
            flat.segment(pos, bn->scale.size()) = bn->scale;
            pos += bn->scale.size();
            flat.segment(pos, bn->shift.size()) = bn->shift;
            pos += bn->shift.size();
        }
    }
    return flat;
}

void Mlp::set_params(const Vector& flat) {
    check(flat.size() == param_count(), "set_params: flat view length mismatch");
    Eigen::Index pos = 0;
    for (auto& layer : layers_) {
        if (auto* dense = std::get_if<Dense>(&layer)) {
            unpack_matrix_row_major(dense->w, flat, pos);
            dense->b = flat.segment(pos, dense->b.size());
            pos += dense->b.size();
        } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
            bn->scale = flat.segment(pos, bn->scale.size());
            pos += bn->scale.size();
            bn->shift = flat.segment(pos, bn->shift.size());
            pos += bn->shift.size();
        }
    }
}

std::pair<double, Vector> Mlp::loss_and_grad(const Matrix& x, const std::vector<int>& labels) {
    const bool train = mode_ == Mode::train;
    ForwardCache cache;
    const Matrix scores = forward_impl(x, train, train, &cache);
    const double loss_value = softmax_cross_entropy(scores, labels);

    const Eigen::Index n = scores.rows();
    // d(loss)/d(scores) = (softmax - onehot) / n
    Matrix d(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = scores.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
        d.row(i) = e / e.sum();
        d(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    d /= static_cast<double>(n);

    std::vector<Vector> layer_grads(layers_.size());
    std::size_t bn_seen = cache.bn_xhat.size();
    std::size_t act_seen = cache.act_out.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Matrix& input = cache.inputs[li];
        if (auto* dense = std::get_if<Dense>(&layers_[li])) {
            const Matrix dw = d.transpose() * input;
            const Vector db = d.colwise().sum().transpose();
            Vector grads(dw.size() + db.size());
            Eigen::Index pos = 0;
            pack_matrix_row_major(dw, grads, pos);
            grads.segment(pos, db.size()) = db;
            layer_grads[li] = std::move(grads);
            d = d * dense->w;
        } else if (auto* bn = std::get_if<BatchNorm>(&layers_[li])) {
            const Matrix& xhat = cache.bn_xhat[--bn_seen];
            const Eigen::RowVectorXd inv_std = cache.bn_inv_std[bn_seen].transpose();
            const Vector dscale = (d.array() * xhat.array()).matrix().colwise().sum().transpose();
            const Vector dshift = d.colwise().sum().transpose();
            Vector grads(dscale.size() + dshift.size());
            grads << dscale, dshift;
            layer_grads[li] = std::move(grads);

            const Matrix dxhat = (d.array().rowwise() * bn->scale.transpose().array()).matrix();
            if (train) {
                const double rows = static_cast<double>(d.rows());
                const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
                const Eigen::RowVectorXd sum_dxhat_xhat =
                    (dxhat.array() * xhat.array()).matrix().colwise().sum();
                Matrix tmp = rows * dxhat;
                tmp.rowwise() -= sum_dxhat;
                tmp -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
                d = ((tmp.array().rowwise() * inv_std.array()) / rows).matrix();
            } else {
                d = (dxhat.array().rowwise() * inv_std.array()).matrix();
            }
        } else {
            const auto& act = std::get<Act>(layers_[li]);
            switch (act.fn) {
                case Activation::relu:
                    d = d.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
                    --act_seen;
                    break;
                case Activation::sigmoid: {
                    const Matrix& y = cache.act_out[--act_seen];
                    d = d.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
                    break;
                }
                case Activation::tanh: {
                    const Matrix& y = cache.act_out[--act_seen];
                    d = d.cwiseProduct((1.0 - y.array().square()).matrix());
                    break;
                }
            }
        }
    }

    Vector flat(param_count());
    Eigen::Index pos = 0;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        if (layer_grads[li].size() > 0) {
            flat.segment(pos, layer_grads[li].size()) = layer_grads[li];
            pos += layer_grads[li].size();
        }
    }
    return {loss_value, std::move(flat)};
}

GradCheckReport grad_check(Mlp& model, const Matrix& x, const std::vector<int>& labels,
                           double fd_step) {
    check(fd_step > 0.0, "grad_check: fd_step must be positive");
    check(model.param_count() < 10000, "grad_check: model too large for finite differences");

    // snapshot batchnorm running stats so the repeated forwards leave no trace
    std::vector<std::pair<Vector, Vector>> running;
    for (const auto& layer : model.layers()) {
        if (auto* bn = std::get_if<Mlp::BatchNorm>(&layer))
            running.emplace_back(bn->running_mean, bn->running_var);
    }

    const auto [loss0, analytic] = model.loss_and_grad(x, labels);
    (void)loss0;
    const Vector base = model.params();

    struct BlockRange {
        std::string name;
        Eigen::Index begin, end;
    };
    std::vector<BlockRange> ranges;
    Eigen::Index pos = 0;
    for (std::size_t li = 0; li < model.layers().size(); ++li) {
        const auto& layer = model.layers()[li];
        const std::string prefix = "layer" + std::to_string(li);
        if (auto* dense = std::get_if<Mlp::Dense>(&layer)) {
            ranges.push_back({prefix + ".w", pos, pos + dense->w.size()});
            pos += dense->w.size();
            ranges.push_back({prefix + ".b", pos, pos + dense->b.size()});
            pos += dense->b.size();
        } else if (auto* bn = std::get_if<Mlp::BatchNorm>(&layer)) {
            ranges.push_back({prefix + ".scale", pos, pos + bn->scale.size()});
            pos += bn->scale.size();
            ranges.push_back({prefix + ".shift", pos, pos + bn->shift.size()});
            pos += bn->shift.size();
        }
    }

    GradCheckReport report;
    Vector perturbed = base;
    for (const auto& range : ranges) {
        double block_err = 0.0;
        for (Eigen::Index i = range.begin; i < range.end; ++i) {
            perturbed[i] = base[i] + fd_step;
            model.set_params(perturbed);
            const double up = model.loss(x, labels);
            perturbed[i] = base[i] - fd_step;
            model.set_params(perturbed);
            const double down = model.loss(x, labels);
            perturbed[i] = base[i];

            const double numeric = (up - down) / (2.0 * fd_step);
            const double a = analytic[i];
            double err;
            if (std::fabs(a) < 1e-8 && std::fabs(numeric) < 1e-8) {
                err = std::fabs(a - numeric);  // absolute fallback at zero-gradient points
            } else {
                err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-12});
            }
            block_err = std::max(block_err, err);
        }
        report.blocks.push_back({range.name, block_err});
        report.max_relative_error = std::max(report.max_relative_error, block_err);
    }

    model.set_params(base);
    std::size_t ri = 0;
    for (auto& layer : model.layers()) {
        if (auto* bn = std::get_if<Mlp::BatchNorm>(&layer)) {
            bn->running_mean = running[ri].first;
            bn->running_var = running[ri].second;
            ++ri;
        }
    }
    return report;
}

} // namespace cyclelr
