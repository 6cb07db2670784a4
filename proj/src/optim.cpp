#include "cyclelr/optim.hpp"

#include <cmath>

#include "cyclelr/common.hpp"

namespace cyclelr {

namespace {

void ensure_ready(const Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                  const OptimizerState& state, double lr) {
    check(params.size() == grads.size(), "optimizer: params/grads length mismatch");
    check(lr > 0.0, "optimizer: lr must be positive");
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw DivergenceError("non-finite gradient at element " + std::to_string(i) +
                                      " (optimizer step " + std::to_string(state.step_count) + ")",
                                  state.step_count);
        }
    }
}

} // namespace

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::nesterov: return "nesterov";
        case OptimizerKind::adagrad: return "adagrad";
        case OptimizerKind::rmsprop: return "rmsprop";
        case OptimizerKind::adadelta: return "adadelta";
        case OptimizerKind::adam: return "adam";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "nesterov") return OptimizerKind::nesterov;
    if (name == "adagrad") return OptimizerKind::adagrad;
    if (name == "rmsprop") return OptimizerKind::rmsprop;
    if (name == "adadelta") return OptimizerKind::adadelta;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer \"" + name + "\"");
}

OptimizerState make_optimizer(OptimizerKind kind, Eigen::Index n_params) {
    OptimizerState state;
    state.kind = kind;
    switch (kind) {
        case OptimizerKind::sgd:
            break;
        case OptimizerKind::nesterov:
            state.velocity = Eigen::VectorXd::Zero(n_params);
            break;
        case OptimizerKind::adagrad:
            state.grad_acc = Eigen::VectorXd::Zero(n_params);
            break;
        case OptimizerKind::rmsprop:
            state.rho = 0.99;
            state.eps = 1e-8;
            state.grad_acc = Eigen::VectorXd::Zero(n_params);
            break;
        case OptimizerKind::adadelta:
            state.rho = 0.95;
            state.eps = 1e-6;
            state.grad_acc = Eigen::VectorXd::Zero(n_params);
            state.delta_acc = Eigen::VectorXd::Zero(n_params);
            break;
        case OptimizerKind::adam:
            state.m1 = Eigen::VectorXd::Zero(n_params);
            state.m2 = Eigen::VectorXd::Zero(n_params);
            break;
    }
    return state;
}

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr) {
    params -= lr * grads;
}

void nesterov_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                   OptimizerState& state) {
    state.velocity = state.momentum * state.velocity - lr * grads;
    params += state.momentum * state.velocity - lr * grads;
    state.step_count += 1;
}

void adagrad_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  OptimizerState& state) {
    state.grad_acc += grads.cwiseProduct(grads);
    params -= lr * grads.cwiseQuotient(state.grad_acc.cwiseSqrt() +
                                       Eigen::VectorXd::Constant(grads.size(), state.eps));
    state.step_count += 1;
}

void rmsprop_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  OptimizerState& state) {
    state.grad_acc = state.rho * state.grad_acc + (1.0 - state.rho) * grads.cwiseProduct(grads);
    params -= lr * grads.cwiseQuotient(state.grad_acc.cwiseSqrt() +
                                       Eigen::VectorXd::Constant(grads.size(), state.eps));
    state.step_count += 1;
}

void adadelta_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                   OptimizerState& state) {
    state.grad_acc = state.rho * state.grad_acc + (1.0 - state.rho) * grads.cwiseProduct(grads);
    const Eigen::VectorXd delta =
        -(state.delta_acc.array() + state.eps)
             .sqrt()
             .cwiseQuotient((state.grad_acc.array() + state.eps).sqrt())
             .matrix()
             .cwiseProduct(grads);
    state.delta_acc = state.rho * state.delta_acc + (1.0 - state.rho) * delta.cwiseProduct(delta);
    params += lr * delta;
    state.step_count += 1;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
               OptimizerState& state) {
    const double t = static_cast<double>(state.step_count + 1);
    state.m1 = state.beta1 * state.m1 + (1.0 - state.beta1) * grads;
    state.m2 = state.beta2 * state.m2 + (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const Eigen::VectorXd m_hat = state.m1 / (1.0 - std::pow(state.beta1, t));
    const Eigen::VectorXd v_hat = state.m2 / (1.0 - std::pow(state.beta2, t));
    params -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() +
                                       Eigen::VectorXd::Constant(grads.size(), state.eps));
    state.step_count += 1;
}

void optimizer_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                    double lr) {
    ensure_ready(params, grads, state, lr);
    switch (state.kind) {
        case OptimizerKind::sgd:
            sgd_step(params, grads, lr);
            state.step_count += 1;
            break;
        case OptimizerKind::nesterov: nesterov_step(params, grads, lr, state); break;
        case OptimizerKind::adagrad: adagrad_step(params, grads, lr, state); break;
        case OptimizerKind::rmsprop: rmsprop_step(params, grads, lr, state); break;
        case OptimizerKind::adadelta: adadelta_step(params, grads, lr, state); break;
        case OptimizerKind::adam: adam_step(params, grads, lr, state); break;
    }
}

} // namespace cyclelr
