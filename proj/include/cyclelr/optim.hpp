#pragma once

#include <Eigen/Dense>
#include <string>

namespace cyclelr {

enum class OptimizerKind { sgd, nesterov, adagrad, rmsprop, adadelta, adam };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

// Per-run optimizer state. Every method takes the learning rate as an
// external per-step scalar so a schedule can drive it; for all six the
// applied update is the method's direction times lr, which makes a single
// step exactly linear in lr from fixed accumulator state.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;

    double momentum = 0.9;  // nesterov
    double rho = 0.99;      // rmsprop / adadelta accumulator decay
    double eps = 1e-8;
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;

    Eigen::VectorXd velocity;   // nesterov
    Eigen::VectorXd grad_acc;   // adagrad / rmsprop / adadelta
    Eigen::VectorXd delta_acc;  // adadelta
    Eigen::VectorXd m1, m2;     // adam moments

    // advanced by exactly 1 per step; every stateful *_step below owns it
    long long step_count = 0;
};

// Accumulators zeroed; hyperparameter defaults depend on the kind
// (rmsprop rho 0.99 eps 1e-8, adadelta rho 0.95 eps 1e-6, adam 0.9/0.999/1e-8).
OptimizerState make_optimizer(OptimizerKind kind, Eigen::Index n_params);

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr);

// v := mu*v - lr*g; params += mu*v - lr*g  (the "lookahead applied to the
// update" form used by common frameworks, not Nesterov's original one)
void nesterov_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                   OptimizerState& state);

void adagrad_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  OptimizerState& state);
void rmsprop_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  OptimizerState& state);

// Classic adadelta has no global rate; here the computed delta is scaled
// by lr on application while the delta accumulator sees the unscaled
// delta, so lr stays a pure outer gain like in the other methods.
void adadelta_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                   OptimizerState& state);

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
               OptimizerState& state);

// dispatch on state.kind; increments state.step_count by exactly 1
void optimizer_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                    double lr);

} // namespace cyclelr
