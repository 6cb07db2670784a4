#include <cmath>
#include <doctest.h>
#include <limits>

#include "cyclelr/common.hpp"
#include "cyclelr/optim.hpp"
#include "cyclelr/rng.hpp"
#include "cyclelr/schedules.hpp"

using namespace cyclelr;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

Eigen::VectorXd random_vec(Rng& rng, Eigen::Index n, double scale) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
    return v;
}

} // namespace

TEST_CASE("sgd step") {
    Eigen::VectorXd p = vec({1.0});
    sgd_step(p, vec({0.5}), 0.1);
    CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));

    Eigen::VectorXd q = vec({3.5, -2.0});
    sgd_step(q, vec({0.0, 0.0}), 0.5);
    CHECK(q[0] == 3.5);
    CHECK(q[1] == -2.0);

    Eigen::VectorXd r = vec({0.0});
    sgd_step(r, vec({1.0}), 0.006);
    CHECK(r[0] == -0.006);
}

TEST_CASE("nesterov step") {
    SUBCASE("first step from rest") {
        auto state = make_optimizer(OptimizerKind::nesterov, 1);
        Eigen::VectorXd p = vec({0.0});
        nesterov_step(p, vec({1.0}), 0.1, state);
        CHECK(state.velocity[0] == doctest::Approx(-0.1).epsilon(1e-15));
        CHECK(p[0] == doctest::Approx(-0.19).epsilon(1e-15));
    }
    SUBCASE("zero momentum reduces to sgd exactly") {
        auto state = make_optimizer(OptimizerKind::nesterov, 3);
        state.momentum = 0.0;
        Rng rng(11);
        Eigen::VectorXd p = random_vec(rng, 3, 1.0);
        Eigen::VectorXd p_sgd = p;
        const Eigen::VectorXd g = random_vec(rng, 3, 1.0);
        nesterov_step(p, g, 0.05, state);
        sgd_step(p_sgd, g, 0.05);
        CHECK(p == p_sgd);
    }
    SUBCASE("with zero gradient the step decays by momentum") {
        auto state = make_optimizer(OptimizerKind::nesterov, 1);
        Eigen::VectorXd p = vec({0.0});
        nesterov_step(p, vec({1.0}), 0.1, state);  // warm up the velocity
        const Eigen::VectorXd zero = vec({0.0});
        double prev_delta = 0.0;
        for (int i = 0; i < 5; ++i) {
            const double before = p[0];
            nesterov_step(p, zero, 0.1, state);
            const double delta = p[0] - before;
            if (i > 0) CHECK(delta / prev_delta == doctest::Approx(0.9).epsilon(1e-12));
            prev_delta = delta;
        }
    }
}

TEST_CASE("adam first step is close to minus lr") {
    auto state = make_optimizer(OptimizerKind::adam, 1);
    Eigen::VectorXd p = vec({0.0});
    adam_step(p, vec({1.0}), 0.001, state);
    CHECK(std::fabs(p[0] + 0.001) < 1e-10);
    CHECK(state.step_count == 1);
}

TEST_CASE("adagrad steps shrink like 1/sqrt(t)") {
    auto state = make_optimizer(OptimizerKind::adagrad, 1);
    Eigen::VectorXd p = vec({0.0});
    const Eigen::VectorXd g = vec({1.0});
    double prev = 0.0;
    for (int t = 1; t <= 50; ++t) {
        const double before = p[0];
        adagrad_step(p, g, 0.1, state);
        const double magnitude = std::fabs(p[0] - before);
        CHECK(magnitude == doctest::Approx(0.1 / std::sqrt(t)).epsilon(1e-6));
        if (t > 1) CHECK(magnitude < prev);
        prev = magnitude;
    }
}

TEST_CASE("zero gradient with zeroed state moves nothing") {
    for (const auto kind : {OptimizerKind::sgd, OptimizerKind::nesterov, OptimizerKind::adagrad,
                            OptimizerKind::rmsprop, OptimizerKind::adadelta, OptimizerKind::adam}) {
        auto state = make_optimizer(kind, 4);
        Eigen::VectorXd p = vec({1.0, -2.0, 0.5, 3.0});
        const Eigen::VectorXd before = p;
        optimizer_step(state, p, Eigen::VectorXd::Zero(4), 0.1);
        INFO("kind ", to_string(kind));
        CHECK(p == before);
        CHECK(state.step_count == 1);
    }
}

TEST_CASE("doubling lr exactly doubles a single step from fresh state") {
    // deltas are read off zeroed parameters so no addition rounding creeps in
    Rng rng(21);
    for (const auto kind : {OptimizerKind::sgd, OptimizerKind::nesterov, OptimizerKind::adagrad,
                            OptimizerKind::rmsprop, OptimizerKind::adadelta, OptimizerKind::adam}) {
        for (int trial = 0; trial < 50; ++trial) {
            const Eigen::VectorXd g = random_vec(rng, 8, 0.5);
            const double lr = std::fabs(rng.normal()) * 0.01 + 1e-4;

            auto s1 = make_optimizer(kind, 8);
            auto s2 = make_optimizer(kind, 8);
            Eigen::VectorXd d1 = Eigen::VectorXd::Zero(8);
            Eigen::VectorXd d2 = Eigen::VectorXd::Zero(8);
            optimizer_step(s1, d1, g, lr);
            optimizer_step(s2, d2, g, 2.0 * lr);

            INFO("kind ", to_string(kind));
            CHECK(d2 == 2.0 * d1);
        }
    }
}

TEST_CASE("triangular lr gives identical deltas one cycle apart") {
    // power-of-two stepsize so t/stepsize carries no rounding at all
    Rng rng(22);
    const auto spec = PolicySpec::make_triangular(0.001, 0.006, 256);
    for (const auto kind : {OptimizerKind::sgd, OptimizerKind::nesterov, OptimizerKind::adagrad,
                            OptimizerKind::rmsprop, OptimizerKind::adadelta, OptimizerKind::adam}) {
        for (int trial = 0; trial < 20; ++trial) {
            const long long t = static_cast<long long>(rng.below(2048));
            const Eigen::VectorXd g = random_vec(rng, 6, 0.5);

            auto warm = make_optimizer(kind, 6);
            Eigen::VectorXd scratch = Eigen::VectorXd::Zero(6);
            for (int w = 0; w < 3; ++w) optimizer_step(warm, scratch, g, 0.01);

            auto s1 = warm;
            auto s2 = warm;
            Eigen::VectorXd d1 = Eigen::VectorXd::Zero(6);
            Eigen::VectorXd d2 = Eigen::VectorXd::Zero(6);
            REQUIRE(lr_triangular(t, spec) == lr_triangular(t + 512, spec));
            optimizer_step(s1, d1, g, lr_triangular(t, spec));
            optimizer_step(s2, d2, g, lr_triangular(t + 512, spec));
            INFO("kind ", to_string(kind), " t ", t);
            CHECK(d1 == d2);
        }
    }
}

TEST_CASE("non-finite gradients are rejected with the step index") {
    auto state = make_optimizer(OptimizerKind::adam, 2);
    Eigen::VectorXd p = vec({0.0, 0.0});
    optimizer_step(state, p, vec({1.0, 1.0}), 0.01);
    const Eigen::VectorXd bad = vec({1.0, std::numeric_limits<double>::quiet_NaN()});
    try {
        optimizer_step(state, p, bad, 0.01);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step_index == 1);
        CHECK(std::string(e.what()).find("element 1") != std::string::npos);
    }
}

TEST_CASE("kind defaults follow the published methods") {
    CHECK(make_optimizer(OptimizerKind::rmsprop, 1).rho == 0.99);
    CHECK(make_optimizer(OptimizerKind::rmsprop, 1).eps == 1e-8);
    CHECK(make_optimizer(OptimizerKind::adadelta, 1).rho == 0.95);
    CHECK(make_optimizer(OptimizerKind::adadelta, 1).eps == 1e-6);
    const auto adam = make_optimizer(OptimizerKind::adam, 1);
    CHECK(adam.beta1 == 0.9);
    CHECK(adam.beta2 == 0.999);
    CHECK(make_optimizer(OptimizerKind::nesterov, 1).momentum == 0.9);
}
