#include <cmath>
#include <doctest.h>

#include "cyclelr/common.hpp"
#include "cyclelr/nn.hpp"
#include "cyclelr/rng.hpp"

using namespace cyclelr;

namespace {

Matrix random_batch(Rng& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = scale * rng.normal();
    return x;
}

std::vector<int> random_labels(Rng& rng, Eigen::Index n, int k) {
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    return y;
}

} // namespace

TEST_CASE("zero model produces zero scores and ln(k) loss") {
    ModelSpec spec;  // no hidden layers: a bare linear classifier
    Mlp model = Mlp::make(3, spec, 4, 7);
    for (auto& layer : model.layers()) {
        if (auto* dense = std::get_if<Mlp::Dense>(&layer)) dense->w.setZero();
    }
    Rng rng(1);
    const Matrix x = random_batch(rng, 8, 3);
    CHECK(model.forward(x).cwiseAbs().maxCoeff() == 0.0);

    const auto y = random_labels(rng, 8, 4);
    CHECK(model.loss(x, y) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("identity dense passes input through") {
    ModelSpec spec;
    Mlp model = Mlp::make(3, spec, 3, 7);
    auto& dense = std::get<Mlp::Dense>(model.layers()[0]);
    dense.w.setIdentity();
    dense.b.setZero();
    Rng rng(2);
    const Matrix x = random_batch(rng, 5, 3);
    CHECK((model.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("large-margin one-hot scores drive the loss to zero") {
    ModelSpec spec;
    Mlp model = Mlp::make(3, spec, 3, 7);
    auto& dense = std::get<Mlp::Dense>(model.layers()[0]);
    dense.w = 50.0 * Matrix::Identity(3, 3);
    dense.b.setZero();
    Matrix x = Matrix::Identity(3, 3);  // one-hot inputs matching their labels
    const std::vector<int> y = {0, 1, 2};
    CHECK(model.loss(x, y) < 1e-8);
}

TEST_CASE("batchnorm normalizes to zero mean unit variance in train mode") {
    ModelSpec spec;
    spec.hidden = {{4, Activation::tanh, true}};
    Mlp model = Mlp::make(4, spec, 2, 7);
    std::get<Mlp::Dense>(model.layers()[0]).w.setIdentity();

    Rng rng(3);
    const Matrix x = random_batch(rng, 256, 4, 3.0);

    // truncate after the batchnorm (unit scale, zero shift) to observe the
    // normalized values directly
    Mlp probe = model;
    probe.layers().resize(2);
    probe.set_mode(Mode::train);
    const Matrix normalized = probe.forward(x);
    for (Eigen::Index j = 0; j < 4; ++j) {
        const double mean = normalized.col(j).mean();
        const double var =
            (normalized.col(j).array() - mean).square().sum() / static_cast<double>(x.rows());
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // off by var/(var+eps)
    }
}

TEST_CASE("batchnorm running stats converge to the batch stats") {
    ModelSpec spec;
    spec.hidden = {{2, Activation::relu, true}};
    Mlp model = Mlp::make(2, spec, 2, 7);
    std::get<Mlp::Dense>(model.layers()[0]).w.setIdentity();

    Rng rng(4);
    const Matrix x = random_batch(rng, 64, 2, 2.0);
    model.set_mode(Mode::train);
    for (int i = 0; i < 200; ++i) (void)model.forward(x);

    const auto& bn = std::get<Mlp::BatchNorm>(model.layers()[1]);
    const double mean0 = x.col(0).mean();
    CHECK(bn.running_mean[0] == doctest::Approx(mean0).epsilon(1e-6));

    SUBCASE("eval mode is a pure function") {
        model.set_mode(Mode::eval);
        const Vector rm = bn.running_mean;
        const Matrix a = model.forward(x);
        const Matrix b = model.forward(x);
        CHECK(a == b);
        CHECK(std::get<Mlp::BatchNorm>(model.layers()[1]).running_mean == rm);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    ModelSpec spec;
    Mlp model = Mlp::make(3, spec, 2, 7);
    Rng rng(5);
    const Matrix bad = random_batch(rng, 4, 5);
    CHECK_THROWS_AS((void)model.forward(bad), Error);
}

TEST_CASE("invalid label is rejected") {
    ModelSpec spec;
    Mlp model = Mlp::make(2, spec, 2, 7);
    Rng rng(6);
    const Matrix x = random_batch(rng, 3, 2);
    CHECK_THROWS_AS((void)model.loss(x, {0, 1, 2}), Error);
}

TEST_CASE("init is seed deterministic with zero biases") {
    ModelSpec spec;
    spec.hidden = {{16, Activation::relu, true}, {8, Activation::sigmoid, false}};
    const Mlp a = Mlp::make(4, spec, 3, 1234);
    const Mlp b = Mlp::make(4, spec, 3, 1234);
    const Mlp c = Mlp::make(4, spec, 3, 1235);
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());

    for (const auto& layer : a.layers()) {
        if (auto* dense = std::get_if<Mlp::Dense>(&layer)) {
            CHECK(dense->b.cwiseAbs().maxCoeff() == 0.0);
        } else if (auto* bn = std::get_if<Mlp::BatchNorm>(&layer)) {
            CHECK(bn->scale == Vector::Ones(bn->scale.size()));
            CHECK(bn->shift == Vector::Zero(bn->shift.size()));
        }
    }
}

TEST_CASE("he init variance tracks 2/fan_in") {
    ModelSpec spec;
    spec.hidden = {{200, Activation::relu, false}};
    const Mlp model = Mlp::make(200, spec, 2, 99);
    const auto& dense = std::get<Mlp::Dense>(model.layers()[0]);
    const double mean = dense.w.mean();
    const double var = (dense.w.array() - mean).square().sum() /
                       static_cast<double>(dense.w.size());
    const double expected = 2.0 / 200.0;
    CHECK(var > 0.8 * expected);
    CHECK(var < 1.2 * expected);
}

TEST_CASE("gradient matches central differences") {
    Rng rng(40);

    SUBCASE("linear softmax model") {
        ModelSpec spec;
        Mlp model = Mlp::make(4, spec, 3, 11);
        const Matrix x = random_batch(rng, 16, 4);
        const auto y = random_labels(rng, 16, 3);
        const auto report = grad_check(model, x, y);
        CHECK(report.max_relative_error < 1e-6);
    }
    SUBCASE("two layer relu") {
        ModelSpec spec;
        spec.hidden = {{8, Activation::relu, false}, {8, Activation::relu, false}};
        Mlp model = Mlp::make(4, spec, 3, 12);
        const Matrix x = random_batch(rng, 16, 4);
        const auto y = random_labels(rng, 16, 3);
        const auto report = grad_check(model, x, y);
        CHECK(report.max_relative_error < 1e-4);
    }
    SUBCASE("sigmoid") {
        ModelSpec spec;
        spec.hidden = {{8, Activation::sigmoid, false}};
        Mlp model = Mlp::make(4, spec, 3, 13);
        const Matrix x = random_batch(rng, 16, 4);
        const auto y = random_labels(rng, 16, 3);
        const auto report = grad_check(model, x, y);
        CHECK(report.max_relative_error < 1e-4);
    }
    SUBCASE("sigmoid with batchnorm in train mode") {
        ModelSpec spec;
        spec.hidden = {{8, Activation::sigmoid, true}};
        Mlp model = Mlp::make(4, spec, 3, 14);
        const Matrix x = random_batch(rng, 16, 4);
        const auto y = random_labels(rng, 16, 3);

        const auto& bn = std::get<Mlp::BatchNorm>(model.layers()[1]);
        const Vector rm_before = bn.running_mean;
        const auto report = grad_check(model, x, y);
        CHECK(report.max_relative_error < 1e-4);
        CHECK(bn.running_mean == rm_before);  // grad_check restores the model
        CHECK(report.blocks.size() == 6);     // w, b, scale, shift, w, b
    }
    SUBCASE("tanh with batchnorm in eval mode") {
        ModelSpec spec;
        spec.hidden = {{6, Activation::tanh, true}};
        Mlp model = Mlp::make(4, spec, 3, 15);
        model.set_mode(Mode::eval);
        const Matrix x = random_batch(rng, 16, 4);
        const auto y = random_labels(rng, 16, 3);
        const auto report = grad_check(model, x, y);
        CHECK(report.max_relative_error < 1e-4);
    }
}

TEST_CASE("zero-gradient point reports a tiny absolute error") {
    // zero weights and zero inputs with balanced labels: the gradient
    // vanishes identically and the check falls back to absolute error
    ModelSpec spec;
    Mlp model = Mlp::make(2, spec, 2, 16);
    for (auto& layer : model.layers()) {
        if (auto* dense = std::get_if<Mlp::Dense>(&layer)) dense->w.setZero();
    }
    const Matrix x = Matrix::Zero(4, 2);
    const std::vector<int> y = {0, 1, 0, 1};

    const auto [loss, grad] = model.loss_and_grad(x, y);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);

    const auto report = grad_check(model, x, y);
    CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("flat view round trips and the gradient matches its length") {
    ModelSpec spec;
    spec.hidden = {{5, Activation::tanh, true}, {3, Activation::relu, false}};
    Mlp model = Mlp::make(4, spec, 2, 77);
    // dense 5x4+5, bn 5+5, dense 3x5+3, dense 2x3+2
    CHECK(model.param_count() == 25 + 10 + 18 + 8);

    Rng rng(42);
    Vector v(model.param_count());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    model.set_params(v);
    CHECK(model.params() == v);

    const Matrix x = random_batch(rng, 8, 4);
    const auto [loss, grad] = model.loss_and_grad(x, random_labels(rng, 8, 2));
    CHECK(std::isfinite(loss));
    CHECK(grad.size() == model.param_count());

    CHECK_THROWS_AS(model.set_params(Vector::Zero(3)), Error);
}

TEST_CASE("train mode forward mutates only batchnorm running stats") {
    ModelSpec spec;
    spec.hidden = {{4, Activation::relu, true}};
    Mlp model = Mlp::make(3, spec, 2, 17);
    Rng rng(41);
    const Matrix x = random_batch(rng, 32, 3);

    const Vector params_before = model.params();
    model.set_mode(Mode::train);
    (void)model.forward(x);
    CHECK(model.params() == params_before);  // trainables untouched

    const auto& bn = std::get<Mlp::BatchNorm>(model.layers()[1]);
    CHECK(bn.running_mean.cwiseAbs().maxCoeff() > 0.0);  // stats moved off init
}
