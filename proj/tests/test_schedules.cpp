#include <cmath>
#include <doctest.h>

#include "cyclelr/common.hpp"
#include "cyclelr/rng.hpp"
#include "cyclelr/schedules.hpp"

using namespace cyclelr;

namespace {

// gamma^n by repeated long double multiplication, independent of std::pow
double pow_by_walk(double gamma, long long n) {
    long double acc = 1.0L;
    for (long long i = 0; i < n; ++i) acc *= gamma;
    return static_cast<double>(acc);
}

double rel_diff(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
}

// Walks a policy iteration by iteration with integer state (within-cycle
// position, cycle counter, running gamma product) instead of the closed
// form's floor arithmetic. Checks the closed form at every step.
void walk_and_check(const PolicySpec& spec, long long iters, double tol) {
    const long long stepsize = spec.stepsize.value_or(1);
    long long pos = 0;    // within-cycle position in [0, 2*stepsize)
    long double amp = spec.max_lr ? *spec.max_lr - spec.base_lr : 0.0L;
    long double gamma_acc = 1.0L;

    for (long long te = 0; te <= iters; ++te) {
        long double expected = spec.base_lr;
        switch (spec.kind) {
            case PolicyKind::fixed: expected = spec.base_lr; break;
            case PolicyKind::exp: expected = spec.base_lr * gamma_acc; break;
            case PolicyKind::decay:
                expected = te >= stepsize
                               ? spec.base_lr
                               : *spec.max_lr - amp * te / static_cast<long double>(stepsize);
                break;
            case PolicyKind::triangular:
            case PolicyKind::triangular2:
            case PolicyKind::exp_range: {
                const long double x =
                    std::fabs(static_cast<long double>(pos) / stepsize - 1.0L);
                long double factor = 0.0L;
                switch (spec.window) {
                    case Window::triangular: factor = std::max(0.0L, 1.0L - x); break;
                    case Window::welch: factor = std::max(0.0L, 1.0L - x * x); break;
                    case Window::hann:
                        factor = 0.5L * (1.0L + std::cos(3.14159265358979323846L *
                                                         std::min(x, 1.0L)));
                        break;
                }
                if (spec.kind == PolicyKind::exp_range) factor *= gamma_acc;
                expected = spec.base_lr + amp * factor;
                break;
            }
        }
        if (te == 0 && spec.cyclic()) expected = spec.base_lr;

        const double actual = lr_at(te + spec.start, spec);
        INFO("kind ", to_string(spec.kind), " te ", te);
        CHECK(rel_diff(actual, static_cast<double>(expected)) <= tol);

        // advance the walk
        if (spec.gamma) gamma_acc *= *spec.gamma;
        if (spec.cyclic()) {
            ++pos;
            if (pos == 2 * stepsize) {
                pos = 0;
                if (spec.kind == PolicyKind::triangular2) amp *= 0.5L;
            }
        }
    }
}

PolicySpec random_banded_spec(Rng& rng, PolicyKind kind) {
    const double base = rng.uniform(1e-4, 0.1);
    const double max = base * rng.uniform(1.0, 8.0);
    const long long stepsize = 2000 + static_cast<long long>(rng.below(28001));
    switch (kind) {
        case PolicyKind::decay: return PolicySpec::make_decay(base, max, stepsize);
        case PolicyKind::triangular: return PolicySpec::make_triangular(base, max, stepsize);
        case PolicyKind::triangular2: return PolicySpec::make_triangular2(base, max, stepsize);
        case PolicyKind::exp_range:
            return PolicySpec::make_exp_range(base, max, stepsize, rng.uniform(0.999, 1.0));
        default: break;
    }
    return PolicySpec::make_fixed(base);
}

// the 1-based cycle-counter formulation of triangular
double cycle_counter_triangular(long long t, const PolicySpec& spec) {
    const long long te = t - spec.start;
    if (te <= 0) return spec.base_lr;
    const double stepsize = static_cast<double>(*spec.stepsize);
    const double cycle = std::floor(1.0 + static_cast<double>(te) / (2.0 * stepsize));
    const double x = std::fabs(static_cast<double>(te) / stepsize - 2.0 * cycle + 1.0);
    return spec.base_lr + (*spec.max_lr - spec.base_lr) * std::max(0.0, 1.0 - x);
}

// the equivalent 0-based formulation with an explicit peak offset
double peak_offset_triangular(long long t, const PolicySpec& spec) {
    const long long te = t - spec.start;
    if (te <= 0) return spec.base_lr;
    const long long stepsize = *spec.stepsize;
    const long long cycle0 = te / (2 * stepsize);
    const double x =
        static_cast<double>(te - (2 * cycle0 + 1) * stepsize) / static_cast<double>(stepsize);
    return spec.base_lr + (*spec.max_lr - spec.base_lr) * std::max(0.0, 1.0 - std::fabs(x));
}

} // namespace

TEST_CASE("cycle_index") {
    CHECK(cycle_index(0, 2000) == 1);
    CHECK(cycle_index(4000, 2000) == 2);
    CHECK(cycle_index(7000, 2000) == 2);
    CHECK(cycle_index(3999, 2000) == 1);
    CHECK(cycle_index(8000, 2000) == 3);
}

TEST_CASE("window_factor shapes") {
    CHECK(window_factor(0.0, Window::triangular) == 1.0);
    CHECK(window_factor(0.0, Window::welch) == 1.0);
    CHECK(window_factor(0.0, Window::hann) == 1.0);
    CHECK(window_factor(1.0, Window::welch) == 0.0);
    CHECK(window_factor(1.0, Window::triangular) == 0.0);
    CHECK(window_factor(0.5, Window::hann) == doctest::Approx(0.5).epsilon(1e-12));
    // past the half cycle everything clamps to zero
    CHECK(window_factor(1.5, Window::triangular) == 0.0);
    CHECK(window_factor(1.5, Window::welch) == 0.0);
    CHECK(window_factor(1.5, Window::hann) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("triangular pinned values") {
    const auto spec = PolicySpec::make_triangular(0.001, 0.006, 2000);
    CHECK(lr_triangular(0, spec) == 0.001);
    CHECK(lr_triangular(2000, spec) == 0.006);
    CHECK(lr_triangular(1000, spec) == doctest::Approx(0.0035).epsilon(1e-15));
    CHECK(lr_triangular(4000, spec) == 0.001);
}

TEST_CASE("triangular2 pinned values") {
    const auto spec = PolicySpec::make_triangular2(0.001, 0.005, 2000);
    CHECK(lr_triangular2(0, spec) == 0.001);
    CHECK(lr_triangular2(2000, spec) == 0.005);
    CHECK(lr_triangular2(7000, spec) == doctest::Approx(0.002).epsilon(1e-15));
}

TEST_CASE("exp_range pinned values") {
    const auto gamma1 = PolicySpec::make_exp_range(0.001, 0.006, 2000, 1.0);
    CHECK(lr_exp_range(0, gamma1) == 0.001);
    CHECK(lr_exp_range(2000, gamma1) == 0.006);

    const auto spec = PolicySpec::make_exp_range(0.001, 0.006, 2000, 0.99994);
    const double expected = 0.001 + 0.005 * pow_by_walk(0.99994, 2000);
    CHECK(rel_diff(lr_exp_range(2000, spec), expected) <= 1e-12);
}

TEST_CASE("decay pinned values") {
    const auto spec = PolicySpec::make_decay(0.001, 0.007, 4000);
    CHECK(lr_decay(0, spec) == 0.007);
    CHECK(lr_decay(4000, spec) == 0.001);
    CHECK(lr_decay(2000, spec) == doctest::Approx(0.004).epsilon(1e-15));
    CHECK(lr_decay(100000, spec) == 0.001);
}

TEST_CASE("exp pinned values") {
    const auto half = PolicySpec::make_exp(0.01, 0.5);
    CHECK(lr_exp(0, half) == 0.01);
    CHECK(lr_exp(1, half) == 0.005);

    const auto spec = PolicySpec::make_exp(0.001, 0.99994);
    CHECK(rel_diff(lr_exp(1000, spec), 0.001 * pow_by_walk(0.99994, 1000)) <= 1e-12);
}

TEST_CASE("fixed policy ignores t") {
    const auto spec = PolicySpec::make_fixed(0.01);
    CHECK(lr_fixed(0, spec) == 0.01);
    CHECK(lr_fixed(1000000, spec) == 0.01);
    CHECK(lr_fixed(5, PolicySpec::make_fixed(0.001)) == 0.001);
}

TEST_CASE("phased schedule") {
    PhasedSchedule sched;
    sched.max_iter = 25000;
    sched.phases.push_back({0, PolicySpec::make_triangular2(0.001, 0.005, 2000)});
    sched.phases.push_back({16000, PolicySpec::make_triangular2(0.0001, 0.0005, 1000)});
    sched.phases.push_back({22000, PolicySpec::make_triangular2(0.00001, 0.00005, 500)});
    sched.validate();

    CHECK(lr_phased(0, sched) == 0.001);
    CHECK(lr_phased(16000, sched) == 0.0001);
    CHECK(lr_phased(17000, sched) == 0.0005);
    CHECK(lr_phased(22000, sched) == 0.00001);
    CHECK_THROWS_AS((void)lr_phased(25000, sched), Error);

    SUBCASE("validation rejects out-of-order phases") {
        PhasedSchedule bad = sched;
        std::swap(bad.phases[0].start_iter, bad.phases[1].start_iter);
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("stepsize_suggest") {
    CHECK(stepsize_suggest(50000, 100, 4) == 2000);
    CHECK(stepsize_suggest(1281167, 256, 6) == 30030);
    CHECK(stepsize_suggest(100, 100, 2) == 2);
    CHECK(stepsize_suggest(1600, 64, 4) == 100);
}

TEST_CASE("spec validation errors") {
    PolicySpec spec;
    spec.kind = PolicyKind::triangular;
    spec.base_lr = 0.001;
    spec.stepsize = 100;
    CHECK_THROWS_WITH_AS(spec.validate(), "triangular requires max_lr", ConfigError);

    CHECK_THROWS_AS(PolicySpec::make_exp(0.01, 1.5), ConfigError);
    CHECK_THROWS_AS(PolicySpec::make_triangular(0.006, 0.001, 100), ConfigError);
    CHECK_THROWS_AS(PolicySpec::make_triangular(0.001, 0.006, 0), ConfigError);
}

TEST_CASE("band bounds hold for all policies") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        for (const PolicyKind kind : {PolicyKind::decay, PolicyKind::triangular,
                                      PolicyKind::triangular2, PolicyKind::exp_range}) {
            const PolicySpec spec = random_banded_spec(rng, kind);
            const long long t = static_cast<long long>(rng.below(1000001));
            const double lr = lr_at(t, spec);
            CHECK(lr >= spec.base_lr);
            CHECK(lr <= *spec.max_lr);
        }
        const auto exp_spec = PolicySpec::make_exp(0.01, rng.uniform(0.9, 1.0));
        CHECK(lr_exp(static_cast<long long>(rng.below(100000)), exp_spec) <= exp_spec.base_lr);
    }
}

TEST_CASE("both closed forms of triangular agree") {
    Rng rng(32);
    for (int trial = 0; trial < 100000; ++trial) {
        const PolicySpec spec = random_banded_spec(rng, PolicyKind::triangular);
        const long long t = static_cast<long long>(rng.below(1000001));
        const double a = cycle_counter_triangular(t, spec);
        const double b = peak_offset_triangular(t, spec);
        const double lib = lr_triangular(t, spec);
        CHECK(rel_diff(a, b) <= 1e-12);
        CHECK(rel_diff(lib, b) <= 1e-12);
    }
}

TEST_CASE("triangular is periodic") {
    Rng rng(33);
    for (int trial = 0; trial < 2000; ++trial) {
        const PolicySpec spec = random_banded_spec(rng, PolicyKind::triangular);
        const long long t = static_cast<long long>(rng.below(500000));
        // equal up to the one rounding in te/stepsize
        CHECK(rel_diff(lr_triangular(t, spec), lr_triangular(t + 2 * *spec.stepsize, spec)) <=
              1e-12);
    }
}

TEST_CASE("peak sits at the odd half-cycle boundary") {
    Rng rng(34);
    for (int trial = 0; trial < 20; ++trial) {
        const double base = rng.uniform(1e-3, 0.01);
        const double max = base * rng.uniform(2.0, 6.0);
        const long long stepsize = 50 + static_cast<long long>(rng.below(200));
        for (const PolicyKind kind :
             {PolicyKind::triangular, PolicyKind::triangular2, PolicyKind::exp_range}) {
            PolicySpec spec;
            switch (kind) {
                case PolicyKind::triangular:
                    spec = PolicySpec::make_triangular(base, max, stepsize);
                    break;
                case PolicyKind::triangular2:
                    spec = PolicySpec::make_triangular2(base, max, stepsize);
                    break;
                default: spec = PolicySpec::make_exp_range(base, max, stepsize, 1.0); break;
            }
            for (long long k = 1; k <= 4; ++k) {
                long long argmax = (k - 1) * 2 * stepsize;
                double best = -1.0;
                for (long long t = (k - 1) * 2 * stepsize; t <= k * 2 * stepsize; ++t) {
                    const double lr = lr_at(t, spec);
                    if (lr > best) {
                        best = lr;
                        argmax = t;
                    }
                }
                CHECK(argmax == (2 * k - 1) * stepsize);
            }
        }
    }
}

TEST_CASE("triangular2 amplitude halves every cycle") {
    const auto spec = PolicySpec::make_triangular2(0.001, 0.005, 100);
    const double amp = 0.005 - 0.001;
    for (long long k = 1; k <= 10; ++k) {
        double measured = 0.0;
        for (long long t = (k - 1) * 200; t < k * 200; ++t) {
            measured = std::max(measured, lr_triangular2(t, spec) - spec.base_lr);
        }
        const double expected = amp / std::pow(2.0, static_cast<double>(k - 1));
        CHECK(rel_diff(measured, expected) <= 1e-15);
    }
}

TEST_CASE("exp_range with gamma 1 is triangular") {
    Rng rng(35);
    for (int trial = 0; trial < 500; ++trial) {
        PolicySpec tri = random_banded_spec(rng, PolicyKind::triangular);
        const PolicySpec er = PolicySpec::make_exp_range(tri.base_lr, *tri.max_lr, *tri.stepsize, 1.0);
        const long long t = static_cast<long long>(rng.below(1000001));
        CHECK(lr_exp_range(t, er) == lr_triangular(t, tri));
    }
}

TEST_CASE("windows agree at the band edges") {
    const long long stepsize = 500;
    for (const Window w : {Window::welch, Window::hann}) {
        const auto spec = PolicySpec::make_triangular(0.001, 0.006, stepsize, 0, w);
        const auto tri = PolicySpec::make_triangular(0.001, 0.006, stepsize);
        // x = 0 at the peak, x = 1 at cycle boundaries
        CHECK(lr_triangular(stepsize, spec) == lr_triangular(stepsize, tri));
        CHECK(lr_triangular(2 * stepsize, spec) ==
              doctest::Approx(lr_triangular(2 * stepsize, tri)).epsilon(1e-12));
        CHECK(lr_triangular(0, spec) == lr_triangular(0, tri));
    }
}

TEST_CASE("start offset holds the policy at its initial value") {
    const auto tri = PolicySpec::make_triangular(0.001, 0.006, 100, 500);
    for (long long t = 0; t <= 500; ++t) CHECK(lr_triangular(t, tri) == 0.001);
    CHECK(lr_triangular(600, tri) == 0.006);

    const auto dec = PolicySpec::make_decay(0.001, 0.007, 100, 500);
    CHECK(lr_decay(0, dec) == 0.007);
    CHECK(lr_decay(500, dec) == 0.007);
    CHECK(lr_decay(600, dec) == 0.001);
}

TEST_CASE("closed forms match a per-iteration walk") {
    Rng rng(36);
    long long pairs = 0;
    while (pairs < 100000) {
        const int which = static_cast<int>(rng.below(6));
        PolicySpec spec;
        long long span = 1500;
        switch (which) {
            case 0: spec = PolicySpec::make_fixed(rng.uniform(1e-4, 0.1)); break;
            case 1: spec = PolicySpec::make_exp(rng.uniform(1e-4, 0.1), rng.uniform(0.99, 1.0)); break;
            case 2:
            case 3:
            case 4: {
                const double base = rng.uniform(1e-4, 0.1);
                const double max = base * rng.uniform(1.0, 8.0);
                const long long stepsize = 50 + static_cast<long long>(rng.below(400));
                span = 4 * stepsize;
                if (which == 2) spec = PolicySpec::make_triangular(base, max, stepsize);
                if (which == 3) spec = PolicySpec::make_triangular2(base, max, stepsize);
                if (which == 4)
                    spec = PolicySpec::make_exp_range(base, max, stepsize, rng.uniform(0.995, 1.0));
                break;
            }
            default: {
                const double base = rng.uniform(1e-4, 0.1);
                spec = PolicySpec::make_decay(base, base * rng.uniform(1.0, 8.0),
                                              100 + static_cast<long long>(rng.below(900)));
                break;
            }
        }
        walk_and_check(spec, span, 1e-12);
        pairs += span + 1;
    }
}
