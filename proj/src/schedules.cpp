#include "cyclelr/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cyclelr/common.hpp"

namespace cyclelr {

const char* to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::fixed: return "fixed";
        case PolicyKind::exp: return "exp";
        case PolicyKind::decay: return "decay";
        case PolicyKind::triangular: return "triangular";
        case PolicyKind::triangular2: return "triangular2";
        case PolicyKind::exp_range: return "exp_range";
    }
    return "?";
}

const char* to_string(Window window) {
    switch (window) {
        case Window::triangular: return "triangular";
        case Window::welch: return "welch";
        case Window::hann: return "hann";
    }
    return "?";
}

PolicyKind policy_kind_from_string(const std::string& name) {
    if (name == "fixed") return PolicyKind::fixed;
    if (name == "exp") return PolicyKind::exp;
    if (name == "decay") return PolicyKind::decay;
    if (name == "triangular") return PolicyKind::triangular;
    if (name == "triangular2") return PolicyKind::triangular2;
    if (name == "exp_range") return PolicyKind::exp_range;
    throw ConfigError("unknown policy \"" + name + "\"");
}

Window window_from_string(const std::string& name) {
    if (name == "triangular") return Window::triangular;
    if (name == "welch") return Window::welch;
    if (name == "hann") return Window::hann;
    throw ConfigError("unknown window \"" + name + "\"");
}

void PolicySpec::validate() const {
    const std::string policy = to_string(kind);
    check_config(base_lr > 0.0, policy + " requires base_lr > 0");
    check_config(start >= 0, policy + " requires start >= 0");

    const bool needs_band = kind == PolicyKind::decay || cyclic();
    if (needs_band) {
        check_config(max_lr.has_value(), policy + " requires max_lr");
        check_config(stepsize.has_value(), policy + " requires stepsize");
        check_config(*max_lr >= base_lr, policy + " requires max_lr >= base_lr");
        check_config(*stepsize >= 1, policy + " requires stepsize >= 1");
    }
    const bool needs_gamma = kind == PolicyKind::exp || kind == PolicyKind::exp_range;
    if (needs_gamma) {
        check_config(gamma.has_value(), policy + " requires gamma");
        check_config(*gamma > 0.0 && *gamma <= 1.0, policy + " requires gamma in (0, 1]");
    }
}

PolicySpec PolicySpec::make_fixed(double base_lr) {
    PolicySpec spec;
    spec.kind = PolicyKind::fixed;
    spec.base_lr = base_lr;
    spec.validate();
    return spec;
}

PolicySpec PolicySpec::make_exp(double base_lr, double gamma, long long start) {
    PolicySpec spec;
    spec.kind = PolicyKind::exp;
    spec.base_lr = base_lr;
    spec.gamma = gamma;
    spec.start = start;
    spec.validate();
    return spec;
}

PolicySpec PolicySpec::make_decay(double base_lr, double max_lr, long long stepsize,
                                  long long start) {
    PolicySpec spec;
    spec.kind = PolicyKind::decay;
    spec.base_lr = base_lr;
    spec.max_lr = max_lr;
    spec.stepsize = stepsize;
    spec.start = start;
    spec.validate();
    return spec;
}

PolicySpec PolicySpec::make_triangular(double base_lr, double max_lr, long long stepsize,
                                       long long start, Window window) {
    PolicySpec spec;
    spec.kind = PolicyKind::triangular;
    spec.base_lr = base_lr;
    spec.max_lr = max_lr;
    spec.stepsize = stepsize;
    spec.start = start;
    spec.window = window;
    spec.validate();
    return spec;
}

PolicySpec PolicySpec::make_triangular2(double base_lr, double max_lr, long long stepsize,
                                        long long start, Window window) {
    PolicySpec spec = make_triangular(base_lr, max_lr, stepsize, start, window);
    spec.kind = PolicyKind::triangular2;
    return spec;
}

PolicySpec PolicySpec::make_exp_range(double base_lr, double max_lr, long long stepsize,
                                      double gamma, long long start, Window window) {
    PolicySpec spec;
    spec.kind = PolicyKind::exp_range;
    spec.base_lr = base_lr;
    spec.max_lr = max_lr;
    spec.stepsize = stepsize;
    spec.gamma = gamma;
    spec.start = start;
    spec.window = window;
    spec.validate();
    return spec;
}

void PhasedSchedule::validate() const {
    check_config(!phases.empty(), "phased schedule requires at least one phase");
    check_config(phases.front().start_iter == 0, "first phase must start at iteration 0");
    check_config(max_iter > 0, "phased schedule requires max_iter > 0");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        phases[i].spec.validate();
        if (i > 0) {
            check_config(phases[i].start_iter > phases[i - 1].start_iter,
                         "phase start iterations must be strictly increasing");
        }
    }
}

long long cycle_index(long long t, long long stepsize) {
    return 1 + t / (2 * stepsize);
}

double window_factor(double x, Window window) {
    switch (window) {
        case Window::triangular: return std::max(0.0, 1.0 - x);
        case Window::welch: return std::max(0.0, 1.0 - x * x);
        case Window::hann: return 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(x, 1.0)));
    }
    return 0.0;
}

double lr_fixed(long long, const PolicySpec& spec) {
    return spec.base_lr;
}

double lr_exp(long long t, const PolicySpec& spec) {
    const long long te = std::max<long long>(0, t - spec.start);
    return spec.base_lr * std::pow(*spec.gamma, static_cast<double>(te));
}

double lr_decay(long long t, const PolicySpec& spec) {
    const long long te = std::max<long long>(0, t - spec.start);
    if (te >= *spec.stepsize) return spec.base_lr;  // ramp done, pinned exactly
    const double progress = static_cast<double>(te) / static_cast<double>(*spec.stepsize);
    return *spec.max_lr - (*spec.max_lr - spec.base_lr) * progress;
}

double lr_triangular(long long t, const PolicySpec& spec) {
    const long long te = t - spec.start;
    if (te <= 0) return spec.base_lr;
    const long long stepsize = *spec.stepsize;
    const long long cycle = cycle_index(te, stepsize);
    const double x = std::fabs(static_cast<double>(te) / static_cast<double>(stepsize) -
                               2.0 * static_cast<double>(cycle) + 1.0);
    return spec.base_lr + (*spec.max_lr - spec.base_lr) * window_factor(x, spec.window);
}

double lr_triangular2(long long t, const PolicySpec& spec) {
    const long long te = t - spec.start;
    if (te <= 0) return spec.base_lr;
    const long long stepsize = *spec.stepsize;
    const long long cycle0 = te / (2 * stepsize);
    const double x = std::fabs(static_cast<double>(te - (2 * cycle0 + 1) * stepsize) /
                               static_cast<double>(stepsize));
    const double scale = std::pow(2.0, static_cast<double>(cycle0));
    const double factor = std::min(1.0, window_factor(x, spec.window) / scale);
    return spec.base_lr + (*spec.max_lr - spec.base_lr) * factor;
}

double lr_exp_range(long long t, const PolicySpec& spec) {
    const long long te = t - spec.start;
    if (te <= 0) return spec.base_lr;
    const long long stepsize = *spec.stepsize;
    const long long cycle = cycle_index(te, stepsize);
    const double x = std::fabs(static_cast<double>(te) / static_cast<double>(stepsize) -
                               2.0 * static_cast<double>(cycle) + 1.0);
    const double decayed = std::pow(*spec.gamma, static_cast<double>(te));
    return spec.base_lr + (*spec.max_lr - spec.base_lr) * window_factor(x, spec.window) * decayed;
}

double lr_at(long long t, const PolicySpec& spec) {
    switch (spec.kind) {
        case PolicyKind::fixed: return lr_fixed(t, spec);
        case PolicyKind::exp: return lr_exp(t, spec);
        case PolicyKind::decay: return lr_decay(t, spec);
        case PolicyKind::triangular: return lr_triangular(t, spec);
        case PolicyKind::triangular2: return lr_triangular2(t, spec);
        case PolicyKind::exp_range: return lr_exp_range(t, spec);
    }
    throw Error("unhandled policy kind");
}

double lr_phased(long long t, const PhasedSchedule& sched) {
    check(t >= 0, "lr_phased: iteration must be non-negative");
    if (t >= sched.max_iter) {
        throw Error("lr_phased: iteration " + std::to_string(t) + " is out of range (max_iter " +
                    std::to_string(sched.max_iter) + ")");
    }
    const PhasedSchedule::Phase* active = &sched.phases.front();
    for (const auto& phase : sched.phases) {
        if (phase.start_iter <= t) active = &phase;
    }
    return lr_at(t - active->start_iter, active->spec);
}

long long stepsize_suggest(long long n_train, long long batchsize, double epochs_per_step) {
    check(batchsize >= 1 && batchsize <= n_train, "stepsize_suggest: batchsize must be in [1, n_train]");
    const long long iters_per_epoch = (n_train + batchsize - 1) / batchsize;
    return std::llround(epochs_per_step * static_cast<double>(iters_per_epoch));
}

} // namespace cyclelr
