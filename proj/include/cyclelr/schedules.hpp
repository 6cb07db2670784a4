#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cyclelr {

enum class PolicyKind { fixed, exp, decay, triangular, triangular2, exp_range };
enum class Window { triangular, welch, hann };

const char* to_string(PolicyKind kind);
const char* to_string(Window window);
PolicyKind policy_kind_from_string(const std::string& name);
Window window_from_string(const std::string& name);

// Complete description of one learning-rate policy.
//
// base_lr is always required. max_lr and stepsize are required for the
// banded policies (decay, triangular, triangular2, exp_range); gamma for
// the exponential ones (exp, exp_range). start shifts the whole policy
// by a fixed number of iterations; before it elapses the banded policies
// sit at base_lr and decay sits at max_lr.
struct PolicySpec {
    PolicyKind kind = PolicyKind::fixed;
    double base_lr = 0.0;
    std::optional<double> max_lr;
    std::optional<long long> stepsize;
    std::optional<double> gamma;
    long long start = 0;
    Window window = Window::triangular;

    // throws ConfigError naming the missing/invalid parameter
    void validate() const;

    bool cyclic() const {
        return kind == PolicyKind::triangular || kind == PolicyKind::triangular2 ||
               kind == PolicyKind::exp_range;
    }

    static PolicySpec make_fixed(double base_lr);
    static PolicySpec make_exp(double base_lr, double gamma, long long start = 0);
    static PolicySpec make_decay(double base_lr, double max_lr, long long stepsize,
                                 long long start = 0);
    static PolicySpec make_triangular(double base_lr, double max_lr, long long stepsize,
                                      long long start = 0, Window window = Window::triangular);
    static PolicySpec make_triangular2(double base_lr, double max_lr, long long stepsize,
                                       long long start = 0, Window window = Window::triangular);
    static PolicySpec make_exp_range(double base_lr, double max_lr, long long stepsize,
                                     double gamma, long long start = 0,
                                     Window window = Window::triangular);
};

// Ordered sequence of (start_iter, policy) phases; the active phase is the
// one with the largest start_iter <= t and is evaluated at t - start_iter.
struct PhasedSchedule {
    struct Phase {
        long long start_iter = 0;
        PolicySpec spec;
    };
    std::vector<Phase> phases;
    long long max_iter = 0;

    void validate() const;
};

// 1-based cycle number: floor(1 + t / (2 * stepsize))
long long cycle_index(long long t, long long stepsize);

// Shape of the half-cycle envelope as a function of the normalized
// distance x from the peak. All three are 1 at x = 0 and 0 for x >= 1.
double window_factor(double x, Window window);

double lr_fixed(long long t, const PolicySpec& spec);
double lr_exp(long long t, const PolicySpec& spec);
double lr_decay(long long t, const PolicySpec& spec);
double lr_triangular(long long t, const PolicySpec& spec);
double lr_triangular2(long long t, const PolicySpec& spec);
double lr_exp_range(long long t, const PolicySpec& spec);

// dispatch on spec.kind
double lr_at(long long t, const PolicySpec& spec);

// throws if t >= sched.max_iter
double lr_phased(long long t, const PhasedSchedule& sched);

// Half-cycle length from the dataset geometry: epochs_per_step times the
// number of iterations in one epoch (ceil(n_train / batchsize), counting
// the final partial batch), rounded to the nearest integer.
long long stepsize_suggest(long long n_train, long long batchsize, double epochs_per_step);

} // namespace cyclelr
