#pragma once

#include <string>
#include <vector>

namespace cyclelr {

enum class RangeMetric { accuracy, loss };

const char* to_string(RangeMetric m);
RangeMetric range_metric_from_string(const std::string& name);

// A short run with the learning rate increasing linearly from lr_start to
// lr_end over num_iters, evaluating the metric every eval_every steps.
struct RangeTestConfig {
    double lr_start = 1e-4;
    double lr_end = 2.0;
    long long num_iters = 400;
    long long eval_every = 2;
    RangeMetric metric = RangeMetric::accuracy;

    void validate() const;
};

struct RangeTestRow {
    long long iter = 0;
    double lr = 0.0;
    double metric = 0.0;
    double smoothed = 0.0;
};

struct RangeTestTrace {
    std::vector<RangeTestRow> rows;
    RangeMetric metric = RangeMetric::accuracy;
    bool has_smoothed = false;
    bool diverged = false;
    std::string diagnostics;

    // header iter,lr,metric,smoothed
    std::string to_csv() const;
};

// Estimated (base_lr, max_lr) band plus human-readable notes on how the
// band was picked (rise onset, raggedness/decline onset, divergence).
struct BoundEstimate {
    enum class Method { curve, rule_of_thumb };
    double base_lr = 0.0;
    double max_lr = 0.0;
    Method method = Method::curve;
    std::string diagnostics;
};

// Thresholds for reading the band off the metric-vs-lr curve, all
// expressed as fractions of the observed metric range so the estimate is
// invariant under affine rescaling of the metric axis.
struct BoundConfig {
    double rise_eps = 0.02;    // metric must move this far from its initial value
    double fall_eps = 0.05;    // decline from the running best that ends the band
    double ragged_eps = 0.03;  // dispersion of raw-minus-smoothed that ends the band
    int ragged_window = 7;     // trailing samples for the dispersion estimate
    int smooth_window = 5;
};

// One optimizer step at the given rate and a held-out metric; the range
// test owns the iteration order, the client owns model/optimizer/data.
class RangeTestClient {
public:
    virtual ~RangeTestClient() = default;
    virtual double train_step(double lr) = 0;  // returns the batch loss
    virtual double eval_metric(RangeMetric metric) = 0;
};

// lr_start + (lr_end - lr_start) * t / (num_iters - 1)
double range_test_lr(long long t, const RangeTestConfig& cfg);

// Drives the client for num_iters steps; a non-finite loss or metric
// truncates the trace and sets the divergence flag (that is the signal
// the test is after, not a failure). The client must be freshly
// initialized; reusing trained weights distorts the low-lr region.
RangeTestTrace run_range_test(RangeTestClient& client, const RangeTestConfig& cfg);

// Centered moving average with edge truncation; window must be odd and
// no larger than the number of rows.
RangeTestTrace smooth(const RangeTestTrace& trace, int window);

// base_lr: first lr where the smoothed metric has moved rise_eps from its
// initial value (up for accuracy, down for loss). max_lr: first later lr
// where the smoothed metric has declined fall_eps from its running best,
// or where the raw metric's dispersion about the smoothed trend exceeds
// ragged_eps; falls back to the last tested lr.
BoundEstimate estimate_bounds(const RangeTestTrace& trace, const BoundConfig& cfg = {});

// base_lr = max_lr / divisor, divisor 3 or 4
BoundEstimate rule_of_thumb(double max_lr, int divisor);

} // namespace cyclelr
