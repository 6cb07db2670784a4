#include "cyclelr/lr_finder.hpp"

#include <algorithm>
#include <cmath>

#include "cyclelr/common.hpp"

namespace cyclelr {

const char* to_string(RangeMetric m) {
    return m == RangeMetric::accuracy ? "accuracy" : "loss";
}

RangeMetric range_metric_from_string(const std::string& name) {
    if (name == "accuracy") return RangeMetric::accuracy;
    if (name == "loss") return RangeMetric::loss;
    throw ConfigError("unknown range-test metric \"" + name + "\"");
}

void RangeTestConfig::validate() const {
    check_config(lr_start > 0.0, "range test requires lr_start > 0");
    check_config(lr_end > lr_start, "range test requires lr_end > lr_start");
    check_config(num_iters >= 1, "range test requires num_iters >= 1");
    check_config(eval_every >= 1, "range test requires eval_every >= 1");
}

std::string RangeTestTrace::to_csv() const {
    std::string out = "iter,lr,metric,smoothed\n";
    for (const auto& row : rows) {
        out += std::to_string(row.iter) + "," + fmt_double(row.lr) + "," +
               fmt_double(row.metric) + "," + fmt_double(row.smoothed) + "\n";
    }
    return out;
}

double range_test_lr(long long t, const RangeTestConfig& cfg) {
    check(t >= 0 && t < cfg.num_iters, "range_test_lr: iteration " + std::to_string(t) +
                                           " outside [0, " + std::to_string(cfg.num_iters) + ")");
    if (cfg.num_iters == 1) return cfg.lr_start;
    const double progress = static_cast<double>(t) / static_cast<double>(cfg.num_iters - 1);
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress;
}

RangeTestTrace run_range_test(RangeTestClient& client, const RangeTestConfig& cfg) {
    cfg.validate();
    RangeTestTrace trace;
    trace.metric = cfg.metric;
    for (long long t = 0; t < cfg.num_iters; ++t) {
        const double lr = range_test_lr(t, cfg);
        const double loss = client.train_step(lr);
        if (!std::isfinite(loss)) {
            trace.diverged = true;
            trace.diagnostics += "non-finite training loss at iteration " + std::to_string(t) +
                                 " (lr " + fmt_double(lr) + "); trace truncated\n";
            break;
        }
        if ((t + 1) % cfg.eval_every == 0) {
            const double metric = client.eval_metric(cfg.metric);
            if (!std::isfinite(metric)) {
                trace.diverged = true;
                trace.diagnostics += "non-finite metric at iteration " + std::to_string(t) +
                                     " (lr " + fmt_double(lr) + "); trace truncated\n";
                break;
            }
            trace.rows.push_back({t, lr, metric, 0.0});
        }
    }
    return trace;
}

RangeTestTrace smooth(const RangeTestTrace& trace, int window) {
    check(window >= 1 && window % 2 == 1, "smooth: window must be odd and positive");
    check(static_cast<std::size_t>(window) <= trace.rows.size(),
          "smooth: window larger than the trace (" + std::to_string(trace.rows.size()) +
              " rows)");
    RangeTestTrace out = trace;
    const auto n = static_cast<std::ptrdiff_t>(trace.rows.size());
    const std::ptrdiff_t half = window / 2;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
        const std::ptrdiff_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::ptrdiff_t j = lo; j <= hi; ++j)
            sum += trace.rows[static_cast<std::size_t>(j)].metric;
        out.rows[static_cast<std::size_t>(i)].smoothed = sum / static_cast<double>(hi - lo + 1);
    }
    out.has_smoothed = true;
    return out;
}

BoundEstimate estimate_bounds(const RangeTestTrace& trace, const BoundConfig& cfg) {
    check(trace.has_smoothed, "estimate_bounds: smooth the trace first");
    check(trace.rows.size() >= 10, "estimate_bounds: need at least 10 rows");
    check(cfg.ragged_window >= 2, "estimate_bounds: ragged_window must be >= 2");

    const auto n = static_cast<std::ptrdiff_t>(trace.rows.size());

    // orient so improvement is always up (loss mode flips the sign)
    const double direction = trace.metric == RangeMetric::accuracy ? 1.0 : -1.0;
    std::vector<double> smoothed(static_cast<std::size_t>(n));
    std::vector<double> residual(static_cast<std::size_t>(n));
    double lo = direction * trace.rows[0].smoothed, hi = lo;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& row = trace.rows[static_cast<std::size_t>(i)];
        smoothed[static_cast<std::size_t>(i)] = direction * row.smoothed;
        residual[static_cast<std::size_t>(i)] = row.metric - row.smoothed;
        lo = std::min(lo, smoothed[static_cast<std::size_t>(i)]);
        hi = std::max(hi, smoothed[static_cast<std::size_t>(i)]);
    }
    const double range = hi - lo;
    if (range <= 0.0) throw Error("model never converged in tested range");

    const double rise = cfg.rise_eps * range;
    const double fall = cfg.fall_eps * range;
    const double ragged = cfg.ragged_eps * range;
    const double initial = smoothed[0];

    std::ptrdiff_t base_idx = -1;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (smoothed[static_cast<std::size_t>(i)] - initial > rise) {
            base_idx = i;
            break;
        }
    }
    if (base_idx < 0) throw Error("model never converged in tested range");
    if (base_idx == n - 1)
        throw Error("metric only moved at the very end of the tested range; raise lr_end");

    BoundEstimate estimate;
    estimate.base_lr = trace.rows[static_cast<std::size_t>(base_idx)].lr;
    estimate.method = BoundEstimate::Method::curve;
    estimate.diagnostics = "metric starts moving at lr " + fmt_double(estimate.base_lr) + "\n";

    double running_best = smoothed[static_cast<std::size_t>(base_idx)];
    std::ptrdiff_t max_idx = -1;
    for (std::ptrdiff_t i = base_idx + 1; i < n; ++i) {
        const double oriented = smoothed[static_cast<std::size_t>(i)];
        running_best = std::max(running_best, oriented);
        if (running_best - oriented > fall) {
            max_idx = i;
            estimate.diagnostics += "metric declines from its best at lr " +
                                    fmt_double(trace.rows[static_cast<std::size_t>(i)].lr) + "\n";
            break;
        }
        if (i + 1 >= cfg.ragged_window) {
            double mean = 0.0;
            for (int j = 0; j < cfg.ragged_window; ++j)
                mean += residual[static_cast<std::size_t>(i - j)];
            mean /= cfg.ragged_window;
            double var = 0.0;
            for (int j = 0; j < cfg.ragged_window; ++j) {
                const double dev = residual[static_cast<std::size_t>(i - j)] - mean;
                var += dev * dev;
            }
            var /= cfg.ragged_window;
            if (std::sqrt(var) > ragged) {
                max_idx = i;
                estimate.diagnostics +=
                    "metric becomes ragged at lr " +
                    fmt_double(trace.rows[static_cast<std::size_t>(i)].lr) + "\n";
                break;
            }
        }
    }
    if (max_idx < 0) {
        max_idx = n - 1;
        estimate.diagnostics += trace.diverged
                                    ? "run diverged; using last recorded lr as max_lr\n"
                                    : "no decline or raggedness detected; using last tested lr "
                                      "as max_lr\n";
    }
    estimate.max_lr = trace.rows[static_cast<std::size_t>(max_idx)].lr;
    if (trace.diverged) estimate.diagnostics += trace.diagnostics;
    check(estimate.base_lr < estimate.max_lr,
          "estimated band is empty (base " + fmt_double(estimate.base_lr) + ", max " +
              fmt_double(estimate.max_lr) + "); raise lr_end or lower eval_every");
    return estimate;
}

BoundEstimate rule_of_thumb(double max_lr, int divisor) {
    check(max_lr > 0.0, "rule_of_thumb: max_lr must be positive");
    check(divisor == 3 || divisor == 4, "rule_of_thumb: divisor must be 3 or 4");
    BoundEstimate estimate;
    estimate.base_lr = max_lr / divisor;
    estimate.max_lr = max_lr;
    estimate.method = BoundEstimate::Method::rule_of_thumb;
    estimate.diagnostics =
        "base_lr set to max_lr / " + std::to_string(divisor) + "\n";
    return estimate;
}

} // namespace cyclelr
