// cyclelr command line: schedules, LR range tests, training runs,
// comparisons and SVG plots. Exit codes: 0 ok, 2 usage/config error,
// 3 analysis failure, 4 training divergence.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "cyclelr/common.hpp"
#include "cyclelr/config.hpp"
#include "cyclelr/harness.hpp"
#include "cyclelr/svg.hpp"

namespace {

using namespace cyclelr;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAnalysis = 3;
constexpr int kExitDivergence = 4;

// flags shared by `schedule` and the schedule overrides of `train`
struct ScheduleFlags {
    std::string policy;
    std::optional<double> base_lr, max_lr, gamma;
    std::optional<long long> stepsize, start;
    std::string window;

    void add(CLI::App& cmd, bool require_policy) {
        auto* opt = cmd.add_option("--policy", policy,
                                   "policy: fixed, exp, decay, triangular, triangular2, exp_range");
        if (require_policy) opt->required();
        cmd.add_option("--base", base_lr, "base (minimum) learning rate");
        cmd.add_option("--max", max_lr, "maximum learning rate");
        cmd.add_option("--stepsize", stepsize, "iterations per half cycle");
        cmd.add_option("--gamma", gamma, "exponential decay factor in (0,1]");
        cmd.add_option("--start", start, "iteration offset before the policy engages");
        cmd.add_option("--window", window, "cycle shape: triangular, welch, hann");
    }

    bool any_set() const {
        return !policy.empty() || base_lr || max_lr || stepsize || gamma || start ||
               !window.empty();
    }

    // builds a spec from scratch (schedule command) or patches `base`
    PolicySpec apply(PolicySpec base) const {
        if (!policy.empty()) base.kind = policy_kind_from_string(policy);
        if (base_lr) base.base_lr = *base_lr;
        if (max_lr) base.max_lr = *max_lr;
        if (stepsize) base.stepsize = *stepsize;
        if (gamma) base.gamma = *gamma;
        if (start) base.start = *start;
        if (!window.empty()) base.window = window_from_string(window);
        base.validate();
        return base;
    }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           const ExperimentConfig& cfg) {
    if (flag_seed) return *flag_seed;
    if (cfg.seed_was_set) return cfg.train.seed;
    if (const char* env = std::getenv("CYCLELR_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("CYCLELR_SEED is not an integer: \"" + std::string(env) + "\"");
        }
    }
    return cfg.train.seed;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string cur;
    for (char c : text + ",") {
        if (c != ',') {
            cur += c;
            continue;
        }
        if (cur.empty()) continue;
        try {
            std::size_t consumed = 0;
            seeds.push_back(std::stoull(cur, &consumed));
            check_config(consumed == cur.size(), "");
        } catch (const std::exception&) {
            throw ConfigError("--seeds entry \"" + cur + "\" is not an integer");
        }
        cur.clear();
    }
    check_config(!seeds.empty(), "--seeds needs at least one integer");
    return seeds;
}

int cmd_schedule(const ScheduleFlags& flags, long long iters) {
    PolicySpec spec;
    try {
        spec = flags.apply(PolicySpec{});
    } catch (const ConfigError& e) {
        // name the flag, not the config key
        std::string msg = e.what();
        for (const auto& [key, flag] :
             {std::pair<std::string, std::string>{"base_lr", "--base"},
              {"max_lr", "--max"},
              {"stepsize", "--stepsize"},
              {"gamma", "--gamma"}}) {
            std::string::size_type at;
            while ((at = msg.find(key)) != std::string::npos) msg.replace(at, key.size(), flag);
        }
        throw ConfigError(msg);
    }
    std::string out = "iter,lr\n";
    for (long long t = 0; t < iters; ++t) {
        out += std::to_string(t) + "," + fmt_double(lr_at(t, spec)) + "\n";
    }
    std::cout << out;
    return kExitOk;
}

int cmd_range_test(const std::string& config_path, const ScheduleFlags& overrides,
                   std::optional<double> lr_start, std::optional<double> lr_end,
                   std::optional<long long> iters, std::optional<long long> eval_every,
                   const std::string& metric, const std::string& out_path,
                   std::optional<std::uint64_t> seed, const BoundConfig& bounds) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                               : load_experiment_config(config_path);
    cfg.train.seed = resolve_seed(seed, cfg);
    if (overrides.any_set()) {
        PolicySpec base = std::holds_alternative<PolicySpec>(cfg.train.schedule)
                              ? std::get<PolicySpec>(cfg.train.schedule)
                              : PolicySpec::make_fixed(0.01);
        cfg.train.schedule = overrides.apply(base);
    }

    RangeTestConfig range;
    if (lr_start) range.lr_start = *lr_start;
    if (lr_end) range.lr_end = *lr_end;
    if (iters) range.num_iters = *iters;
    if (eval_every) range.eval_every = *eval_every;
    if (!metric.empty()) range.metric = range_metric_from_string(metric);
    range.validate();

    Trainer trainer(cfg.train);
    RangeTestTrace trace = run_range_test(trainer, range);
    trace = smooth(trace, bounds.smooth_window);
    if (!out_path.empty()) write_file_atomic(out_path, trace.to_csv());

    BoundEstimate estimate;
    try {
        estimate = estimate_bounds(trace, bounds);
    } catch (const Error& e) {
        std::cerr << "range test failed: " << e.what() << "\n";
        if (!trace.diagnostics.empty()) std::cerr << trace.diagnostics;
        return kExitAnalysis;
    }
    std::cout << bounds_to_json(estimate).dump(2) << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const ScheduleFlags& overrides,
              const std::string& out_path, std::optional<std::uint64_t> seed,
              std::optional<long long> max_iter, std::optional<long long> eval_every,
              std::optional<long long> batchsize, bool stop_at_cycle_end) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                               : load_experiment_config(config_path);
    cfg.train.seed = resolve_seed(seed, cfg);
    if (max_iter) cfg.train.max_iter = *max_iter;
    if (eval_every) cfg.train.eval_every = *eval_every;
    if (batchsize) cfg.train.batchsize = *batchsize;
    if (stop_at_cycle_end) cfg.train.stop_at_cycle_end = true;
    if (overrides.any_set()) {
        PolicySpec base = std::holds_alternative<PolicySpec>(cfg.train.schedule)
                              ? std::get<PolicySpec>(cfg.train.schedule)
                              : PolicySpec::make_fixed(0.01);
        cfg.train.schedule = overrides.apply(base);
    }
    if (auto* sched = std::get_if<PhasedSchedule>(&cfg.train.schedule)) {
        sched->max_iter = std::max(sched->max_iter, cfg.train.max_iter);
    }

    const MetricLog log = train(cfg.train);
    if (!out_path.empty()) write_file_atomic(out_path, log.to_csv());
    std::cout << summary_to_json(log).dump(2) << "\n";
    if (log.diverged) {
        std::cerr << "training diverged: " << log.diagnostics << "\n";
        return kExitDivergence;
    }
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& seeds_text,
                double threshold, const std::string& out_path, const std::string& log_dir) {
    std::vector<TrainConfig> configs;
    for (const auto& path : config_paths) {
        ExperimentConfig cfg = load_experiment_config(path);
        if (cfg.train.name == "run") cfg.train.name = std::filesystem::path(path).stem().string();
        configs.push_back(cfg.train);
    }
    const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_text);

    RunLogSink sink;
    if (!log_dir.empty()) {
        std::filesystem::create_directories(log_dir);
        sink = [&log_dir](const TrainConfig& cfg, std::uint64_t seed, const MetricLog& log) {
            const auto path = std::filesystem::path(log_dir) /
                              (cfg.name + "_seed" + std::to_string(seed) + ".csv");
            write_file_atomic(path, log.to_csv());
        };
    }
    const auto entries = compare(configs, seeds, threshold, sink);
    const std::string text = compare_to_json(entries).dump(2) + "\n";
    if (!out_path.empty()) write_file_atomic(out_path, text);
    std::cout << text;
    return kExitOk;
}

int cmd_plot(const std::string& csv_path, const std::string& x_column,
             const std::string& y_column, const std::string& out_path) {
    const CsvTable table = read_csv_table(csv_path);
    write_file_atomic(out_path, render_line_chart(table, x_column, y_column));
    return kExitOk;
}

int run(int argc, char** argv) {
    CLI::App app{"cyclical learning rate toolkit"};
    app.require_subcommand(1);
    app.footer("Config-file defaults when a section is omitted:\n"
               "  dataset    two_moons, n 2000, noise 0.2, test_fraction 0.2\n"
               "  model      two hidden layers of 16 relu units, no batchnorm\n"
               "  optimizer  sgd (nesterov momentum 0.9; rmsprop rho 0.99 eps 1e-8;\n"
               "             adadelta rho 0.95 eps 1e-6; adam 0.9/0.999/1e-8)\n"
               "  schedule   fixed at base_lr 0.01\n"
               "  run        max_iter 2000, eval_every 100, batchsize 64, seed 42");

    // schedule
    auto* schedule = app.add_subcommand("schedule", "print (iter,lr) CSV for a policy");
    ScheduleFlags schedule_flags;
    schedule_flags.add(*schedule, /*require_policy=*/true);
    long long schedule_iters = 1;
    schedule->add_option("--iters", schedule_iters, "number of iterations to print")->required();

    // range-test
    auto* range = app.add_subcommand("range-test",
                                     "run the LR range test and estimate (base_lr, max_lr)");
    std::string range_config;
    range->add_option("config", range_config, "experiment config JSON (defaults apply if omitted)");
    ScheduleFlags range_overrides;
    range_overrides.add(*range, false);
    std::optional<double> range_lr_start, range_lr_end;
    std::optional<long long> range_iters, range_eval_every;
    std::optional<std::uint64_t> range_seed;
    std::string range_metric, range_out;
    BoundConfig range_bounds;
    range->add_option("--lr-start", range_lr_start, "initial learning rate (default 0.0001)");
    range->add_option("--lr-end", range_lr_end, "final learning rate (default 2)");
    range->add_option("--iters", range_iters, "range test length (default 400)");
    range->add_option("--eval-every", range_eval_every, "metric cadence (default 2)");
    range->add_option("--metric", range_metric, "accuracy (default) or loss");
    range->add_option("--smooth", range_bounds.smooth_window, "odd smoothing window (default 5)");
    range->add_option("--rise-eps", range_bounds.rise_eps,
                      "rise threshold as a fraction of metric range (default 0.02)");
    range->add_option("--fall-eps", range_bounds.fall_eps,
                      "decline threshold as a fraction of metric range (default 0.05)");
    range->add_option("--ragged-eps", range_bounds.ragged_eps,
                      "raggedness threshold as a fraction of metric range (default 0.03)");
    range->add_option("--ragged-window", range_bounds.ragged_window,
                      "trailing samples for the raggedness estimate (default 7)");
    range->add_option("--seed", range_seed, "run seed (default: config, then $CYCLELR_SEED, then 42)");
    range->add_option("--out", range_out, "write the trace CSV here");

    // train
    auto* train_cmd = app.add_subcommand("train", "train with a schedule and log metrics");
    std::string train_config, train_out;
    train_cmd->add_option("config", train_config, "experiment config JSON (defaults apply if omitted)");
    ScheduleFlags train_overrides;
    train_overrides.add(*train_cmd, false);
    std::optional<std::uint64_t> train_seed;
    std::optional<long long> train_max_iter, train_eval_every, train_batchsize;
    bool train_stop_at_cycle_end = false;
    train_cmd->add_option("--seed", train_seed, "run seed (default: config, then $CYCLELR_SEED, then 42)");
    train_cmd->add_option("--max-iter", train_max_iter, "optimizer steps (default 2000)");
    train_cmd->add_option("--eval-every", train_eval_every, "evaluation cadence (default 100)");
    train_cmd->add_option("--batchsize", train_batchsize, "minibatch size (default 64)");
    train_cmd->add_flag("--stop-at-cycle-end", train_stop_at_cycle_end,
                        "trim the run to the last full cycle");
    train_cmd->add_option("--out", train_out, "write the metric log CSV here");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "train configs over seeds, summarize");
    std::vector<std::string> compare_configs;
    compare_cmd->add_option("configs", compare_configs, "experiment config JSON files")
        ->required()
        ->expected(-1);
    std::string compare_seeds = "1,2,3,4,5";
    double compare_threshold = 0.9;
    std::string compare_out, compare_log_dir;
    compare_cmd->add_option("--seeds", compare_seeds, "comma-separated seed list (default 1,2,3,4,5)");
    compare_cmd->add_option("--threshold", compare_threshold,
                            "accuracy threshold for iterations-to-threshold (default 0.9)");
    compare_cmd->add_option("--out", compare_out, "write the summary JSON here");
    compare_cmd->add_option("--log-dir", compare_log_dir,
                            "also write one metric-log CSV per config and seed here");

    // plot
    auto* plot = app.add_subcommand("plot", "render a CSV column pair as an SVG line chart");
    std::string plot_csv, plot_x = "iter", plot_y, plot_out = "plot.svg";
    plot->add_option("csv", plot_csv, "input CSV with a header row")->required();
    plot->add_option("--x", plot_x, "x column name (default iter)");
    plot->add_option("--y", plot_y, "y column name")->required();
    plot->add_option("--out", plot_out, "output SVG path (default plot.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return kExitUsage;
    }

    try {
        if (schedule->parsed()) return cmd_schedule(schedule_flags, schedule_iters);
        if (range->parsed())
            return cmd_range_test(range_config, range_overrides, range_lr_start, range_lr_end,
                                  range_iters, range_eval_every, range_metric, range_out,
                                  range_seed, range_bounds);
        if (train_cmd->parsed())
            return cmd_train(train_config, train_overrides, train_out, train_seed, train_max_iter,
                             train_eval_every, train_batchsize, train_stop_at_cycle_end);
        if (compare_cmd->parsed())
            return cmd_compare(compare_configs, compare_seeds, compare_threshold, compare_out,
                               compare_log_dir);
        if (plot->parsed()) return cmd_plot(plot_csv, plot_x, plot_y, plot_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAnalysis;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
