#include "cyclelr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cyclelr/common.hpp"
#include "cyclelr/rng.hpp"

namespace cyclelr {

namespace {
constexpr std::uint64_t kDatasetStream = 0x64617461;  // dataset substream tag
constexpr std::uint64_t kModelStream = 0x6D6F646C;    // model-init substream tag
} // namespace

const char* to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::two_moons: return "two_moons";
        case DatasetKind::blobs: return "blobs";
        case DatasetKind::spirals: return "spirals";
        case DatasetKind::csv: return "csv";
    }
    return "?";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "two_moons") return DatasetKind::two_moons;
    if (name == "blobs") return DatasetKind::blobs;
    if (name == "spirals") return DatasetKind::spirals;
    if (name == "csv") return DatasetKind::csv;
    throw ConfigError("unknown dataset kind \"" + name + "\"");
}

Dataset DatasetSpec::make(std::uint64_t run_seed) const {
    const std::uint64_t data_seed = seed ? *seed : mix_seed(run_seed, kDatasetStream);
    switch (kind) {
        case DatasetKind::two_moons: return two_moons(n, noise, data_seed, test_fraction);
        case DatasetKind::blobs: return gaussian_blobs(n, k, separation, data_seed, test_fraction);
        case DatasetKind::spirals: return spirals(n, turns, noise, data_seed, k, test_fraction);
        case DatasetKind::csv: return load_csv(path, label_column, test_fraction);
    }
    throw Error("unhandled dataset kind");
}

OptimizerState OptimizerSpec::make(Eigen::Index n_params) const {
    OptimizerState state = make_optimizer(kind, n_params);
    if (momentum) state.momentum = *momentum;
    if (rho) state.rho = *rho;
    if (eps) state.eps = *eps;
    if (beta1) state.beta1 = *beta1;
    if (beta2) state.beta2 = *beta2;
    return state;
}

bool schedule_is_cyclic(const ScheduleSpec& schedule) {
    if (const auto* spec = std::get_if<PolicySpec>(&schedule)) return spec->cyclic();
    return false;
}

double schedule_lr(const ScheduleSpec& schedule, long long t) {
    if (const auto* spec = std::get_if<PolicySpec>(&schedule)) return lr_at(t, *spec);
    const auto& sched = std::get<PhasedSchedule>(schedule);
    if (t == sched.max_iter) {
        const auto& last = sched.phases.back();
        return lr_at(t - last.start_iter, last.spec);
    }
    return lr_phased(t, sched);
}

double MetricLog::best_accuracy() const {
    double best = 0.0;
    for (const auto& row : rows) best = std::max(best, row.test_acc);
    return best;
}

long long MetricLog::best_iteration() const {
    long long iter = 0;
    double best = -1.0;
    for (const auto& row : rows) {
        if (row.test_acc > best) {
            best = row.test_acc;
            iter = row.iter;
        }
    }
    return iter;
}

std::string MetricLog::to_csv() const {
    std::string out = "iter,lr,train_loss,test_acc\n";
    for (const auto& row : rows) {
        out += std::to_string(row.iter) + "," + fmt_double(row.lr) + "," +
               fmt_double(row.train_loss) + "," + fmt_double(row.test_acc) + "\n";
    }
    return out;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      data_(cfg.dataset.make(cfg.seed)),
      model_(Mlp::make(static_cast<int>(data_.feature_dim()), cfg.model, data_.classes,
                       mix_seed(cfg.seed, kModelStream))),
      opt_(cfg.optimizer.make(model_.param_count())) {
    check_config(cfg_.batchsize >= 1 && cfg_.batchsize <= data_.train_size(),
                 "batchsize must be in [1, train size]");
    epoch_batches_ = minibatches(data_, cfg_.batchsize, cfg_.seed, 0);
}

void Trainer::next_batch(Matrix& x, std::vector<int>& y) {
    if (batch_in_epoch_ >= epoch_batches_.size()) {
        ++epoch_;
        batch_in_epoch_ = 0;
        epoch_batches_ = minibatches(data_, cfg_.batchsize, cfg_.seed, epoch_);
    }
    const auto& idx = epoch_batches_[batch_in_epoch_++];
    x = data_.gather_features(idx);
    y = data_.gather_labels(idx);
}

double Trainer::train_step(double lr) {
    Matrix x;
    std::vector<int> y;
    next_batch(x, y);
    model_.set_mode(Mode::train);
    auto [loss, grad] = model_.loss_and_grad(x, y);
    if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite training loss at step " + std::to_string(step_), step_);
    }
    Vector params = model_.params();
    optimizer_step(opt_, params, grad, lr);
    model_.set_params(params);
    ++step_;
    return loss;
}

double Trainer::test_accuracy() {
    model_.set_mode(Mode::eval);
    const Matrix x = data_.gather_features(data_.test_indices);
    const std::vector<int> y = data_.gather_labels(data_.test_indices);
    const Matrix scores = model_.forward(x);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index pred;
        scores.row(i).maxCoeff(&pred);
        if (static_cast<int>(pred) == y[static_cast<std::size_t>(i)]) ++correct;
    }
    model_.set_mode(Mode::train);
    return scores.rows() == 0 ? 0.0
                              : static_cast<double>(correct) / static_cast<double>(scores.rows());
}

double Trainer::full_train_loss() {
    model_.set_mode(Mode::eval);
    const Matrix x = data_.gather_features(data_.train_indices);
    const std::vector<int> y = data_.gather_labels(data_.train_indices);
    const double loss = softmax_cross_entropy(model_.forward(x), y);
    model_.set_mode(Mode::train);
    return loss;
}

double Trainer::eval_metric(RangeMetric metric) {
    return metric == RangeMetric::accuracy ? test_accuracy() : full_train_loss();
}

namespace {

long long trimmed_final_iter(const TrainConfig& cfg) {
    if (!cfg.stop_at_cycle_end || !schedule_is_cyclic(cfg.schedule)) return cfg.max_iter;
    const auto& spec = std::get<PolicySpec>(cfg.schedule);
    const long long cycle_len = 2 * *spec.stepsize;
    const long long cycles = (cfg.max_iter - spec.start) / cycle_len;
    check_config(cycles >= 1, "max_iter shorter than one cycle");
    return spec.start + cycles * cycle_len;
}

std::set<long long> eval_points(const TrainConfig& cfg, long long final_iter) {
    std::set<long long> points;
    points.insert(0);
    points.insert(final_iter);
    for (long long t = 0; t <= final_iter; t += cfg.eval_every) points.insert(t);
    if (schedule_is_cyclic(cfg.schedule)) {
        const auto& spec = std::get<PolicySpec>(cfg.schedule);
        for (long long t = spec.start + *spec.stepsize; t <= final_iter; t += *spec.stepsize)
            points.insert(t);
    }
    return points;
}

double median(std::vector<double> values) {
    check(!values.empty(), "median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

MetricLog train(const TrainConfig& cfg) {
    check_config(cfg.max_iter >= 0, "max_iter must be non-negative");
    check_config(cfg.eval_every >= 1, "eval_every must be >= 1");

    Trainer trainer(cfg);
    const long long final_iter = trimmed_final_iter(cfg);
    const std::set<long long> points = eval_points(cfg, final_iter);

    MetricLog log;
    for (long long t = 0; t <= final_iter; ++t) {
        if (points.count(t)) {
            log.rows.push_back({t, schedule_lr(cfg.schedule, t), trainer.full_train_loss(),
                                trainer.test_accuracy()});
        }
        if (t == final_iter) break;
        try {
            trainer.train_step(schedule_lr(cfg.schedule, t));
        } catch (const DivergenceError& e) {
            log.diverged = true;
            log.diagnostics = e.what();
            break;
        }
    }
    return log;
}

std::vector<CompareEntry> compare(const std::vector<TrainConfig>& configs,
                                  const std::vector<std::uint64_t>& seeds, double threshold,
                                  const RunLogSink& on_log) {
    check(!configs.empty(), "compare: need at least one config");
    check(!seeds.empty(), "compare: need at least one seed");

    std::vector<CompareEntry> entries;
    for (const auto& cfg : configs) {
        CompareEntry entry;
        entry.name = cfg.name;
        entry.threshold = threshold;
        std::vector<double> iters_to_threshold;
        double sum = 0.0;
        for (const std::uint64_t seed : seeds) {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = seed;
            const MetricLog log = train(run_cfg);
            if (on_log) on_log(run_cfg, seed, log);
            const double final_acc = log.final_accuracy();
            entry.final_accs.push_back(final_acc);
            sum += final_acc;
            double reached = std::numeric_limits<double>::infinity();
            for (const auto& row : log.rows) {
                if (row.test_acc >= threshold) {
                    reached = static_cast<double>(row.iter);
                    break;
                }
            }
            iters_to_threshold.push_back(reached);
        }
        entry.median_final_acc = median(entry.final_accs);
        entry.mean_final_acc = sum / static_cast<double>(seeds.size());
        const double med_iters = median(iters_to_threshold);
        entry.median_iters_to_threshold =
            std::isfinite(med_iters) ? static_cast<long long>(med_iters) : -1;
        entries.push_back(std::move(entry));
    }
    return entries;
}

WorkflowResult clr_workflow(const WorkflowConfig& cfg) {
    TrainConfig base;
    base.dataset = cfg.dataset;
    base.model = cfg.model;
    base.optimizer = cfg.optimizer;
    base.batchsize = cfg.batchsize;
    base.seed = cfg.seed;

    // fresh trainer for the range test; the real run below starts over
    RangeTestConfig range_cfg = cfg.range;
    Trainer probe(base);
    RangeTestTrace trace = run_range_test(probe, range_cfg);
    trace = smooth(trace, cfg.bounds.smooth_window);

    WorkflowResult result;
    try {
        result.bounds = estimate_bounds(trace, cfg.bounds);
    } catch (const Error& e) {
        throw Error(std::string(e.what()) +
                    "\nhint: widen the range test (lr_start/lr_end) or train longer "
                    "(num_iters) and rerun");
    }

    result.stepsize = stepsize_suggest(probe.dataset().train_size(), base.batchsize,
                                       cfg.epochs_per_step);
    result.policy = PolicySpec::make_triangular(result.bounds.base_lr, result.bounds.max_lr,
                                                result.stepsize);

    TrainConfig run = base;
    run.schedule = result.policy;
    run.max_iter = cfg.max_iter > 0 ? cfg.max_iter : 8 * result.stepsize;  // four cycles
    run.eval_every = cfg.eval_every;
    run.stop_at_cycle_end = true;
    check_config(run.max_iter >= 2 * result.stepsize, "max_iter shorter than one cycle");
    result.log = train(run);
    return result;
}

PeakPhaseReport peak_phase_report(const MetricLog& log, const ScheduleSpec& schedule) {
    check(schedule_is_cyclic(schedule), "peak_phase_report requires a cyclic policy schedule");
    check(!log.rows.empty(), "peak_phase_report: empty log");
    const auto& spec = std::get<PolicySpec>(schedule);
    const long long stepsize = *spec.stepsize;
    const long long final_iter = log.final_iter();
    const long long cycles = (final_iter - spec.start) / (2 * stepsize);
    check(cycles >= 1, "peak_phase_report: log shorter than one full cycle");

    auto nearest_row = [&log](long long target) {
        const MetricRow* best = &log.rows.front();
        for (const auto& row : log.rows) {
            if (std::llabs(row.iter - target) < std::llabs(best->iter - target)) best = &row;
        }
        return best;
    };

    PeakPhaseReport report;
    int hits = 0;
    for (long long k = 1; k <= cycles; ++k) {
        const long long mid = spec.start + (2 * k - 1) * stepsize;
        const long long end = spec.start + 2 * k * stepsize;
        const MetricRow* mid_row = nearest_row(mid);
        const MetricRow* end_row = nearest_row(end);
        report.cycles.push_back({static_cast<int>(k), mid_row->iter, mid_row->test_acc,
                                 end_row->iter, end_row->test_acc});
        if (end_row->test_acc >= mid_row->test_acc) ++hits;
    }
    report.fraction_end_ge_mid = static_cast<double>(hits) / static_cast<double>(cycles);
    return report;
}

} // namespace cyclelr
