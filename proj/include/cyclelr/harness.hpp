#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <functional>
#include <variant>
#include <vector>

#include "cyclelr/data.hpp"
#include "cyclelr/lr_finder.hpp"
#include "cyclelr/nn.hpp"
#include "cyclelr/optim.hpp"
#include "cyclelr/schedules.hpp"

namespace cyclelr {

enum class DatasetKind { two_moons, blobs, spirals, csv };

const char* to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& name);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::two_moons;
    Eigen::Index n = 2000;
    double noise = 0.2;        // two_moons / spirals
    int k = 3;                 // blobs classes / spiral arms
    double separation = 6.0;   // blobs
    double turns = 1.5;        // spirals
    std::string path;          // csv
    std::string label_column = "label";
    double test_fraction = 0.2;
    // generator seed; when unset it is derived from the run seed
    std::optional<std::uint64_t> seed;

    Dataset make(std::uint64_t run_seed) const;
};

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::sgd;
    std::optional<double> momentum, rho, eps, beta1, beta2;

    OptimizerState make(Eigen::Index n_params) const;
};

using ScheduleSpec = std::variant<PolicySpec, PhasedSchedule>;

bool schedule_is_cyclic(const ScheduleSpec& schedule);

// Learning rate for a MetricLog row. Matches lr_at/lr_phased everywhere
// they are defined; the one extension is the terminal evaluation of a
// phased schedule at exactly t == max_iter, which uses the last phase.
double schedule_lr(const ScheduleSpec& schedule, long long t);

struct TrainConfig {
    std::string name = "run";
    DatasetSpec dataset;
    ModelSpec model{{LayerSpec{16, Activation::relu, false}, LayerSpec{16, Activation::relu, false}}};
    OptimizerSpec optimizer;
    ScheduleSpec schedule = PolicySpec::make_fixed(0.01);
    long long max_iter = 2000;
    long long eval_every = 100;
    Eigen::Index batchsize = 64;
    std::uint64_t seed = 42;
    bool stop_at_cycle_end = false;
};

struct MetricRow {
    long long iter = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_acc = 0.0;
};

struct MetricLog {
    std::vector<MetricRow> rows;
    bool diverged = false;
    std::string diagnostics;

    long long final_iter() const { return rows.empty() ? 0 : rows.back().iter; }
    double final_accuracy() const { return rows.empty() ? 0.0 : rows.back().test_acc; }
    double best_accuracy() const;
    long long best_iteration() const;

    // header iter,lr,train_loss,test_acc
    std::string to_csv() const;
};

// Owns one deterministic run: dataset, model, optimizer and batch order
// all derive from the config seed.
class Trainer : public RangeTestClient {
public:
    explicit Trainer(const TrainConfig& cfg);

    double train_step(double lr) override;
    double eval_metric(RangeMetric metric) override;

    double test_accuracy();
    double full_train_loss();
    long long steps_taken() const { return step_; }
    const Dataset& dataset() const { return data_; }
    Mlp& model() { return model_; }

private:
    void next_batch(Matrix& x, std::vector<int>& y);

    TrainConfig cfg_;
    Dataset data_;
    Mlp model_;
    OptimizerState opt_;
    std::vector<std::vector<Eigen::Index>> epoch_batches_;
    long long epoch_ = 0;
    std::size_t batch_in_epoch_ = 0;
    long long step_ = 0;
};

// Runs max_iter optimizer steps (fewer when stop_at_cycle_end trims to the
// last full cycle), logging full-train loss and test accuracy at every
// eval_every-th iteration plus, for cyclic schedules, every half-cycle
// boundary. A divergent step truncates the log and sets the flag.
MetricLog train(const TrainConfig& cfg);

struct CompareEntry {
    std::string name;
    double median_final_acc = 0.0;
    double mean_final_acc = 0.0;
    // median first iteration reaching the accuracy threshold; -1 when the
    // median run never reaches it
    long long median_iters_to_threshold = -1;
    double threshold = 0.0;
    std::vector<double> final_accs;
};

using RunLogSink =
    std::function<void(const TrainConfig& cfg, std::uint64_t seed, const MetricLog& log)>;

std::vector<CompareEntry> compare(const std::vector<TrainConfig>& configs,
                                  const std::vector<std::uint64_t>& seeds, double threshold,
                                  const RunLogSink& on_log = {});

struct WorkflowConfig {
    DatasetSpec dataset;
    ModelSpec model{{LayerSpec{16, Activation::relu, false}, LayerSpec{16, Activation::relu, false}}};
    OptimizerSpec optimizer;
    RangeTestConfig range;
    BoundConfig bounds;
    double epochs_per_step = 4.0;
    long long max_iter = 0;  // 0: four full cycles
    long long eval_every = 25;
    Eigen::Index batchsize = 64;
    std::uint64_t seed = 42;
};

struct WorkflowResult {
    BoundEstimate bounds;
    long long stepsize = 0;
    PolicySpec policy;
    MetricLog log;
};

// Range test -> bound estimate -> stepsize suggestion -> triangular
// training run that stops at the end of the last full cycle.
WorkflowResult clr_workflow(const WorkflowConfig& cfg);

struct PeakPhaseReport {
    struct Cycle {
        int cycle = 0;  // 1-based
        long long mid_iter = 0;
        double mid_acc = 0.0;
        long long end_iter = 0;
        double end_acc = 0.0;
    };
    std::vector<Cycle> cycles;
    double fraction_end_ge_mid = 0.0;
};

// Per-cycle accuracy at the lr peak (mid-cycle) and the lr minimum
// (cycle end), read from the nearest logged rows.
PeakPhaseReport peak_phase_report(const MetricLog& log, const ScheduleSpec& schedule);

} // namespace cyclelr
