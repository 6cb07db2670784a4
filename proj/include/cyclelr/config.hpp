#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>

#include "cyclelr/harness.hpp"

namespace cyclelr {

// Experiment config file: a JSON document with optional sections
// "dataset", "model", "optimizer", "schedule" and "run". Unknown keys are
// rejected with an error naming the key. Missing sections fall back to
// the documented defaults (the two-moons desk task trained with sgd at a
// fixed rate).
struct ExperimentConfig {
    TrainConfig train;
    bool seed_was_set = false;  // whether the file pinned run.seed
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

PolicySpec policy_from_json(const nlohmann::json& node);
nlohmann::json policy_to_json(const PolicySpec& spec);
ScheduleSpec schedule_from_json(const nlohmann::json& node, long long max_iter);
nlohmann::json schedule_to_json(const ScheduleSpec& schedule);

nlohmann::json summary_to_json(const MetricLog& log);
nlohmann::json bounds_to_json(const BoundEstimate& bounds);
nlohmann::json compare_to_json(const std::vector<CompareEntry>& entries);

} // namespace cyclelr
