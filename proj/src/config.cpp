#include "cyclelr/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "cyclelr/common.hpp"

namespace cyclelr {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& section,
                         std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key \"" + it.key() + "\" in " + section);
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for \"") + key + "\"");
    }
}

DatasetSpec parse_dataset(const json& node) {
    reject_unknown_keys(node, "dataset",
                        {"kind", "n", "noise", "k", "separation", "turns", "path",
                         "label_column", "test_fraction", "seed"});
    DatasetSpec spec;
    spec.kind = dataset_kind_from_string(get_or<std::string>(node, "kind", "two_moons"));
    spec.n = get_or<Eigen::Index>(node, "n", spec.n);
    spec.noise = get_or<double>(node, "noise", spec.noise);
    spec.k = get_or<int>(node, "k", spec.k);
    spec.separation = get_or<double>(node, "separation", spec.separation);
    spec.turns = get_or<double>(node, "turns", spec.turns);
    spec.path = get_or<std::string>(node, "path", spec.path);
    spec.label_column = get_or<std::string>(node, "label_column", spec.label_column);
    spec.test_fraction = get_or<double>(node, "test_fraction", spec.test_fraction);
    if (node.contains("seed")) spec.seed = node.at("seed").get<std::uint64_t>();
    if (spec.kind == DatasetKind::csv) {
        check_config(!spec.path.empty(), "dataset kind \"csv\" requires \"path\"");
    }
    return spec;
}

ModelSpec parse_model(const json& node) {
    reject_unknown_keys(node, "model", {"hidden"});
    ModelSpec spec;
    if (!node.contains("hidden")) return ModelSpec{};
    spec.hidden.clear();
    for (const auto& layer : node.at("hidden")) {
        reject_unknown_keys(layer, "model.hidden[]", {"units", "activation", "batchnorm"});
        LayerSpec ls;
        ls.units = get_or<int>(layer, "units", 16);
        ls.activation = activation_from_string(get_or<std::string>(layer, "activation", "relu"));
        ls.batchnorm = get_or<bool>(layer, "batchnorm", false);
        spec.hidden.push_back(ls);
    }
    return spec;
}

OptimizerSpec parse_optimizer(const json& node) {
    reject_unknown_keys(node, "optimizer", {"kind", "momentum", "rho", "eps", "beta1", "beta2"});
    OptimizerSpec spec;
    spec.kind = optimizer_kind_from_string(get_or<std::string>(node, "kind", "sgd"));
    if (node.contains("momentum")) spec.momentum = node.at("momentum").get<double>();
    if (node.contains("rho")) spec.rho = node.at("rho").get<double>();
    if (node.contains("eps")) spec.eps = node.at("eps").get<double>();
    if (node.contains("beta1")) spec.beta1 = node.at("beta1").get<double>();
    if (node.contains("beta2")) spec.beta2 = node.at("beta2").get<double>();
    return spec;
}

} // namespace

PolicySpec policy_from_json(const json& node) {
    reject_unknown_keys(node, "schedule",
                        {"policy", "base_lr", "max_lr", "stepsize", "gamma", "start", "window"});
    PolicySpec spec;
    spec.kind = policy_kind_from_string(get_or<std::string>(node, "policy", "fixed"));
    spec.base_lr = get_or<double>(node, "base_lr", 0.01);
    if (node.contains("max_lr")) spec.max_lr = node.at("max_lr").get<double>();
    if (node.contains("stepsize")) spec.stepsize = node.at("stepsize").get<long long>();
    if (node.contains("gamma")) spec.gamma = node.at("gamma").get<double>();
    spec.start = get_or<long long>(node, "start", 0);
    spec.window = window_from_string(get_or<std::string>(node, "window", "triangular"));
    spec.validate();
    return spec;
}

json policy_to_json(const PolicySpec& spec) {
    json node;
    node["policy"] = to_string(spec.kind);
    node["base_lr"] = spec.base_lr;
    if (spec.max_lr) node["max_lr"] = *spec.max_lr;
    if (spec.stepsize) node["stepsize"] = *spec.stepsize;
    if (spec.gamma) node["gamma"] = *spec.gamma;
    if (spec.start != 0) node["start"] = spec.start;
    if (spec.window != Window::triangular) node["window"] = to_string(spec.window);
    return node;
}

ScheduleSpec schedule_from_json(const json& node, long long max_iter) {
    if (node.contains("policy") && node.at("policy") == "phased") {
        reject_unknown_keys(node, "schedule", {"policy", "phases"});
        check_config(node.contains("phases"), "phased schedule requires \"phases\"");
        PhasedSchedule sched;
        sched.max_iter = max_iter;
        for (const auto& phase : node.at("phases")) {
            reject_unknown_keys(phase, "schedule.phases[]", {"start_iter", "policy"});
            check_config(phase.contains("policy"), "phase requires \"policy\"");
            PhasedSchedule::Phase p;
            p.start_iter = get_or<long long>(phase, "start_iter", 0);
            p.spec = policy_from_json(phase.at("policy"));
            sched.phases.push_back(std::move(p));
        }
        sched.validate();
        return sched;
    }
    return policy_from_json(node);
}

json schedule_to_json(const ScheduleSpec& schedule) {
    if (const auto* spec = std::get_if<PolicySpec>(&schedule)) return policy_to_json(*spec);
    const auto& sched = std::get<PhasedSchedule>(schedule);
    json node;
    node["policy"] = "phased";
    node["phases"] = json::array();
    for (const auto& phase : sched.phases) {
        node["phases"].push_back(
            {{"start_iter", phase.start_iter}, {"policy", policy_to_json(phase.spec)}});
    }
    return node;
}

ExperimentConfig parse_experiment_config(const json& doc) {
    check_config(doc.is_object(), "config root must be a JSON object");
    reject_unknown_keys(doc, "config", {"dataset", "model", "optimizer", "schedule", "run"});
    ExperimentConfig cfg;

    if (doc.contains("run")) {
        const json& run = doc.at("run");
        reject_unknown_keys(run, "run",
                            {"max_iter", "eval_every", "batchsize", "seed", "stop_at_cycle_end",
                             "name"});
        cfg.train.max_iter = get_or<long long>(run, "max_iter", cfg.train.max_iter);
        cfg.train.eval_every = get_or<long long>(run, "eval_every", cfg.train.eval_every);
        cfg.train.batchsize = get_or<Eigen::Index>(run, "batchsize", cfg.train.batchsize);
        cfg.train.stop_at_cycle_end =
            get_or<bool>(run, "stop_at_cycle_end", cfg.train.stop_at_cycle_end);
        cfg.train.name = get_or<std::string>(run, "name", cfg.train.name);
        if (run.contains("seed")) {
            cfg.train.seed = run.at("seed").get<std::uint64_t>();
            cfg.seed_was_set = true;
        }
        check_config(cfg.train.max_iter >= 0, "run.max_iter must be non-negative");
        check_config(cfg.train.eval_every >= 1, "run.eval_every must be >= 1");
        check_config(cfg.train.batchsize >= 1, "run.batchsize must be >= 1");
    }
    if (doc.contains("dataset")) cfg.train.dataset = parse_dataset(doc.at("dataset"));
    if (doc.contains("model")) cfg.train.model = parse_model(doc.at("model"));
    if (doc.contains("optimizer")) cfg.train.optimizer = parse_optimizer(doc.at("optimizer"));
    if (doc.contains("schedule"))
        cfg.train.schedule = schedule_from_json(doc.at("schedule"), cfg.train.max_iter);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config \"" + path.string() + "\"");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse \"" + path.string() + "\": " + e.what());
    }
    return parse_experiment_config(doc);
}

json summary_to_json(const MetricLog& log) {
    json node;
    node["final_iter"] = log.final_iter();
    node["final_acc"] = log.final_accuracy();
    node["best_acc"] = log.best_accuracy();
    node["best_iter"] = log.best_iteration();
    node["diverged"] = log.diverged;
    return node;
}

json bounds_to_json(const BoundEstimate& bounds) {
    json node;
    node["base_lr"] = bounds.base_lr;
    node["max_lr"] = bounds.max_lr;
    node["method"] =
        bounds.method == BoundEstimate::Method::curve ? "curve" : "rule_of_thumb";
    node["diagnostics"] = bounds.diagnostics;
    return node;
}

json compare_to_json(const std::vector<CompareEntry>& entries) {
    json list = json::array();
    for (const auto& entry : entries) {
        json node;
        node["name"] = entry.name;
        node["median_final_acc"] = entry.median_final_acc;
        node["mean_final_acc"] = entry.mean_final_acc;
        node["median_iters_to_threshold"] = entry.median_iters_to_threshold;
        node["threshold"] = entry.threshold;
        node["final_accs"] = entry.final_accs;
        list.push_back(std::move(node));
    }
    return list;
}

} // namespace cyclelr
