#include "aimm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>

#include "aimm/errors.hpp"

namespace aimm {

namespace {

const std::map<std::string, Strategy>& strategy_table() {
    static const std::map<std::string, Strategy> table = {
        {"Aim", Strategy::Aim},
        {"AimNoLS", Strategy::AimNoLS},
        {"AimNoFS", Strategy::AimNoFS},
        {"AimMGM", Strategy::AimMGM},
        {"FixedInterval", Strategy::FixedInterval},
        {"SingleMergeEndOfTask", Strategy::SingleMergeEndOfTask},
        {"ReplayOnly", Strategy::ReplayOnly},
        {"Sequential", Strategy::Sequential},
    };
    return table;
}

const char* mode_name(InterferenceMode m) {
    switch (m) {
    case InterferenceMode::Rotation: return "rotation";
    case InterferenceMode::Permutation: return "permutation";
    case InterferenceMode::MeanShift: return "mean_shift";
    }
    return "?";
}

InterferenceMode mode_from_name(const std::string& name) {
    if (name == "rotation") return InterferenceMode::Rotation;
    if (name == "permutation") return InterferenceMode::Permutation;
    if (name == "mean_shift") return InterferenceMode::MeanShift;
    throw ValidationError("config: unknown interference_mode '" + name + "'");
}

// Typed field access with config-error wrapping so a bad file reports the
// offending key instead of a raw json exception.
template <typename T>
T get_field(const nlohmann::ordered_json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config: bad value for '") + key +
                              "'");
    }
}

} // namespace

std::string strategy_name(Strategy s) {
    for (const auto& [name, value] : strategy_table()) {
        if (value == s) return name;
    }
    return "?";
}

Strategy strategy_from_name(const std::string& name) {
    auto it = strategy_table().find(name);
    if (it == strategy_table().end()) {
        throw ValidationError("config: unknown strategy '" + name + "'");
    }
    return it->second;
}

void ExperimentConfig::validate() const {
    sequence.validate();
    model.validate();
    controller.validate();
    if (sequence.num_tasks < 2) {
        throw ValidationError(
            "config: transfer metrics need at least two tasks");
    }
    if (model.input_dim != sequence.input_dim) {
        throw ValidationError("config: model input_dim must match sequence");
    }
    if (model.num_classes != sequence.classes_per_task) {
        throw ValidationError("config: model num_classes must match sequence");
    }
    if (!(lr > 0.0)) throw ValidationError("config: lr > 0");
    if (batch_size < 1) throw ValidationError("config: batch_size >= 1");
    if (epochs_per_task < 1) throw ValidationError("config: epochs_per_task >= 1");
    if (!(memory_fraction > 0.0 && memory_fraction <= 1.0)) {
        throw ValidationError("config: memory_fraction in (0, 1]");
    }
    if (strategy == Strategy::FixedInterval && strategy_interval < 1) {
        throw ValidationError("config: strategy_interval >= 1");
    }
    if (!(strategy_alpha1 >= 0.0 && strategy_alpha1 <= 1.0)) {
        throw ValidationError("config: strategy_alpha1 in [0, 1]");
    }
    if (seeds.empty()) throw ValidationError("config: at least one seed");
    if (output_dir.empty()) throw ValidationError("config: output_dir set");
}

std::vector<std::string> ExperimentConfig::warnings() const {
    return controller.range_warnings();
}

ExperimentConfig config_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw ValidationError("config: root must be an object");
    int version = get_field<int>(j, "schema_version", -1);
    if (version != 1) {
        throw ValidationError("config: schema_version must be 1");
    }

    ExperimentConfig cfg;

    if (j.contains("sequence")) {
        const auto& js = j.at("sequence");
        SequenceSpec& s = cfg.sequence;
        s.num_tasks = get_field<int>(js, "num_tasks", s.num_tasks);
        s.input_dim = get_field<int>(js, "input_dim", s.input_dim);
        s.classes_per_task =
            get_field<int>(js, "classes_per_task", s.classes_per_task);
        s.samples_per_task =
            get_field<int>(js, "samples_per_task", s.samples_per_task);
        s.test_samples_per_task = get_field<int>(js, "test_samples_per_task",
                                                 s.test_samples_per_task);
        s.interference_mode = mode_from_name(get_field<std::string>(
            js, "interference_mode", mode_name(s.interference_mode)));
        s.interference_strength = get_field<double>(
            js, "interference_strength", s.interference_strength);
        s.class_separation =
            get_field<double>(js, "class_separation", s.class_separation);
        s.noise_std = get_field<double>(js, "noise_std", s.noise_std);
        s.seed = get_field<std::uint64_t>(js, "seed", s.seed);
    }

    if (j.contains("model")) {
        const auto& jm = j.at("model");
        ModelSpec& m = cfg.model;
        m.input_dim = get_field<int>(jm, "input_dim", cfg.sequence.input_dim);
        m.hidden_dims =
            get_field<std::vector<int>>(jm, "hidden_dims", m.hidden_dims);
        m.num_classes =
            get_field<int>(jm, "num_classes", cfg.sequence.classes_per_task);
        m.seed = get_field<std::uint64_t>(jm, "seed", m.seed);
    } else {
        cfg.model.input_dim = cfg.sequence.input_dim;
        cfg.model.num_classes = cfg.sequence.classes_per_task;
    }

    if (j.contains("controller")) {
        const auto& jc = j.at("controller");
        ControllerConfig& c = cfg.controller;
        c.s_init = get_field<int>(jc, "s_init", c.s_init);
        c.l_w = get_field<int>(jc, "l_w", c.l_w);
        c.s_min = get_field<int>(jc, "s_min", c.s_min);
        c.s_max = get_field<int>(jc, "s_max", c.s_max);
        c.gamma_learn_plus_small = get_field<double>(
            jc, "gamma_learn_plus_small", c.gamma_learn_plus_small);
        c.gamma_learn_minus_small = get_field<double>(
            jc, "gamma_learn_minus_small", c.gamma_learn_minus_small);
        c.gamma_learn_plus_large = get_field<double>(
            jc, "gamma_learn_plus_large", c.gamma_learn_plus_large);
        c.gamma_learn_minus_large = get_field<double>(
            jc, "gamma_learn_minus_large", c.gamma_learn_minus_large);
        c.gamma_forget = get_field<double>(jc, "gamma_forget", c.gamma_forget);
        c.f_max = get_field<int>(jc, "f_max", c.f_max);
        c.calib_fraction =
            get_field<double>(jc, "calib_fraction", c.calib_fraction);
    }

    cfg.strategy = strategy_from_name(
        get_field<std::string>(j, "strategy", strategy_name(cfg.strategy)));
    cfg.strategy_interval =
        get_field<int>(j, "strategy_interval", cfg.strategy_interval);
    cfg.strategy_alpha1 =
        get_field<double>(j, "strategy_alpha1", cfg.strategy_alpha1);
    cfg.lr = get_field<double>(j, "lr", cfg.lr);
    cfg.batch_size = get_field<int>(j, "batch_size", cfg.batch_size);
    cfg.epochs_per_task =
        get_field<int>(j, "epochs_per_task", cfg.epochs_per_task);
    cfg.memory_fraction =
        get_field<double>(j, "memory_fraction", cfg.memory_fraction);
    cfg.reset_controller_per_task = get_field<bool>(
        j, "reset_controller_per_task", cfg.reset_controller_per_task);
    cfg.seeds =
        get_field<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
    cfg.output_dir = get_field<std::string>(j, "output_dir", cfg.output_dir);

    cfg.validate();
    return cfg;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["sequence"] = {
        {"num_tasks", cfg.sequence.num_tasks},
        {"input_dim", cfg.sequence.input_dim},
        {"classes_per_task", cfg.sequence.classes_per_task},
        {"samples_per_task", cfg.sequence.samples_per_task},
        {"test_samples_per_task", cfg.sequence.test_samples_per_task},
        {"interference_mode", mode_name(cfg.sequence.interference_mode)},
        {"interference_strength", cfg.sequence.interference_strength},
        {"class_separation", cfg.sequence.class_separation},
        {"noise_std", cfg.sequence.noise_std},
        {"seed", cfg.sequence.seed},
    };
    j["model"] = {
        {"input_dim", cfg.model.input_dim},
        {"hidden_dims", cfg.model.hidden_dims},
        {"num_classes", cfg.model.num_classes},
        {"seed", cfg.model.seed},
    };
    j["controller"] = {
        {"s_init", cfg.controller.s_init},
        {"l_w", cfg.controller.l_w},
        {"s_min", cfg.controller.s_min},
        {"s_max", cfg.controller.s_max},
        {"gamma_learn_plus_small", cfg.controller.gamma_learn_plus_small},
        {"gamma_learn_minus_small", cfg.controller.gamma_learn_minus_small},
        {"gamma_learn_plus_large", cfg.controller.gamma_learn_plus_large},
        {"gamma_learn_minus_large", cfg.controller.gamma_learn_minus_large},
        {"gamma_forget", cfg.controller.gamma_forget},
        {"f_max", cfg.controller.f_max},
        {"calib_fraction", cfg.controller.calib_fraction},
    };
    j["strategy"] = strategy_name(cfg.strategy);
    j["strategy_interval"] = cfg.strategy_interval;
    j["strategy_alpha1"] = cfg.strategy_alpha1;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["epochs_per_task"] = cfg.epochs_per_task;
    j["memory_fraction"] = cfg.memory_fraction;
    j["reset_controller_per_task"] = cfg.reset_controller_per_task;
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir;
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: invalid JSON in " + path.string() +
                              ": " + e.what());
    }
    ExperimentConfig cfg = config_from_json(j);

    if (const char* env = std::getenv("AIMMERGE_SEED")) {
        try {
            std::size_t pos = 0;
            std::uint64_t seed = std::stoull(env, &pos);
            if (pos != std::string(env).size()) {
                throw std::invalid_argument("trailing characters");
            }
            cfg.seeds = {seed};
        } catch (const std::exception&) {
            throw ValidationError(
                "AIMMERGE_SEED must be an unsigned integer, got '" +
                std::string(env) + "'");
        }
    }
    return cfg;
}

ExperimentConfig default_desk_config() {
    ExperimentConfig cfg;
    cfg.sequence.num_tasks = 4;
    cfg.sequence.input_dim = 16;
    cfg.sequence.classes_per_task = 4;
    cfg.sequence.samples_per_task = 500;
    cfg.sequence.test_samples_per_task = 200;
    cfg.sequence.interference_mode = InterferenceMode::Rotation;
    cfg.sequence.interference_strength = 2.0;
    cfg.sequence.class_separation = 2.5;
    cfg.sequence.noise_std = 0.55;
    cfg.sequence.seed = 42;
    cfg.model.input_dim = 16;
    cfg.model.hidden_dims = {32};
    cfg.model.num_classes = 4;
    cfg.model.seed = 7;
    cfg.strategy = Strategy::Aim;
    cfg.lr = 0.08;
    cfg.batch_size = 8;
    cfg.epochs_per_task = 5;
    cfg.memory_fraction = 0.02;
    cfg.seeds = {1, 2, 3};
    cfg.output_dir = "out";
    return cfg;
}

} // namespace aimm
