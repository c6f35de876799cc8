#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aimm/controller.hpp"
#include "aimm/tasks.hpp"
#include "aimm/trainer.hpp"

#include <json.hpp>

namespace aimm {

// Experiment configuration: one strategy, one task sequence, one or more
// seeds. JSON schema_version 1.

enum class Strategy {
    Aim,                  // full method: both signals drive the schedule
    AimNoLS,              // interval fixed at s_init, forgetting logic active
    AimNoFS,              // no probes; merges exactly every s_current
    AimMGM,               // full schedule, fixed merge weights
    FixedInterval,        // merge every strategy_interval steps
    SingleMergeEndOfTask, // one fixed-weight merge per task boundary
    ReplayOnly,           // memory mixed 1:1 into gradients, no merging
    Sequential,           // plain SGD, no memory, no merging
};

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ExperimentConfig {
    SequenceSpec sequence;
    ModelSpec model;
    ControllerConfig controller;
    Strategy strategy = Strategy::Aim;
    int strategy_interval = 8;    // FixedInterval
    double strategy_alpha1 = 0.5; // AimMGM, SingleMergeEndOfTask
    double lr = 3e-4;
    int batch_size = 8;
    int epochs_per_task = 5;
    double memory_fraction = 0.02;
    bool reset_controller_per_task = false;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "out";

    void validate() const;
    // Soft notes (controller values outside the tuned ranges). Never fatal.
    std::vector<std::string> warnings() const;
};

ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

// Reads and validates a config file. The AIMMERGE_SEED environment variable,
// when set, replaces the seed list with that single seed.
ExperimentConfig load_config(const std::filesystem::path& path);

// The shipped 4-task desk experiment; tuned so sequential training visibly
// forgets while the merging strategies have room to recover.
ExperimentConfig default_desk_config();

} // namespace aimm
