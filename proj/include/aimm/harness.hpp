#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aimm/config.hpp"
#include "aimm/fusion.hpp"
#include "aimm/metrics.hpp"

namespace aimm {

// Experiment harness: runs a strategy over the task sequence, logs the
// trajectory, computes metrics, and writes the report files.

struct IterationRecord {
    int task_id = 0;
    int global_iter = 0;  // 1-based across the run
    int iter_in_task = 0; // 1-based within the task
    double new_loss = 0.0;
    std::optional<double> mem_loss;
    int steps_since_merge = 0; // position within the merge interval
    std::string phase;         // controller phase, "Inactive" without one
    int f_count = 0;
};

struct TaskBoundaryRecord {
    int task_id = 0;
    std::vector<double> accuracy_row; // a(1..k, k) after task k
};

struct RunResult {
    std::string run_id;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    AccuracyMatrix matrix{1};
    int merge_count = 0;
    double wall_time_s = 0.0;
    std::vector<IterationRecord> trajectory;
    std::vector<MergeEvent> merges;
    std::vector<TaskBoundaryRecord> boundaries;
};

struct RunFailure {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string message;
};

struct SuiteSummary {
    int n_runs = 0;
    double op_mean = 0.0, op_std = 0.0;
    double bwt_mean = 0.0, bwt_std = 0.0;
    double fwt_mean = 0.0, fwt_std = 0.0;
    double merge_count_mean = 0.0;
};

struct SuiteResult {
    Strategy strategy = Strategy::Aim;
    std::vector<RunResult> runs;
    std::vector<RunFailure> failures; // diverged seeds; aggregate is partial
    SuiteSummary summary;

    bool partial() const { return !failures.empty(); }
};

std::string run_id_for(const ExperimentConfig& cfg, std::uint64_t seed);

// One (strategy, seed) run over the whole sequence.
RunResult run_task_sequence(const ExperimentConfig& cfg, std::uint64_t seed);

// All seeds of the config. A diverged seed becomes a RunFailure and the
// remaining seeds still run.
SuiteResult run_suite(const ExperimentConfig& cfg);

// Writes trajectory_<run_id>.jsonl per run, metrics.csv (one row per run
// plus a "summary" mean row), merges.csv, and config.json (the parsed config
// echoed back). Identical config and seeds reproduce metrics.csv byte for
// byte.
void emit_reports(const SuiteResult& suite, const ExperimentConfig& cfg,
                  const std::filesystem::path& output_dir);

} // namespace aimm
