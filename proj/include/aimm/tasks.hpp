#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "aimm/rng.hpp"
#include "aimm/trainer.hpp"

namespace aimm {

// Synthetic interfering task sequences. Every task classifies the same
// Gaussian-mixture problem seen through a per-task input transform (rotation,
// coordinate permutation, or mean shift), so tasks compete for the same
// parameters and sequential training forgets earlier ones.

enum class InterferenceMode { Rotation, Permutation, MeanShift };

struct SequenceSpec {
    int num_tasks = 4;
    int input_dim = 16;
    int classes_per_task = 4;
    int samples_per_task = 500;
    int test_samples_per_task = 200;
    InterferenceMode interference_mode = InterferenceMode::Rotation;
    // Rotation: radians per task step applied in disjoint coordinate planes.
    // MeanShift: length of the per-task offset vector. Ignored for
    // Permutation.
    double interference_strength = 2.0;
    double class_separation = 2.5;
    double noise_std = 0.55;
    std::uint64_t seed = 42;
    // Test hook: forces every per-task transform to the identity, making all
    // tasks the same distribution (and, by construction, the same samples).
    bool force_identity_transform = false;

    void validate() const;
};

struct TaskDataset {
    int task_id = 0; // 1-based
    std::vector<Sample> train;
    std::vector<Sample> test;

    int n_train() const { return static_cast<int>(train.size()); }
};

// Deterministic in spec.seed: base train/test samples are drawn once with
// labels balanced to within one sample per class, then task k applies its
// transform to every input. Task 1 is always the untransformed base problem.
std::vector<TaskDataset> generate_sequence(const SequenceSpec& spec);

// Rehearsal store. Holds a per-task uniformly-sampled subset of training
// data; probes and rehearsal batches draw uniformly from the pooled union.
class MemoryBuffer {
public:
    // Stores ceil(fraction * n_train) samples of the task, sampled without
    // replacement. fraction in (0, 1].
    void store(const TaskDataset& task, double fraction, Rng& rng);

    // One batch sampled with replacement from the union of stored samples,
    // or nullopt when nothing is stored yet.
    std::optional<Batch> sample_probe(int batch_size, Rng& rng) const;

    // `steps` independent probe-style batches for rehearsal fine-tuning.
    // Throws ValidationError when the buffer is empty.
    std::vector<Batch> training_batches(int batch_size, int steps,
                                        Rng& rng) const;

    bool empty() const { return pooled_.empty(); }
    std::size_t total_samples() const { return pooled_.size(); }
    double capacity_fraction() const { return capacity_fraction_; }
    const std::map<int, std::vector<Sample>>& per_task() const {
        return per_task_;
    }

private:
    std::map<int, std::vector<Sample>> per_task_;
    std::vector<Sample> pooled_;
    double capacity_fraction_ = 0.0;
};

// Plain CSV dump (feature columns then label) for eyeballing datasets. Not a
// stability contract.
void export_csv(const TaskDataset& task, std::ostream& out);

} // namespace aimm
