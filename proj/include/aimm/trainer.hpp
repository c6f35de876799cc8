#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "aimm/param_vector.hpp"

namespace aimm {

// Small feed-forward softmax classifier with hand-written backprop. All math
// is 64-bit and runs in a fixed order, so a (spec, seed, data) triple always
// produces the same trajectory bit for bit.

struct Sample {
    std::vector<double> x;
    int y = 0;
};

struct ModelSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims; // may be empty: single linear layer
    int num_classes = 0;
    std::uint64_t seed = 0;

    void validate() const;
    // sum over layers of (fan_in + 1) * fan_out
    int param_count() const;
};

struct Batch {
    int batch_size = 0;
    int input_dim = 0;
    std::vector<double> inputs; // row-major, batch_size x input_dim
    std::vector<int> labels;

    void validate(int num_classes) const;
};

struct StepReport {
    double new_loss = 0.0;
    std::optional<double> mem_loss;
    double grad_norm = 0.0;
};

Batch make_batch(std::span<const Sample> samples);
Batch make_batch(const std::vector<Sample>& pool,
                 std::span<const std::size_t> indices);

// Scaled-uniform init: weights U(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
// biases zero. Layout per layer: weight matrix row-major (out x in), then
// biases. Layers flatten in network order.
ParamVector init_model(const ModelSpec& spec);

// Mean cross-entropy over the batch plus its exact gradient in theta layout.
std::pair<double, TaskVector> loss_and_grad(const ParamVector& theta,
                                            const ModelSpec& spec,
                                            const Batch& batch);

// Forward pass only; used for probes and merge bookkeeping.
double loss_only(const ParamVector& theta, const ModelSpec& spec,
                 const Batch& batch);

ParamVector sgd_step(const ParamVector& theta, const TaskVector& grad,
                     double lr);

// One SGD step on new_batch. The probe, when present, contributes a loss
// measurement at the incoming theta and nothing else: the returned parameters
// are bitwise identical with or without it.
std::pair<ParamVector, StepReport> train_step_with_probe(
    const ParamVector& theta, const ModelSpec& spec, const Batch& new_batch,
    const std::optional<Batch>& probe_batch, double lr);

// Fraction of samples whose argmax logit matches the label. Ties resolve to
// the lowest class index.
double evaluate_accuracy(const ParamVector& theta, const ModelSpec& spec,
                         std::span<const Sample> dataset);

} // namespace aimm
