#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace aimm {

// Flat 64-bit parameter space. ParamVector is a point (model weights),
// TaskVector a displacement between two points. Keeping them as distinct
// types stops points and deltas from being mixed up in merge arithmetic.

struct ParamVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

struct TaskVector {
    std::vector<double> deltas;

    std::size_t dim() const { return deltas.size(); }
};

// to - from, elementwise. Throws StructuralError on dimension mismatch,
// ValidationError on non-finite input.
TaskVector task_vector(const ParamVector& from, const ParamVector& to);

// base + tau, elementwise.
ParamVector add(const ParamVector& base, const TaskVector& tau);

// Mean absolute movement per step: sum_i |tau_i| / steps. steps >= 1.
double l1_rate(const TaskVector& tau, int steps);

// anchor + alpha1 * tau_new + alpha2 * tau_past. Weights must lie in [0, 1].
// Throws DivergenceError if the result is non-finite.
ParamVector apply_merge(const ParamVector& anchor, const TaskVector& tau_new,
                        const TaskVector& tau_past, double alpha1,
                        double alpha2);

// Binary snapshot format: 8-byte magic "AIMPVEC1", u32 dim, u32 reserved
// (zero), then dim little-endian IEEE-754 doubles. 16-byte header total.
void save_param_vector(const ParamVector& theta,
                       const std::filesystem::path& path);
ParamVector load_param_vector(const std::filesystem::path& path);

} // namespace aimm
