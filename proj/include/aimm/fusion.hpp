#pragma once

#include <optional>
#include <utility>

#include "aimm/controller.hpp"
#include "aimm/param_vector.hpp"
#include "aimm/rng.hpp"
#include "aimm/tasks.hpp"
#include "aimm/trainer.hpp"

namespace aimm {

// Knowledge fusion at a merge point. New knowledge is the parameter movement
// since the anchor (tau_new); past knowledge is the movement produced by a
// short rehearsal fine-tune on memory (tau_past). Both re-apply to the anchor
// with weights proportional to the signal evidence: upward learning trend
// backs tau_new, forgetting activations back tau_past.

struct FusionWeights {
    double alpha1 = 1.0;
    double alpha2 = 0.0;
};

// P_new = n_up / l_w, P_past = f_count / f_max, normalized to sum to one.
// With no evidence either way the newest weights win: (1, 0).
FusionWeights fusion_weights(int n_up, int l_w, int f_count, int f_max);

// `steps` SGD steps on batches drawn from memory. theta is untouched; the
// tuned copy is returned. steps == 0 or an empty buffer returns theta as is.
ParamVector rehearsal_finetune(const ParamVector& theta, const ModelSpec& spec,
                               const MemoryBuffer& memory, int steps,
                               int batch_size, double lr, Rng& rng);

struct MergeEvent {
    int merge_index = 0; // 1-based, per run
    int task_id = 0;
    int iteration = 0;       // global training iteration of the merge
    int actual_interval = 0; // S'
    MergeReason reason = MergeReason::Scheduled;
    double lambda_value = 0.0;
    int n_up = 0;
    int l_w_used = 0;
    int f_count_at_merge = 0;
    double alpha1 = 1.0;
    double alpha2 = 0.0;
    std::optional<double> mem_loss_before;
    std::optional<double> mem_loss_after;
    int rehearsal_steps = 0;
};

struct MergeContext {
    int merge_index = 0;
    int task_id = 0;
    int iteration = 0;
    int actual_interval = 0;
    MergeReason reason = MergeReason::Scheduled;
    double lambda_value = 0.0;
    MergeSnapshot snapshot;
    int l_w = 3;
    int f_max = 3;
    // Fixed-alpha variants set this; the signal-derived weights are skipped
    // whenever memory holds something to fuse.
    std::optional<double> fixed_alpha1;
};

// Full merge: tau_new from the anchor, rehearsal for ceil(S'/2) steps when
// memory is non-empty, tau_past from the rehearsed copy, weights, and the
// merged parameters. Memory loss before/after is measured on one probe batch
// drawn at merge time and reused, so the two numbers are comparable.
//
// Rng consumption order: probe batch first, then rehearsal batches.
// Effective weights (1, 0) return theta_j bitwise; in particular every merge
// before anything is stored (task 1) is an exact no-op.
std::pair<ParamVector, MergeEvent> execute_merge(
    const ParamVector& anchor, const ParamVector& theta_j,
    const ModelSpec& spec, const MemoryBuffer& memory, const MergeContext& ctx,
    int batch_size, double lr, Rng& rng);

} // namespace aimm
