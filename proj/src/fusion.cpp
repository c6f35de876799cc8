#include "aimm/fusion.hpp"

#include <cmath>

#include "aimm/errors.hpp"

namespace aimm {

FusionWeights fusion_weights(int n_up, int l_w, int f_count, int f_max) {
    if (l_w < 1 || f_max < 1) {
        throw ValidationError("fusion_weights: l_w and f_max must be >= 1");
    }
    if (n_up < 0 || n_up > l_w) {
        throw ValidationError("fusion_weights: n_up must lie in [0, l_w]");
    }
    if (f_count < 0 || f_count > f_max) {
        throw ValidationError("fusion_weights: f_count must lie in [0, f_max]");
    }
    double p_new = static_cast<double>(n_up) / static_cast<double>(l_w);
    double p_past = static_cast<double>(f_count) / static_cast<double>(f_max);
    double total = p_new + p_past;
    if (total <= 0.0) return {1.0, 0.0};
    // alpha2 as the complement keeps alpha1 + alpha2 == 1.0 exact; two
    // separate divisions can land one ulp off.
    double alpha1 = p_new / total;
    return {alpha1, 1.0 - alpha1};
}

ParamVector rehearsal_finetune(const ParamVector& theta, const ModelSpec& spec,
                               const MemoryBuffer& memory, int steps,
                               int batch_size, double lr, Rng& rng) {
    if (steps < 0) throw ValidationError("rehearsal_finetune: steps >= 0");
    if (steps == 0 || memory.empty()) return theta;
    ParamVector tuned = theta;
    for (const Batch& batch : memory.training_batches(batch_size, steps, rng)) {
        auto [loss, grad] = loss_and_grad(tuned, spec, batch);
        (void)loss;
        tuned = sgd_step(tuned, grad, lr);
    }
    return tuned;
}

std::pair<ParamVector, MergeEvent> execute_merge(
    const ParamVector& anchor, const ParamVector& theta_j,
    const ModelSpec& spec, const MemoryBuffer& memory, const MergeContext& ctx,
    int batch_size, double lr, Rng& rng) {
    MergeEvent event;
    event.merge_index = ctx.merge_index;
    event.task_id = ctx.task_id;
    event.iteration = ctx.iteration;
    event.actual_interval = ctx.actual_interval;
    event.reason = ctx.reason;
    event.lambda_value = ctx.lambda_value;
    event.n_up = ctx.snapshot.n_up;
    event.l_w_used = ctx.snapshot.pairs_used;
    event.f_count_at_merge = ctx.snapshot.f_count;

    TaskVector tau_new = task_vector(anchor, theta_j);

    FusionWeights w;
    if (memory.empty()) {
        // Nothing stored, nothing to fuse: the merge degenerates to keeping
        // the newest weights, for fixed-alpha variants too.
        w = {1.0, 0.0};
    } else if (ctx.fixed_alpha1) {
        if (!(*ctx.fixed_alpha1 >= 0.0 && *ctx.fixed_alpha1 <= 1.0)) {
            throw ValidationError("execute_merge: fixed alpha1 in [0, 1]");
        }
        w = {*ctx.fixed_alpha1, 1.0 - *ctx.fixed_alpha1};
    } else {
        w = fusion_weights(ctx.snapshot.n_up, ctx.l_w, ctx.snapshot.f_count,
                           ctx.f_max);
    }
    event.alpha1 = w.alpha1;
    event.alpha2 = w.alpha2;

    if (memory.empty()) {
        event.rehearsal_steps = 0;
        return {theta_j, event};
    }

    // Probe first, rehearsal second (fixed rng order). The same probe batch
    // measures the memory loss before and after so the delta is meaningful.
    std::optional<Batch> probe = memory.sample_probe(batch_size, rng);
    event.mem_loss_before = loss_only(theta_j, spec, *probe);

    event.rehearsal_steps = (ctx.actual_interval + 1) / 2; // ceil(S'/2)
    ParamVector rehearsed = rehearsal_finetune(theta_j, spec, memory,
                                               event.rehearsal_steps,
                                               batch_size, lr, rng);
    TaskVector tau_past = task_vector(theta_j, rehearsed);

    ParamVector merged;
    if (w.alpha1 == 1.0 && w.alpha2 == 0.0) {
        merged = theta_j; // exact no-op, skip the float round trip
    } else {
        merged = apply_merge(anchor, tau_new, tau_past, w.alpha1, w.alpha2);
    }
    event.mem_loss_after = loss_only(merged, spec, *probe);
    return {std::move(merged), event};
}

} // namespace aimm
