#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aimm {

// Merge controller. Decides when to merge from two signals:
//
//  - Learning signal: lambda values (mean absolute parameter movement per
//    step) recorded at each merge. A sliding window of adjacent comparisons
//    over that history classifies the trend; upward dominance shrinks the
//    next interval, downward dominance grows it, both clamped to
//    [s_min, s_max]. No adjustment happens until the history holds l_w + 1
//    values (the cold start).
//
//  - Forgetting signal: each interval starts by calibrating a threshold
//    delta = gamma_forget * mean(memory loss over the first
//    min(ceil(2/3 * S), S) steps). Afterwards every memory loss above delta
//    counts as an activation. f_max activations strictly before S force an
//    early merge; at S with at least one activation the merge is on
//    schedule; at S with none the merge defers until the first activation
//    or a hard cap at 2S.

enum class Dominance { Up, Down, Balanced };

enum class Phase { ColdStart, Calibrating, Monitoring, Deferred };

enum class MergeReason { Scheduled, Early, DeferredForgetTrigger, DeferredCap };

const char* phase_name(Phase p);
const char* merge_reason_name(MergeReason r);

struct ControllerConfig {
    int s_init = 8;
    int l_w = 3;
    int s_min = 2;
    int s_max = 128;
    // Interval factors; the pair switches when the current interval crosses
    // 64 (large intervals grow slower and shrink faster).
    double gamma_learn_plus_small = 2.0;  // grow factor, s_current <= 64
    double gamma_learn_minus_small = 1.5; // shrink divisor, s_current <= 64
    double gamma_learn_plus_large = 1.5;  // grow factor, s_current > 64
    double gamma_learn_minus_large = 2.0; // shrink divisor, s_current > 64
    double gamma_forget = 2.0;
    int f_max = 3;
    double calib_fraction = 2.0 / 3.0;

    void validate() const;
    // Non-fatal notes for values outside the ranges the defaults were tuned
    // over. The config is still accepted.
    std::vector<std::string> range_warnings() const;
};

// Strategy wiring. Full method: all three on. Ablations turn off interval
// adaptation (fixed s_init) or the forgetting signal's influence on timing;
// track_forgetting keeps activation counting alive for fusion weights even
// when it no longer moves the schedule.
struct ControllerMode {
    bool adapt_interval = true;
    bool forgetting_timing = true;
    bool track_forgetting = true;
};

struct TrendSummary {
    int n_up = 0;
    int n_down = 0;
    int n_flat = 0;

    int pairs() const { return n_up + n_down + n_flat; }
    Dominance dominance() const;
};

struct MergeDecision {
    bool merge_now = false;
    MergeReason reason = MergeReason::Scheduled;
    int actual_interval = 0; // S': steps since the previous merge
};

// Controller state captured at a merge, consumed by fusion.
struct MergeSnapshot {
    int n_up = 0;       // upward pairs in the window after appending lambda
    int pairs_used = 0; // adjacent pairs actually examined (< l_w early on)
    int f_count = 0;    // activations this interval, including a deferred
                        // trigger
};

// Up/down/flat counts over the last min(l_w, |history|-1) adjacent pairs.
TrendSummary trend(std::span<const double> history, int l_w);

// Next interval from the current one and the trend dominance, rounded half
// away from zero and clamped to [s_min, s_max].
int next_interval(int s_current, Dominance dom, const ControllerConfig& cfg);

// gamma_forget * mean(losses). Throws ValidationError on an empty window.
double calibrate_threshold(std::span<const double> calib_losses,
                           double gamma_forget);

// min(ceil(calib_fraction * s_current), s_current)
int calibration_window(int s_current, double calib_fraction);

class Controller {
public:
    explicit Controller(ControllerConfig cfg, ControllerMode mode = {});

    // Advances the interval clock by one training step and runs the state
    // machine. mem_loss is the probe loss at this step, absent when nothing
    // is stored yet; with it absent all interval the forgetting signal stays
    // inert and the merge fires exactly at s_current. Total: never throws.
    MergeDecision observe_step(std::optional<double> mem_loss);

    // Records the merge's lambda, adjusts the interval when past cold start,
    // resets the per-interval state, and returns the signal snapshot fusion
    // needs. Call exactly once per MergeNow decision.
    MergeSnapshot on_merge(double lambda_value);

    // Task boundary: closes the open interval without a merge. Clock,
    // calibration, activations and threshold reset; lambda history and
    // s_current persist.
    void begin_interval();

    // Full reset: begin_interval plus cleared history and s_current = s_init.
    void reset();

    Phase phase() const;
    int s_current() const { return s_current_; }
    int steps_since_merge() const { return steps_since_merge_; }
    int f_count() const { return f_count_; }
    int merges_completed() const { return static_cast<int>(history_.size()); }
    std::optional<double> delta_threshold() const { return delta_; }
    const std::vector<double>& lambda_history() const { return history_; }
    bool in_cold_start() const {
        return static_cast<int>(history_.size()) <= cfg_.l_w;
    }

private:
    enum class SubPhase { Calibrating, Monitoring, Deferred };

    ControllerConfig cfg_;
    ControllerMode mode_;
    int s_current_;
    int steps_since_merge_ = 0;
    SubPhase sub_ = SubPhase::Calibrating;
    std::vector<double> calib_losses_;
    std::optional<double> delta_;
    int f_count_ = 0;
    std::vector<double> history_;
};

} // namespace aimm
