#include "aimm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aimm/errors.hpp"

namespace aimm {

namespace {

// The gamma pair switches once the interval outgrows this; large intervals
// shrink faster and grow slower.
constexpr int kGammaSwitch = 64;

int round_half_away(double v) {
    return static_cast<int>(std::llround(v));
}

} // namespace

const char* phase_name(Phase p) {
    switch (p) {
    case Phase::ColdStart: return "ColdStart";
    case Phase::Calibrating: return "Calibrating";
    case Phase::Monitoring: return "Monitoring";
    case Phase::Deferred: return "Deferred";
    }
    return "?";
}

const char* merge_reason_name(MergeReason r) {
    switch (r) {
    case MergeReason::Scheduled: return "Scheduled";
    case MergeReason::Early: return "Early";
    case MergeReason::DeferredForgetTrigger: return "DeferredForgetTrigger";
    case MergeReason::DeferredCap: return "DeferredCap";
    }
    return "?";
}

void ControllerConfig::validate() const {
    if (s_min < 1) throw ValidationError("ControllerConfig: s_min >= 1");
    if (s_min > s_init || s_init > s_max) {
        throw ValidationError(
            "ControllerConfig: need s_min <= s_init <= s_max");
    }
    if (l_w < 1) throw ValidationError("ControllerConfig: l_w >= 1");
    if (f_max < 1) throw ValidationError("ControllerConfig: f_max >= 1");
    if (!(gamma_forget > 0.0)) {
        throw ValidationError("ControllerConfig: gamma_forget > 0");
    }
    if (!(gamma_learn_plus_small >= 1.0) || !(gamma_learn_plus_large >= 1.0) ||
        !(gamma_learn_minus_small >= 1.0) ||
        !(gamma_learn_minus_large >= 1.0)) {
        throw ValidationError("ControllerConfig: gamma factors >= 1");
    }
    if (!(calib_fraction > 0.0 && calib_fraction <= 1.0)) {
        throw ValidationError("ControllerConfig: calib_fraction in (0, 1]");
    }
}

std::vector<std::string> ControllerConfig::range_warnings() const {
    std::vector<std::string> notes;
    auto check = [&](const char* name, double v, double lo, double hi) {
        if (v < lo || v > hi) {
            notes.push_back(std::string(name) + "=" +
                            std::to_string(v) + " outside the tuned range [" +
                            std::to_string(lo) + ", " + std::to_string(hi) +
                            "]");
        }
    };
    check("s_init", s_init, 2, 32);
    check("l_w", l_w, 2, 8);
    check("gamma_forget", gamma_forget, 2, 32);
    check("f_max", f_max, 2, 8);
    return notes;
}

Dominance TrendSummary::dominance() const {
    if (n_up > n_down + n_flat) return Dominance::Up;
    if (n_down > n_up + n_flat) return Dominance::Down;
    return Dominance::Balanced;
}

TrendSummary trend(std::span<const double> history, int l_w) {
    if (l_w < 1) throw ValidationError("trend: l_w >= 1");
    TrendSummary t;
    if (history.size() < 2) return t;
    std::size_t pairs = std::min(static_cast<std::size_t>(l_w),
                                 history.size() - 1);
    for (std::size_t i = history.size() - pairs; i < history.size(); ++i) {
        if (history[i] > history[i - 1]) ++t.n_up;
        else if (history[i] < history[i - 1]) ++t.n_down;
        else ++t.n_flat;
    }
    return t;
}

int next_interval(int s_current, Dominance dom, const ControllerConfig& cfg) {
    cfg.validate();
    bool large = s_current > kGammaSwitch;
    double grow = large ? cfg.gamma_learn_plus_large : cfg.gamma_learn_plus_small;
    double shrink =
        large ? cfg.gamma_learn_minus_large : cfg.gamma_learn_minus_small;
    switch (dom) {
    case Dominance::Up:
        return std::max(cfg.s_min, round_half_away(s_current / shrink));
    case Dominance::Down:
        return std::min(cfg.s_max, round_half_away(s_current * grow));
    case Dominance::Balanced:
        return s_current;
    }
    return s_current;
}

double calibrate_threshold(std::span<const double> calib_losses,
                           double gamma_forget) {
    if (calib_losses.empty()) {
        throw ValidationError("calibrate_threshold: no calibration losses");
    }
    double sum = 0.0;
    for (double v : calib_losses) sum += v;
    return gamma_forget * (sum / static_cast<double>(calib_losses.size()));
}

int calibration_window(int s_current, double calib_fraction) {
    int w = static_cast<int>(std::ceil(calib_fraction * s_current));
    return std::min(w, s_current);
}

Controller::Controller(ControllerConfig cfg, ControllerMode mode)
    : cfg_(std::move(cfg)), mode_(mode), s_current_(cfg_.s_init) {
    cfg_.validate();
}

Phase Controller::phase() const {
    switch (sub_) {
    case SubPhase::Calibrating:
        return in_cold_start() ? Phase::ColdStart : Phase::Calibrating;
    case SubPhase::Monitoring: return Phase::Monitoring;
    case SubPhase::Deferred: return Phase::Deferred;
    }
    return Phase::Calibrating;
}

MergeDecision Controller::observe_step(std::optional<double> mem_loss) {
    ++steps_since_merge_;

    if (mode_.track_forgetting) {
        if (sub_ == SubPhase::Calibrating) {
            if (mem_loss) calib_losses_.push_back(*mem_loss);
            if (steps_since_merge_ ==
                    calibration_window(s_current_, cfg_.calib_fraction) &&
                !calib_losses_.empty()) {
                delta_ = calibrate_threshold(calib_losses_, cfg_.gamma_forget);
                sub_ = SubPhase::Monitoring;
                // This step's loss fed the threshold; activation checks start
                // next step.
            }
        } else if (sub_ == SubPhase::Monitoring) {
            if (mem_loss && *mem_loss > *delta_) {
                f_count_ = std::min(f_count_ + 1, cfg_.f_max);
                if (mode_.forgetting_timing && f_count_ == cfg_.f_max &&
                    steps_since_merge_ < s_current_) {
                    return {true, MergeReason::Early, steps_since_merge_};
                }
            }
        } else { // Deferred
            if (mem_loss && *mem_loss > *delta_) {
                f_count_ = std::min(f_count_ + 1, cfg_.f_max);
                return {true, MergeReason::DeferredForgetTrigger,
                        steps_since_merge_};
            }
        }
    }

    if (steps_since_merge_ == s_current_) {
        // Deferral needs an armed threshold; with the signal inert or timing
        // disabled the merge is simply on schedule.
        bool can_defer = mode_.forgetting_timing && mode_.track_forgetting &&
                         delta_.has_value();
        if (!can_defer || f_count_ >= 1) {
            return {true, MergeReason::Scheduled, s_current_};
        }
        sub_ = SubPhase::Deferred;
    } else if (sub_ == SubPhase::Deferred &&
               steps_since_merge_ == 2 * s_current_) {
        return {true, MergeReason::DeferredCap, steps_since_merge_};
    }

    return {};
}

MergeSnapshot Controller::on_merge(double lambda_value) {
    history_.push_back(lambda_value);
    TrendSummary ts = trend(history_, cfg_.l_w);

    MergeSnapshot snap;
    snap.n_up = ts.n_up;
    snap.pairs_used = ts.pairs();
    snap.f_count = f_count_;

    if (mode_.adapt_interval &&
        static_cast<int>(history_.size()) >= cfg_.l_w + 1) {
        s_current_ = next_interval(s_current_, ts.dominance(), cfg_);
    }
    begin_interval();
    return snap;
}

void Controller::begin_interval() {
    steps_since_merge_ = 0;
    f_count_ = 0;
    calib_losses_.clear();
    delta_.reset();
    sub_ = SubPhase::Calibrating;
}

void Controller::reset() {
    begin_interval();
    history_.clear();
    s_current_ = cfg_.s_init;
}

} // namespace aimm
