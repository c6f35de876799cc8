// Acceptance gate for the whole engine. Each numbered check prints one
// [PASS]/[FAIL] line with its measured detail, pinned tolerance, and runtime;
// the process exits nonzero if any check fails. Checks 6-9 run real desk-scale
// experiment suites on the shipped default config, so this binary doubles as
// an end-to-end smoke of the harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aimm/config.hpp"
#include "aimm/controller.hpp"
#include "aimm/errors.hpp"
#include "aimm/fusion.hpp"
#include "aimm/harness.hpp"
#include "aimm/metrics.hpp"
#include "aimm/rng.hpp"
#include "aimm/tasks.hpp"
#include "aimm/trainer.hpp"

#include "support/brute_metrics.hpp"
#include "support/finite_diff.hpp"
#include "support/scripted_traces.hpp"

using namespace aimm;
using namespace aimm::testsupport;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int number, const std::string& label, bool pass,
            const std::string& detail, double secs) {
    std::printf("[%s] %d. %s: %s (%.2fs)\n", pass ? "PASS" : "FAIL", number,
                label.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return std::string(buf);
}

// ---- 1: controller decisions replay scripted traces exactly -------------

void check_scripted_traces() {
    auto t0 = Clock::now();
    const auto traces = scripted_traces();
    int ok = 0;
    std::string first_bad;
    for (const auto& trace : traces) {
        TraceOutcome out = run_trace(trace);
        bool good = !out.lambda_overrun &&
                    out.merges.size() == trace.expected.size();
        for (std::size_t i = 0; good && i < out.merges.size(); ++i) {
            good = matches(trace.expected[i], out.merges[i]);
        }
        if (good) {
            ++ok;
        } else if (first_bad.empty()) {
            first_bad = trace.name;
        }
    }
    double secs = seconds_since(t0);
    bool pass = ok == static_cast<int>(traces.size()) &&
                traces.size() >= 10 && secs < 1.0;
    std::string detail = fmt("%d/%zu traces exact, budget 1s", ok,
                             traces.size());
    if (!first_bad.empty()) detail += ", first mismatch: " + first_bad;
    report(1, "controller scripted traces", pass, detail, secs);
}

// ---- 2: cold start holds the interval fixed for the first 4 merges ------

void check_cold_start() {
    auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    Rng rng(771);
    int cases = 0;
    for (int s_init : {4, 8, 16}) {
        for (int rep = 0; rep < 20 && pass; ++rep) {
            ControllerConfig cfg;
            cfg.s_init = s_init;
            cfg.l_w = 3;
            Controller ctl(cfg);
            for (int merge = 0; merge < 4 && pass; ++merge) {
                int gap = 0;
                while (true) {
                    ++gap;
                    MergeDecision d = ctl.observe_step(std::nullopt);
                    if (d.merge_now) {
                        if (d.actual_interval != s_init || gap != s_init) {
                            pass = false;
                            detail = fmt("s_init=%d rep=%d merge=%d gap=%d",
                                         s_init, rep, merge + 1, gap);
                        }
                        ctl.on_merge(rng.next_uniform(0.1, 10.0));
                        break;
                    }
                    if (gap > 4 * s_init) {
                        pass = false;
                        detail = fmt("no merge by step %d (s_init=%d)", gap,
                                     s_init);
                        break;
                    }
                }
                ++cases;
            }
        }
        // Adaptation starts exactly at merge 5: under a strictly falling
        // signal the next interval doubles.
        if (pass) {
            ControllerConfig cfg;
            cfg.s_init = s_init;
            cfg.l_w = 3;
            Controller ctl(cfg);
            double lambda = 64.0;
            for (int merge = 0; merge < 4; ++merge) {
                for (int i = 0; i < s_init; ++i) ctl.observe_step(std::nullopt);
                ctl.on_merge(lambda);
                lambda /= 2.0;
            }
            if (ctl.s_current() != 2 * s_init) {
                pass = false;
                detail = fmt("post-cold-start interval %d, want %d",
                             ctl.s_current(), 2 * s_init);
            }
        }
    }
    if (pass) detail = fmt("%d scripted merges at S_init with L_w=3", cases);
    report(2, "cold-start intervals", pass, detail, seconds_since(t0));
}

// ---- 3: fusion weight algebra and no-op merges --------------------------

void check_fusion_algebra() {
    auto t0 = Clock::now();
    bool pass = true;
    std::string detail;

    Rng rng(2026);
    int exact_sums = 0, trivial = 0;
    for (int i = 0; i < 1000 && pass; ++i) {
        int l_w = 1 + static_cast<int>(rng.next_index(8));
        int f_max = 1 + static_cast<int>(rng.next_index(8));
        int n_up =
            static_cast<int>(rng.next_index(static_cast<std::size_t>(l_w) + 1));
        int f = static_cast<int>(
            rng.next_index(static_cast<std::size_t>(f_max) + 1));
        FusionWeights w = fusion_weights(n_up, l_w, f, f_max);
        if (n_up == 0 && f == 0) {
            ++trivial;
            if (w.alpha1 != 1.0 || w.alpha2 != 0.0) {
                pass = false;
                detail = "no-evidence pair did not yield (1, 0)";
            }
        } else if (w.alpha1 + w.alpha2 == 1.0) {
            ++exact_sums;
        } else {
            pass = false;
            detail = fmt("alpha sum off by %.3e for n_up=%d/%d f=%d/%d",
                         w.alpha1 + w.alpha2 - 1.0, n_up, l_w, f, f_max);
        }
    }

    // Small real model for the merge no-op checks.
    SequenceSpec seq;
    seq.num_tasks = 2;
    seq.input_dim = 6;
    seq.classes_per_task = 3;
    seq.samples_per_task = 60;
    seq.test_samples_per_task = 20;
    auto tasks = generate_sequence(seq);
    ModelSpec model{6, {8}, 3, 17};
    MemoryBuffer memory;
    {
        Rng store_rng(4);
        memory.store(tasks[0], 0.5, store_rng);
    }
    double worst = 0.0;
    for (int rep = 0; rep < 10 && pass; ++rep) {
        ParamVector anchor = init_model(model);
        ParamVector theta_j = anchor;
        for (double& v : theta_j.values) v += 0.05 * rng.next_gaussian();

        // Signal-derived (1, 0) with a non-empty buffer.
        MergeContext ctx;
        ctx.merge_index = 1;
        ctx.task_id = 2;
        ctx.iteration = 8;
        ctx.actual_interval = 8;
        ctx.snapshot = MergeSnapshot{3, 3, 0};
        Rng merge_rng = Rng::derived(99, 7, rep);
        auto [merged, ev] =
            execute_merge(anchor, theta_j, model, memory, ctx, 8, 0.05,
                          merge_rng);
        for (std::size_t i = 0; i < merged.dim(); ++i) {
            worst = std::max(worst,
                             std::abs(merged.values[i] - theta_j.values[i]));
        }
        if (ev.alpha1 != 1.0) {
            pass = false;
            detail = "pure learning evidence did not give alpha = (1, 0)";
        }

        // First-task merge: nothing stored, exact no-op regardless of
        // signal counts.
        MemoryBuffer empty;
        ctx.task_id = 1;
        ctx.snapshot = MergeSnapshot{1, 3, 2};
        Rng empty_rng = Rng::derived(99, 8, rep);
        auto [kept, ev2] =
            execute_merge(anchor, theta_j, model, empty, ctx, 8, 0.05,
                          empty_rng);
        for (std::size_t i = 0; i < kept.dim(); ++i) {
            worst = std::max(worst,
                             std::abs(kept.values[i] - theta_j.values[i]));
        }
        if (ev2.alpha1 != 1.0 || ev2.rehearsal_steps != 0) {
            pass = false;
            detail = "empty-memory merge was not a pure keep";
        }
    }
    if (pass && worst > 1e-12) {
        pass = false;
        detail = fmt("(1,0) merge drift %.3e exceeds 1e-12", worst);
    }
    if (pass) {
        detail = fmt("%d exact alpha sums, %d trivial pairs, "
                     "max (1,0)-merge drift %.1e (tol 1e-12)",
                     exact_sums, trivial, worst);
    }
    report(3, "fusion algebra", pass, detail, seconds_since(t0));
}

// ---- 4: analytic gradients vs central finite differences ----------------

void check_gradients() {
    auto t0 = Clock::now();
    struct Cfg {
        int in;
        std::vector<int> hidden;
        int classes;
        std::uint64_t seed;
    };
    const std::vector<Cfg> cfgs = {
        {3, {}, 2, 1},       {3, {}, 3, 4},     {4, {5}, 2, 2},
        {4, {5}, 3, 5},      {5, {4}, 4, 3},    {6, {5, 4}, 3, 2},
        {5, {6, 3}, 2, 4},   {4, {4, 4}, 4, 3}, {2, {8}, 2, 6},
        {6, {3, 3, 3}, 3, 2}, {3, {2}, 5, 4},   {7, {}, 4, 3},
    };
    Rng rng(31337);
    double worst = 0.0;
    for (const Cfg& c : cfgs) {
        ModelSpec spec{c.in, c.hidden, c.classes, c.seed};
        ParamVector theta = init_model(spec);
        for (double& v : theta.values) v += 0.1 * rng.next_gaussian();
        int bs = 2 + static_cast<int>(rng.next_index(5));
        std::vector<Sample> samples(static_cast<std::size_t>(bs));
        for (Sample& s : samples) {
            s.x.resize(static_cast<std::size_t>(c.in));
            for (double& v : s.x) v = rng.next_gaussian();
            s.y = static_cast<int>(
                rng.next_index(static_cast<std::size_t>(c.classes)));
        }
        Batch batch = make_batch(samples);
        auto [loss, grad] = loss_and_grad(theta, spec, batch);
        (void)loss;
        TaskVector numeric = fd_gradient(theta, spec, batch, 1e-5);
        worst = std::max(worst, max_relative_error(grad, numeric));
    }
    double secs = seconds_since(t0);
    bool pass = worst < 1e-4 && secs < 5.0;
    report(4, "gradient check",
           pass,
           fmt("%zu configs, max relative error %.2e (tol 1e-4), budget 5s",
               cfgs.size(), worst),
           secs);
}

// ---- 5: metrics vs brute-force recomputation ----------------------------

void check_metrics_oracle() {
    auto t0 = Clock::now();
    Rng rng(909);
    bool pass = true;
    std::string detail;
    for (int rep = 0; rep < 100 && pass; ++rep) {
        int k = 2 + static_cast<int>(rng.next_index(7));
        AccuracyMatrix m(k);
        std::vector<std::vector<double>> acc(
            static_cast<std::size_t>(k),
            std::vector<double>(static_cast<std::size_t>(k), 0.0));
        std::vector<double> indiv(static_cast<std::size_t>(k), 0.0);
        for (int j = 1; j <= k; ++j) {
            for (int i = 1; i <= j; ++i) {
                double a = rng.next_unit();
                m.set(i, j, a);
                acc[static_cast<std::size_t>(j - 1)]
                   [static_cast<std::size_t>(i - 1)] = a;
            }
        }
        for (int i = 1; i <= k; ++i) {
            double a = rng.next_unit();
            m.set_individual(i, a);
            indiv[static_cast<std::size_t>(i - 1)] = a;
        }
        MetricsReport r = compute_metrics(m);
        if (r.op != brute_op(acc) || r.bwt != brute_bwt(acc) ||
            r.fwt != brute_fwt(acc, indiv)) {
            pass = false;
            detail = fmt("mismatch at matrix %d (K=%d)", rep, k);
        }
    }
    if (pass) detail = "100 random matrices, OP/BWT/FWT bitwise equal";
    report(5, "metrics oracle", pass, detail, seconds_since(t0));
}

// ---- 6-9: desk-scale experiment suites on the shipped defaults ----------

struct SuiteTimings {
    SuiteResult suite;
    double secs = 0.0;
};

SuiteTimings run_strategy(ExperimentConfig cfg, Strategy s) {
    cfg.strategy = s;
    auto t0 = Clock::now();
    SuiteTimings out;
    out.suite = run_suite(cfg);
    out.secs = seconds_since(t0);
    return out;
}

double mean_bwt(const SuiteResult& s) { return s.summary.bwt_mean; }

void check_experiments() {
    ExperimentConfig base = default_desk_config();
    base.seeds = {1, 2, 3};

    // 6: after-merge memory loss at fusing merges.
    SuiteTimings aim = run_strategy(base, Strategy::Aim);
    {
        bool pass = aim.suite.failures.empty();
        std::string detail;
        std::vector<double> drops;
        for (const RunResult& run : aim.suite.runs) {
            for (const MergeEvent& e : run.merges) {
                if (e.alpha2 > 0.0 && e.mem_loss_before && e.mem_loss_after) {
                    drops.push_back(*e.mem_loss_after - *e.mem_loss_before);
                }
            }
        }
        if (!pass) {
            detail = "run diverged: " + aim.suite.failures.front().message;
        } else if (drops.empty()) {
            pass = false;
            detail = "no fusing merges (alpha2 > 0) observed";
        } else {
            std::sort(drops.begin(), drops.end());
            std::size_t n = drops.size();
            double median = (n % 2 == 1)
                                ? drops[n / 2]
                                : 0.5 * (drops[n / 2 - 1] + drops[n / 2]);
            pass = median <= 0.0 && aim.secs < 120.0;
            detail = fmt("median memory-loss change %+.4f over %zu fusing "
                         "merges (need <= 0), budget 2min",
                         median, n);
        }
        report(6, "rehearsal fusion lowers memory loss", pass, detail,
               aim.secs);
    }

    // 7: strategy ordering on backward transfer.
    ExperimentConfig fi_cfg = base;
    fi_cfg.strategy_interval = 8;
    SuiteTimings fi = run_strategy(fi_cfg, Strategy::FixedInterval);
    SuiteTimings replay = run_strategy(base, Strategy::ReplayOnly);
    SuiteTimings seq = run_strategy(base, Strategy::Sequential);
    double strat_secs = aim.secs + fi.secs + replay.secs + seq.secs;
    {
        bool complete = aim.suite.failures.empty() &&
                        fi.suite.failures.empty() &&
                        replay.suite.failures.empty() &&
                        seq.suite.failures.empty();
        double a = mean_bwt(aim.suite);
        double f = mean_bwt(fi.suite);
        double r = mean_bwt(replay.suite);
        double s = mean_bwt(seq.suite);
        bool pass = complete && a >= f - 0.02 && a >= r && a > s + 0.05 &&
                    strat_secs < 600.0;
        report(7, "backward-transfer ordering", pass,
               fmt("BWT means: adaptive %+.4f, fixed(8) %+.4f, replay %+.4f, "
                   "sequential %+.4f; need a>=f-0.02, a>=r, a>s+0.05; "
                   "budget 10min%s",
                   a, f, r, s, complete ? "" : "; a run diverged"),
               strat_secs);
    }

    // 8: ablations do not beat the full method.
    SuiteTimings no_ls = run_strategy(base, Strategy::AimNoLS);
    SuiteTimings no_fs = run_strategy(base, Strategy::AimNoFS);
    {
        bool complete = aim.suite.failures.empty() &&
                        no_ls.suite.failures.empty() &&
                        no_fs.suite.failures.empty();
        double a = mean_bwt(aim.suite);
        double nl = mean_bwt(no_ls.suite);
        double nf = mean_bwt(no_fs.suite);
        bool pass = complete && a >= nl - 0.01 && a >= nf - 0.01;
        report(8, "ablation ordering", pass,
               fmt("BWT means: full %+.4f, no-interval-adaptation %+.4f, "
                   "no-probe %+.4f; ties allowed within 0.01%s",
                   a, nl, nf, complete ? "" : "; a run diverged"),
               no_ls.secs + no_fs.secs);
    }

    // 9: byte-identical metrics.csv across two fresh invocations.
    {
        auto t0 = Clock::now();
        ExperimentConfig aim_cfg = base;
        aim_cfg.strategy = Strategy::Aim;
        SuiteResult again = run_suite(aim_cfg);
        namespace fs = std::filesystem;
        fs::path dir_a = fs::temp_directory_path() / "aimm_accept_a";
        fs::path dir_b = fs::temp_directory_path() / "aimm_accept_b";
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);
        emit_reports(aim.suite, aim_cfg, dir_a);
        emit_reports(again, aim_cfg, dir_b);
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        std::string bytes_a = slurp(dir_a / "metrics.csv");
        std::string bytes_b = slurp(dir_b / "metrics.csv");
        bool pass = !bytes_a.empty() && bytes_a == bytes_b;
        report(9, "byte-identical reruns", pass,
               fmt("metrics.csv %zu bytes vs %zu bytes, %s", bytes_a.size(),
                   bytes_b.size(), pass ? "identical" : "DIFFER"),
               seconds_since(t0));
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);
    }
}

} // namespace

int main() {
    auto t0 = Clock::now();
    check_scripted_traces();
    check_cold_start();
    check_fusion_algebra();
    check_gradients();
    check_metrics_oracle();
    check_experiments();
    std::printf("acceptance: %d/9 passed (%.1fs total)\n", 9 - g_failures,
                seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
