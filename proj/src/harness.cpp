#include "aimm/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <string>

#include "aimm/errors.hpp"
#include "aimm/format.hpp"
#include "aimm/rng.hpp"

#include <json.hpp>

namespace aimm {

namespace {

using nlohmann::ordered_json;

// Per-strategy wiring of the shared training loop.
struct StrategyTraits {
    bool uses_controller = false;
    bool probes = false;        // per-step memory probe feeds the controller
    bool uses_memory = false;   // stores samples at task boundaries
    bool replay_mix = false;    // memory joins the gradient batch 1:1
    bool merge_at_task_end = false;
    std::optional<double> fixed_alpha1;
    ControllerMode mode;
};

StrategyTraits traits_for(const ExperimentConfig& cfg) {
    StrategyTraits t;
    switch (cfg.strategy) {
    case Strategy::Aim:
        t.uses_controller = t.probes = t.uses_memory = true;
        break;
    case Strategy::AimNoLS:
        t.uses_controller = t.probes = t.uses_memory = true;
        t.mode.adapt_interval = false;
        break;
    case Strategy::AimNoFS:
        // No probes: the forgetting signal never arms, so merges land exactly
        // on the (still adaptive) schedule.
        t.uses_controller = t.uses_memory = true;
        break;
    case Strategy::AimMGM:
        t.uses_controller = t.probes = t.uses_memory = true;
        t.fixed_alpha1 = cfg.strategy_alpha1;
        break;
    case Strategy::FixedInterval:
        // Signals are recorded for fusion weights but never move the
        // schedule.
        t.uses_controller = t.probes = t.uses_memory = true;
        t.mode.adapt_interval = false;
        t.mode.forgetting_timing = false;
        break;
    case Strategy::SingleMergeEndOfTask:
        t.uses_memory = t.merge_at_task_end = true;
        t.fixed_alpha1 = cfg.strategy_alpha1;
        break;
    case Strategy::ReplayOnly:
        t.uses_memory = t.replay_mix = true;
        break;
    case Strategy::Sequential:
        break;
    }
    return t;
}

ControllerConfig controller_cfg_for(const ExperimentConfig& cfg) {
    ControllerConfig c = cfg.controller;
    if (cfg.strategy == Strategy::FixedInterval) {
        c.s_init = cfg.strategy_interval;
        c.s_min = std::min(c.s_min, cfg.strategy_interval);
        c.s_max = std::max(c.s_max, cfg.strategy_interval);
    }
    return c;
}

std::vector<std::vector<std::size_t>> epoch_batches(int n, int batch_size,
                                                    Rng& rng) {
    std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
    std::vector<std::vector<std::size_t>> chunks;
    for (int start = 0; start < n; start += batch_size) {
        int end = std::min(n, start + batch_size);
        chunks.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return chunks;
}

Batch concat_batches(const Batch& a, const Batch& b) {
    Batch out;
    out.batch_size = a.batch_size + b.batch_size;
    out.input_dim = a.input_dim;
    out.inputs = a.inputs;
    out.inputs.insert(out.inputs.end(), b.inputs.begin(), b.inputs.end());
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

std::uint64_t shuffle_substream(int task_id, int epoch) {
    return (static_cast<std::uint64_t>(task_id) << 32) |
           static_cast<std::uint64_t>(epoch);
}

// Plain training of a model clone on one task with the run's budget and
// shuffle streams. The transfer baseline every strategy shares.
double individual_accuracy(const ParamVector& theta0, const ModelSpec& spec,
                           const TaskDataset& task,
                           const ExperimentConfig& cfg, std::uint64_t seed) {
    ParamVector theta = theta0;
    for (int epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        Rng shuffle_rng = Rng::derived(seed, streams::kShuffle,
                                       shuffle_substream(task.task_id, epoch));
        for (const auto& chunk :
             epoch_batches(task.n_train(), cfg.batch_size, shuffle_rng)) {
            Batch batch = make_batch(task.train, chunk);
            auto [next, report] =
                train_step_with_probe(theta, spec, batch, std::nullopt, cfg.lr);
            (void)report;
            theta = std::move(next);
        }
    }
    return evaluate_accuracy(theta, spec, task.test);
}

double mean_of(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

double pop_std_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mu = mean_of(xs);
    double sq = 0.0;
    for (double x : xs) sq += (x - mu) * (x - mu);
    return std::sqrt(sq / static_cast<double>(xs.size()));
}

ordered_json iteration_line(const RunResult& run, const IterationRecord& r) {
    ordered_json j;
    j["run_id"] = run.run_id;
    j["seed"] = run.seed;
    j["task_id"] = r.task_id;
    j["global_iter"] = r.global_iter;
    j["iter_in_task"] = r.iter_in_task;
    j["new_loss"] = r.new_loss;
    if (r.mem_loss) j["mem_loss"] = *r.mem_loss;
    j["steps_since_merge"] = r.steps_since_merge;
    j["phase"] = r.phase;
    j["f_count"] = r.f_count;
    return j;
}

ordered_json merge_line(const RunResult& run, const MergeEvent& e) {
    ordered_json j;
    j["type"] = "merge";
    j["run_id"] = run.run_id;
    j["seed"] = run.seed;
    j["merge_index"] = e.merge_index;
    j["task_id"] = e.task_id;
    j["iteration"] = e.iteration;
    j["s_prime"] = e.actual_interval;
    j["reason"] = merge_reason_name(e.reason);
    j["lambda"] = e.lambda_value;
    j["n_up"] = e.n_up;
    j["l_w_used"] = e.l_w_used;
    j["f_count"] = e.f_count_at_merge;
    j["alpha1"] = e.alpha1;
    j["alpha2"] = e.alpha2;
    if (e.mem_loss_before) j["mem_loss_before"] = *e.mem_loss_before;
    if (e.mem_loss_after) j["mem_loss_after"] = *e.mem_loss_after;
    j["rehearsal_steps"] = e.rehearsal_steps;
    return j;
}

ordered_json boundary_line(const RunResult& run, const TaskBoundaryRecord& b) {
    ordered_json j;
    j["type"] = "task_boundary";
    j["run_id"] = run.run_id;
    j["seed"] = run.seed;
    j["task_id"] = b.task_id;
    j["accuracy_row"] = b.accuracy_row;
    return j;
}

void write_trajectory(const RunResult& run,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_reports: cannot open " + path.string());

    std::size_t merge_idx = 0;
    std::size_t boundary_idx = 0;
    for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
        const IterationRecord& rec = run.trajectory[i];
        out << iteration_line(run, rec).dump() << "\n";
        while (merge_idx < run.merges.size() &&
               run.merges[merge_idx].iteration == rec.global_iter) {
            out << merge_line(run, run.merges[merge_idx]).dump() << "\n";
            ++merge_idx;
        }
        bool task_ends = (i + 1 == run.trajectory.size()) ||
                         (run.trajectory[i + 1].task_id != rec.task_id);
        if (task_ends && boundary_idx < run.boundaries.size()) {
            out << boundary_line(run, run.boundaries[boundary_idx]).dump()
                << "\n";
            ++boundary_idx;
        }
    }
}

std::string optional_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

} // namespace

std::string run_id_for(const ExperimentConfig& cfg, std::uint64_t seed) {
    return strategy_name(cfg.strategy) + "_seed" + std::to_string(seed);
}

RunResult run_task_sequence(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto t_start = std::chrono::steady_clock::now();

    RunResult result;
    result.seed = seed;
    result.run_id = run_id_for(cfg, seed);

    const std::vector<TaskDataset> tasks = generate_sequence(cfg.sequence);
    const int num_tasks = cfg.sequence.num_tasks;

    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.model.seed, streams::kModelInit, seed);
    const ParamVector theta0 = init_model(spec);

    AccuracyMatrix matrix(num_tasks);

    try {
        for (const TaskDataset& task : tasks) {
            matrix.set_individual(
                task.task_id,
                individual_accuracy(theta0, spec, task, cfg, seed));
        }

        const StrategyTraits tr = traits_for(cfg);
        std::optional<Controller> controller;
        if (tr.uses_controller) {
            controller.emplace(controller_cfg_for(cfg), tr.mode);
        }

        Rng probe_rng = Rng::derived(seed, streams::kProbe);
        Rng fusion_rng = Rng::derived(seed, streams::kRehearsal);
        Rng replay_rng = Rng::derived(seed, streams::kReplayMix);

        ParamVector theta = theta0;
        MemoryBuffer memory;
        int global_iter = 0;
        int merge_index = 0;

        for (const TaskDataset& task : tasks) {
            const int k = task.task_id;
            if (controller) {
                if (cfg.reset_controller_per_task) controller->reset();
                else controller->begin_interval();
            }
            ParamVector anchor = theta;
            int iter_in_task = 0;

            for (int epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
                Rng shuffle_rng =
                    Rng::derived(seed, streams::kShuffle,
                                 shuffle_substream(k, epoch));
                for (const auto& chunk : epoch_batches(
                         task.n_train(), cfg.batch_size, shuffle_rng)) {
                    ++global_iter;
                    ++iter_in_task;

                    Batch batch = make_batch(task.train, chunk);
                    if (tr.replay_mix && !memory.empty()) {
                        std::optional<Batch> mem_batch =
                            memory.sample_probe(batch.batch_size, replay_rng);
                        batch = concat_batches(batch, *mem_batch);
                    }
                    std::optional<Batch> probe;
                    if (tr.probes && !memory.empty()) {
                        probe = memory.sample_probe(cfg.batch_size, probe_rng);
                    }

                    auto [next, report] = train_step_with_probe(
                        theta, spec, batch, probe, cfg.lr);
                    theta = std::move(next);

                    MergeDecision decision;
                    if (controller) {
                        decision = controller->observe_step(report.mem_loss);
                    }

                    IterationRecord rec;
                    rec.task_id = k;
                    rec.global_iter = global_iter;
                    rec.iter_in_task = iter_in_task;
                    rec.new_loss = report.new_loss;
                    rec.mem_loss = report.mem_loss;
                    rec.steps_since_merge =
                        controller ? controller->steps_since_merge() : 0;
                    rec.phase = controller ? phase_name(controller->phase())
                                           : "Inactive";
                    rec.f_count = controller ? controller->f_count() : 0;
                    result.trajectory.push_back(std::move(rec));

                    if (decision.merge_now) {
                        TaskVector tau = task_vector(anchor, theta);
                        double lambda =
                            l1_rate(tau, decision.actual_interval);
                        MergeSnapshot snap = controller->on_merge(lambda);

                        MergeContext ctx;
                        ctx.merge_index = ++merge_index;
                        ctx.task_id = k;
                        ctx.iteration = global_iter;
                        ctx.actual_interval = decision.actual_interval;
                        ctx.reason = decision.reason;
                        ctx.lambda_value = lambda;
                        ctx.snapshot = snap;
                        ctx.l_w = cfg.controller.l_w;
                        ctx.f_max = cfg.controller.f_max;
                        ctx.fixed_alpha1 = tr.fixed_alpha1;

                        auto [merged, event] =
                            execute_merge(anchor, theta, spec, memory, ctx,
                                          cfg.batch_size, cfg.lr, fusion_rng);
                        theta = std::move(merged);
                        anchor = theta;
                        result.merges.push_back(std::move(event));
                    }
                }
            }

            if (tr.merge_at_task_end) {
                TaskVector tau = task_vector(anchor, theta);
                MergeContext ctx;
                ctx.merge_index = ++merge_index;
                ctx.task_id = k;
                ctx.iteration = global_iter;
                ctx.actual_interval = iter_in_task;
                ctx.reason = MergeReason::Scheduled;
                ctx.lambda_value = l1_rate(tau, iter_in_task);
                ctx.l_w = cfg.controller.l_w;
                ctx.f_max = cfg.controller.f_max;
                ctx.fixed_alpha1 = tr.fixed_alpha1;

                auto [merged, event] =
                    execute_merge(anchor, theta, spec, memory, ctx,
                                  cfg.batch_size, cfg.lr, fusion_rng);
                theta = std::move(merged);
                result.merges.push_back(std::move(event));
            }

            if (tr.uses_memory) {
                Rng mem_rng = Rng::derived(seed, streams::kMemoryStore,
                                           static_cast<std::uint64_t>(k));
                memory.store(task, cfg.memory_fraction, mem_rng);
            }

            TaskBoundaryRecord boundary;
            boundary.task_id = k;
            for (int i = 1; i <= k; ++i) {
                double acc = evaluate_accuracy(
                    theta, spec, tasks[static_cast<std::size_t>(i - 1)].test);
                matrix.set(i, k, acc);
                boundary.accuracy_row.push_back(acc);
            }
            result.boundaries.push_back(std::move(boundary));
        }
    } catch (const DivergenceError& e) {
        throw DivergenceError(result.run_id + ": " + e.what());
    }

    result.matrix = matrix;
    result.metrics = compute_metrics(matrix);
    result.merge_count = static_cast<int>(result.merges.size());
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return result;
}

SuiteResult run_suite(const ExperimentConfig& cfg) {
    cfg.validate();
    SuiteResult suite;
    suite.strategy = cfg.strategy;
    for (std::uint64_t seed : cfg.seeds) {
        try {
            suite.runs.push_back(run_task_sequence(cfg, seed));
        } catch (const DivergenceError& e) {
            suite.failures.push_back(
                RunFailure{run_id_for(cfg, seed), seed, e.what()});
        }
    }

    std::vector<double> ops, bwts, fwts, counts;
    for (const RunResult& r : suite.runs) {
        ops.push_back(r.metrics.op);
        bwts.push_back(r.metrics.bwt);
        fwts.push_back(r.metrics.fwt);
        counts.push_back(static_cast<double>(r.merge_count));
    }
    suite.summary.n_runs = static_cast<int>(suite.runs.size());
    suite.summary.op_mean = mean_of(ops);
    suite.summary.op_std = pop_std_of(ops);
    suite.summary.bwt_mean = mean_of(bwts);
    suite.summary.bwt_std = pop_std_of(bwts);
    suite.summary.fwt_mean = mean_of(fwts);
    suite.summary.fwt_std = pop_std_of(fwts);
    suite.summary.merge_count_mean = mean_of(counts);
    return suite;
}

void emit_reports(const SuiteResult& suite, const ExperimentConfig& cfg,
                  const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);

    {
        std::ofstream out(output_dir / "config.json", std::ios::binary);
        if (!out) throw IoError("emit_reports: cannot write config.json");
        out << config_to_json(cfg).dump(2) << "\n";
    }

    {
        std::ofstream out(output_dir / "metrics.csv", std::ios::binary);
        if (!out) throw IoError("emit_reports: cannot write metrics.csv");
        out << "run_id,seed,strategy,OP,BWT,FWT,merge_count\n";
        for (const RunResult& r : suite.runs) {
            out << r.run_id << "," << r.seed << ","
                << strategy_name(suite.strategy) << ","
                << format_double(r.metrics.op) << ","
                << format_double(r.metrics.bwt) << ","
                << format_double(r.metrics.fwt) << "," << r.merge_count
                << "\n";
        }
        if (!suite.runs.empty()) {
            out << "summary,," << strategy_name(suite.strategy) << ","
                << format_double(suite.summary.op_mean) << ","
                << format_double(suite.summary.bwt_mean) << ","
                << format_double(suite.summary.fwt_mean) << ","
                << format_double(suite.summary.merge_count_mean) << "\n";
        }
    }

    {
        std::ofstream out(output_dir / "merges.csv", std::ios::binary);
        if (!out) throw IoError("emit_reports: cannot write merges.csv");
        out << "run_id,seed,merge_index,task_id,iteration,s_prime,reason,"
               "lambda,n_up,l_w_used,f_count,alpha1,alpha2,mem_loss_before,"
               "mem_loss_after,rehearsal_steps\n";
        for (const RunResult& r : suite.runs) {
            for (const MergeEvent& e : r.merges) {
                out << r.run_id << "," << r.seed << "," << e.merge_index << ","
                    << e.task_id << "," << e.iteration << ","
                    << e.actual_interval << "," << merge_reason_name(e.reason)
                    << "," << format_double(e.lambda_value) << "," << e.n_up
                    << "," << e.l_w_used << "," << e.f_count_at_merge << ","
                    << format_double(e.alpha1) << ","
                    << format_double(e.alpha2) << ","
                    << optional_cell(e.mem_loss_before) << ","
                    << optional_cell(e.mem_loss_after) << ","
                    << e.rehearsal_steps << "\n";
            }
        }
    }

    for (const RunResult& r : suite.runs) {
        write_trajectory(r, output_dir /
                                ("trajectory_" + r.run_id + ".jsonl"));
    }
}

} // namespace aimm
