#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aimm/config.hpp"
#include "aimm/errors.hpp"
#include "aimm/format.hpp"
#include "aimm/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void print_suite(const aimm::SuiteResult& suite) {
    for (const aimm::RunResult& r : suite.runs) {
        std::cout << "run " << r.run_id << ": OP=" << fixed4(r.metrics.op)
                  << " BWT=" << fixed4(r.metrics.bwt)
                  << " FWT=" << fixed4(r.metrics.fwt)
                  << " merges=" << r.merge_count << " ("
                  << fixed4(r.wall_time_s) << "s)\n";
    }
    for (const aimm::RunFailure& f : suite.failures) {
        std::cerr << "run " << f.run_id << " FAILED: " << f.message << "\n";
    }
    const aimm::SuiteSummary& s = suite.summary;
    std::cout << "suite " << aimm::strategy_name(suite.strategy)
              << ": n=" << s.n_runs << " OP=" << fixed4(s.op_mean) << "+-"
              << fixed4(s.op_std) << " BWT=" << fixed4(s.bwt_mean) << "+-"
              << fixed4(s.bwt_std) << " FWT=" << fixed4(s.fwt_mean) << "+-"
              << fixed4(s.fwt_std)
              << " merges=" << fixed4(s.merge_count_mean) << "\n";
}

int cmd_run(const std::string& config_path,
            const std::optional<std::string>& strategy_override,
            const std::optional<std::string>& out_override) {
    aimm::ExperimentConfig cfg = aimm::load_config(config_path);
    if (strategy_override) {
        cfg.strategy = aimm::strategy_from_name(*strategy_override);
    }
    if (out_override) cfg.output_dir = *out_override;
    cfg.validate();
    for (const std::string& w : cfg.warnings()) {
        std::cerr << "warning: " << w << "\n";
    }

    aimm::SuiteResult suite = aimm::run_suite(cfg);
    aimm::emit_reports(suite, cfg, cfg.output_dir);
    print_suite(suite);
    std::cout << "wrote " << cfg.output_dir << "/metrics.csv, merges.csv, "
              << "config.json and " << suite.runs.size()
              << " trajectory file(s)\n";
    return suite.partial() ? kExitDivergence : kExitOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

int cmd_report(const std::string& dir) {
    std::filesystem::path path = std::filesystem::path(dir) / "metrics.csv";
    std::ifstream in(path);
    if (!in) throw aimm::IoError("report: cannot open " + path.string());

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        // Round the metric columns for reading; leave everything else as-is.
        if (!rows.empty() && cells.size() >= 7) {
            for (std::size_t c = 3; c <= 6; ++c) {
                try {
                    std::size_t used = 0;
                    double v = std::stod(cells[c], &used);
                    if (used == cells[c].size()) cells[c] = fixed4(v);
                } catch (const std::exception&) {
                }
            }
        }
        rows.push_back(std::move(cells));
    }
    if (rows.size() < 2) {
        throw aimm::IoError("report: " + path.string() + " has no data rows");
    }

    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::cout << (c ? "  " : "") << row[c]
                      << std::string(widths[c] - row[c].size(), ' ');
        }
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_selftest() {
    aimm::ExperimentConfig cfg = aimm::default_desk_config();
    cfg.sequence.num_tasks = 2;
    cfg.sequence.input_dim = 8;
    cfg.sequence.classes_per_task = 3;
    cfg.sequence.samples_per_task = 120;
    cfg.sequence.test_samples_per_task = 60;
    cfg.model.input_dim = 8;
    cfg.model.hidden_dims = {16};
    cfg.model.num_classes = 3;
    cfg.epochs_per_task = 2;
    cfg.memory_fraction = 0.05;
    cfg.seeds = {1};
    std::filesystem::path out =
        std::filesystem::temp_directory_path() / "aimmerge_selftest";
    cfg.output_dir = out.string();
    cfg.validate();

    aimm::SuiteResult suite = aimm::run_suite(cfg);
    aimm::emit_reports(suite, cfg, cfg.output_dir);
    bool wrote = std::filesystem::exists(out / "metrics.csv") &&
                 std::filesystem::exists(out / "merges.csv") &&
                 std::filesystem::exists(out / "config.json");
    std::filesystem::remove_all(out);

    if (suite.partial() || suite.runs.empty()) {
        std::cerr << "selftest: run diverged\n";
        return kExitDivergence;
    }
    if (!wrote || !suite.runs.front().matrix.complete()) {
        std::cerr << "selftest: outputs incomplete\n";
        return 1;
    }
    const aimm::RunResult& r = suite.runs.front();
    std::cout << "selftest: ok (OP=" << fixed4(r.metrics.op)
              << " BWT=" << fixed4(r.metrics.bwt)
              << " merges=" << r.merge_count << ")\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aimmerge: continual-learning benchmark with adaptive "
                 "iterative model merging"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> strategy_override;
    std::optional<std::string> out_override;
    CLI::App* run = app.add_subcommand(
        "run", "Run the configured strategy over its seed list");
    run->add_option("--config", config_path, "Path to a JSON config file")
        ->required();
    run->add_option("--strategy", strategy_override,
                    "Override the config's strategy by name");
    run->add_option("--out", out_override,
                    "Override the config's output directory");

    std::string report_dir;
    CLI::App* report = app.add_subcommand(
        "report", "Pretty-print metrics.csv from an output directory");
    report->add_option("--dir", report_dir, "Output directory of a run")
        ->required();

    CLI::App* selftest = app.add_subcommand(
        "selftest", "Run a tiny end-to-end check of the build");

    try {
        app.parse(argc, argv);
        if (run->parsed()) {
            return cmd_run(config_path, strategy_override, out_override);
        }
        if (report->parsed()) return cmd_report(report_dir);
        if (selftest->parsed()) return cmd_selftest();
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const aimm::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const aimm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
