// Command-line front end: synthetic data generation, single experiments,
// trade-off sweeps, and the Shapley axiom self-test.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedmfs/datagen.hpp"
#include "fedmfs/federation.hpp"
#include "fedmfs/io.hpp"
#include "fedmfs/shapley_check.hpp"
#include "fedmfs/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("FEDMFS_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string value(env);
    if (value == "quiet") return LogLevel::quiet;
    if (value == "debug") return LogLevel::debug;
    return LogLevel::info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << msg << '\n';
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir,
                 std::uint64_t* seed_override) {
    fedmfs::SynthSpec spec;
    try {
        spec = spec_path == "default" ? fedmfs::default_paper_spec()
                                      : fedmfs::load_synth_spec(spec_path);
        if (seed_override != nullptr) spec.seed = *seed_override;
        fedmfs::validate_spec(spec);
    } catch (const std::exception& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kExitConfigError;
    }
    try {
        const fedmfs::DatasetBundle bundle = fedmfs::generate(spec);
        fedmfs::save_dataset_dir(out_dir, bundle);
        log_info("wrote " + std::to_string(bundle.clients.size()) + " clients, " +
                 std::to_string(bundle.modalities.size()) + " modalities to " + out_dir);
    } catch (const std::exception& e) {
        std::cerr << "generation failed: " << e.what() << '\n';
        return kExitRuntimeError;
    }
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool parallel) {
    fedmfs::ExperimentConfig cfg;
    try {
        cfg = fedmfs::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    if (cfg.dataset_path.empty()) {
        std::cerr << "config error: [dataset_path] no dataset directory given\n";
        return kExitConfigError;
    }
    const std::vector<fedmfs::ConfigError> errors = fedmfs::validate_config(cfg);
    if (!errors.empty()) {
        for (const fedmfs::ConfigError& e : errors)
            std::cerr << "config error: [" << e.field << "] " << e.message << '\n';
        return kExitConfigError;
    }

    try {
        const auto mode = parallel ? fedmfs::ExecutionMode::parallel
                                   : fedmfs::ExecutionMode::sequential;
        const fedmfs::ExperimentResult result = fedmfs::run_experiment(cfg, mode);

        fedmfs::fs::create_directories(out_dir);
        const fedmfs::fs::path out(out_dir);
        fedmfs::write_file(out / "metrics.csv", fedmfs::metrics_to_csv(result.metrics));
        fedmfs::write_file(out / "selection.csv",
                           fedmfs::selection_to_csv(result.selection_log));
        fedmfs::write_file(out / "attribution.csv",
                           fedmfs::attribution_to_csv(result.attribution));
        for (std::size_t t = 0; t < result.checkpoints.size(); ++t)
            fedmfs::write_round_checkpoints(out / "checkpoints", result.checkpoints[t],
                                            static_cast<std::int32_t>(t));

        if (!result.metrics.empty()) {
            const fedmfs::RoundMetrics& last = result.metrics.back();
            log_info("finished " + std::to_string(result.metrics.size()) + " rounds: mean acc " +
                     fedmfs::format_number(last.mean_accuracy) + ", uploaded " +
                     std::to_string(last.cumulative_uploaded_bytes) + " bytes");
        }
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return kExitRuntimeError;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir) {
    fedmfs::SweepSpec spec;
    try {
        spec = fedmfs::load_sweep_spec(spec_path);
        fedmfs::validate_sweep_spec(spec);
        if (spec.base.dataset_path.empty())
            throw fedmfs::InvalidSpec("sweep spec has no dataset_path");
    } catch (const std::exception& e) {
        std::cerr << "sweep spec error: " << e.what() << '\n';
        return kExitConfigError;
    }
    try {
        const fedmfs::DatasetBundle bundle = fedmfs::load_dataset_dir(spec.base.dataset_path);
        fedmfs::fs::create_directories(out_dir);
        const std::vector<fedmfs::SweepRow> rows =
            fedmfs::run_sweep(spec, bundle, out_dir);
        fedmfs::write_file(fedmfs::fs::path(out_dir) / "summary.csv",
                           fedmfs::sweep_to_csv(rows));
        std::size_t failed = 0;
        for (const fedmfs::SweepRow& row : rows)
            if (!row.error.empty()) ++failed;
        log_info("sweep finished: " + std::to_string(rows.size()) + " cells, " +
                 std::to_string(failed) + " failed");
    } catch (const std::exception& e) {
        std::cerr << "sweep failed: " << e.what() << '\n';
        return kExitRuntimeError;
    }
    return kExitOk;
}

int cmd_shapley_check(bool inject_broken_weights) {
    const std::vector<fedmfs::CheckResult> results =
        fedmfs::run_shapley_checks(inject_broken_weights);
    bool all_ok = true;
    for (const fedmfs::CheckResult& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << ' ' << r.name;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ')';
        std::cout << '\n';
        all_ok = all_ok && r.passed;
    }
    return all_ok ? kExitOk : kExitRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedMFS simulator: federated multimodal fusion with selective uploads"};
    app.require_subcommand(1);

    std::string spec_path, config_path, out_dir;
    std::uint64_t seed_override = 0;
    bool parallel = false;
    bool inject_broken = false;

    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
    gen->add_option("spec", spec_path,
                    "Synth spec JSON, or 'default' for the built-in federation")
        ->required();
    gen->add_option("out", out_dir, "Output dataset directory")->required();
    CLI::Option* seed_opt = gen->add_option("--seed", seed_override, "Override the spec seed");

    CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("config", config_path, "Experiment config JSON")->required();
    run->add_option("out", out_dir, "Output directory for CSVs and checkpoints")->required();
    run->add_flag("--parallel", parallel, "Run clients on worker threads");

    CLI::App* sweep = app.add_subcommand("sweep", "Run a (gamma, alpha, strategy) grid");
    sweep->add_option("spec", spec_path, "Sweep spec JSON")->required();
    sweep->add_option("out", out_dir, "Output directory for the summary and cells")->required();

    CLI::App* check = app.add_subcommand("shapley-check", "Run the Shapley axiom self-test");
    check->add_flag("--inject-broken-weights", inject_broken,
                    "Negative control: run with a wrong weight formula");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed())
        return cmd_gen_data(spec_path, out_dir, seed_opt->count() ? &seed_override : nullptr);
    if (run->parsed()) return cmd_run(config_path, out_dir, parallel);
    if (sweep->parsed()) return cmd_sweep(spec_path, out_dir);
    if (check->parsed()) return cmd_shapley_check(inject_broken);
    return kExitConfigError;
}
