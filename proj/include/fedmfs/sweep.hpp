#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedmfs/federation.hpp"
#include "fedmfs/io.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// Grid description for a trade-off sweep. Baselines without gamma/alpha
/// knobs run once per seed.
struct SweepSpec {
    std::vector<std::int32_t> gammas;
    std::vector<std::pair<double, double>> alpha_pairs;
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
    std::uint64_t byte_budget = 262144;
    ExperimentConfig base;
};

inline void validate_sweep_spec(const SweepSpec& spec) {
    if (spec.gammas.empty()) throw InvalidSpec("sweep needs at least one gamma");
    if (spec.alpha_pairs.empty()) throw InvalidSpec("sweep needs at least one alpha pair");
    if (spec.strategies.empty()) throw InvalidSpec("sweep needs at least one strategy");
    if (spec.seeds.empty()) throw InvalidSpec("sweep needs at least one seed");
    for (const auto& [as, ac] : spec.alpha_pairs)
        if (std::abs(as + ac - 1.0) > 1e-12)
            throw InvalidSpec("alpha pair (" + format_number(as) + ", " + format_number(ac) +
                              ") does not sum to 1");
}

struct SweepRow {
    Strategy strategy = Strategy::fedmfs;
    std::optional<std::int32_t> gamma;
    std::optional<double> alpha_s;
    std::optional<double> alpha_c;
    std::uint64_t seed = 0;
    double accuracy_at_budget = 0.0;
    double bytes_per_round = 0.0;
    std::int32_t rounds_within_budget = 0;
    std::string error;
};

/// Mean client accuracy at the last round whose cumulative uploaded bytes
/// fit the budget; a budget smaller than the first round reports the
/// untrained-model accuracy.
inline double accuracy_at_budget(const ExperimentResult& result, std::uint64_t budget) {
    double acc = result.initial_accuracy;
    for (const RoundMetrics& m : result.metrics) {
        if (m.cumulative_uploaded_bytes > budget) break;
        acc = m.mean_accuracy;
    }
    return acc;
}

inline std::int32_t rounds_within_budget(const ExperimentResult& result, std::uint64_t budget) {
    std::int32_t rounds = 0;
    for (const RoundMetrics& m : result.metrics) {
        if (m.cumulative_uploaded_bytes > budget) break;
        ++rounds;
    }
    return rounds;
}

namespace detail {

inline std::string cell_name(const SweepRow& row) {
    std::string name = strategy_name(row.strategy);
    if (row.gamma) name += "_g" + std::to_string(*row.gamma);
    if (row.alpha_s) name += "_as" + format_number(*row.alpha_s);
    name += "_seed" + std::to_string(row.seed);
    return name;
}

}  // namespace detail

/// Runs every sweep cell; failed cells become error rows and the sweep
/// continues. When out_dir is non-empty each cell writes its metrics CSV to
/// its own subdirectory.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, const DatasetBundle& bundle,
                                       const fs::path& out_dir = {}) {
    validate_sweep_spec(spec);
    std::vector<SweepRow> rows;

    auto run_cell = [&](SweepRow row, const ExperimentConfig& cfg) {
        try {
            const std::vector<ConfigError> errors = validate_config(cfg);
            if (!errors.empty()) {
                row.error = errors.front().field + ": " + errors.front().message;
                rows.push_back(std::move(row));
                return;
            }
            const ExperimentResult result = run_experiment(cfg, bundle);
            row.accuracy_at_budget = accuracy_at_budget(result, spec.byte_budget);
            row.rounds_within_budget = rounds_within_budget(result, spec.byte_budget);
            row.bytes_per_round =
                static_cast<double>(result.ledger.total_uploaded()) /
                static_cast<double>(std::max<std::size_t>(result.metrics.size(), 1));
            if (!out_dir.empty()) {
                const fs::path cell_dir = out_dir / detail::cell_name(row);
                fs::create_directories(cell_dir);
                write_file(cell_dir / "metrics.csv", metrics_to_csv(result.metrics));
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    };

    for (Strategy strategy : spec.strategies) {
        for (std::uint64_t seed : spec.seeds) {
            if (strategy == Strategy::fedmfs) {
                for (std::int32_t gamma : spec.gammas) {
                    for (const auto& [as, ac] : spec.alpha_pairs) {
                        SweepRow row;
                        row.strategy = strategy;
                        row.gamma = gamma;
                        row.alpha_s = as;
                        row.alpha_c = ac;
                        row.seed = seed;
                        ExperimentConfig cfg = spec.base;
                        cfg.strategy = strategy;
                        cfg.gamma = gamma;
                        cfg.alpha_s = as;
                        cfg.alpha_c = ac;
                        cfg.seed = seed;
                        run_cell(std::move(row), cfg);
                    }
                }
            } else {
                SweepRow row;
                row.strategy = strategy;
                row.seed = seed;
                ExperimentConfig cfg = spec.base;
                cfg.strategy = strategy;
                cfg.seed = seed;
                run_cell(std::move(row), cfg);
            }
        }
    }
    return rows;
}

inline std::string sweep_csv_header() {
    return "strategy,gamma,alpha_s,alpha_c,seed,accuracy_at_budget,bytes_per_round,"
           "rounds_within_budget,error\n";
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = sweep_csv_header();
    for (const SweepRow& r : rows) {
        out += std::string(strategy_name(r.strategy)) + ',';
        out += (r.gamma ? std::to_string(*r.gamma) : std::string{}) + ',';
        out += (r.alpha_s ? format_number(*r.alpha_s) : std::string{}) + ',';
        out += (r.alpha_c ? format_number(*r.alpha_c) : std::string{}) + ',';
        out += std::to_string(r.seed) + ',';
        out += format_number(r.accuracy_at_budget) + ',';
        out += format_number(r.bytes_per_round) + ',';
        out += std::to_string(r.rounds_within_budget) + ',';
        out += r.error + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep spec file: the flat base-config fields plus grid lists.

inline SweepSpec load_sweep_spec(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("cannot parse sweep spec " + path.string() + ": " + e.what());
    }
    try {
        SweepSpec spec;
        spec.base = config_from_json(j);
        if (j.contains("gammas"))
            for (const json& g : j.at("gammas")) spec.gammas.push_back(g.get<std::int32_t>());
        if (j.contains("alpha_pairs"))
            for (const json& p : j.at("alpha_pairs"))
                spec.alpha_pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        if (j.contains("strategies"))
            for (const json& s : j.at("strategies"))
                spec.strategies.push_back(parse_strategy(s.get<std::string>()));
        if (j.contains("seeds"))
            for (const json& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
        spec.byte_budget = j.value("byte_budget", spec.byte_budget);
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad sweep spec: ") + e.what());
    }
}

}  // namespace fedmfs
