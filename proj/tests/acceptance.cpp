// Acceptance suite: end-to-end checks on the shipped defaults, one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedmfs/datagen.hpp"
#include "fedmfs/federation.hpp"
#include "fedmfs/io.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/selection.hpp"
#include "fedmfs/shapley.hpp"
#include "fedmfs/sweep.hpp"

using namespace fedmfs;

namespace {

struct Criterion {
    std::string name;
    bool passed = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median3(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

std::string encode_global(const GlobalState& global) {
    std::string bytes;
    for (const auto& [m, params] : global.global_models) bytes += encode_checkpoint(params);
    return bytes;
}

/// Shared experiment settings for the trade-off criteria.
ExperimentConfig trend_config(Strategy strategy, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.rounds = 10;
    cfg.local_epochs = 1;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 32;
    cfg.gamma = 1;
    cfg.alpha_s = 0.2;
    cfg.alpha_c = 0.8;
    cfg.shapley_subsample = 50;
    cfg.strategy = strategy;
    cfg.seed = seed;
    return cfg;
}

struct TrendRuns {
    std::vector<ExperimentResult> fedmfs, upload_all, random_one;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};

TrendRuns run_trend_experiments() {
    TrendRuns runs;
    for (std::uint64_t seed : runs.seeds) {
        const DatasetBundle bundle = generate(default_paper_spec(seed));
        runs.fedmfs.push_back(run_experiment(trend_config(Strategy::fedmfs, seed), bundle));
        runs.upload_all.push_back(
            run_experiment(trend_config(Strategy::upload_all, seed), bundle));
        runs.random_one.push_back(
            run_experiment(trend_config(Strategy::random_one, seed), bundle));
    }
    return runs;
}

std::optional<std::size_t> first_round_reaching(const ExperimentResult& result, double level) {
    for (std::size_t r = 0; r < result.metrics.size(); ++r)
        if (result.metrics[r].mean_accuracy >= level) return r;
    return std::nullopt;
}

// --------------------------------------------------------------------------
// 1. Shapley axioms on built-in fixtures up to 8 players.

Criterion criterion_axioms() {
    Criterion c{"1 shapley axioms (efficiency, dummy, symmetry)"};
    const auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    for (std::size_t n = 2; n <= 8 && ok; ++n) {
        // random game with a dummy at index 1 and players 0 and 2 symmetric
        const std::size_t masks = std::size_t{1} << n;
        std::vector<double> table(masks);
        Rng rng(derive_seed(0xACCEu, n));
        for (double& v : table) v = rng.uniform();

        auto canonical = [n](std::uint32_t mask) {
            std::uint32_t m = mask & ~0b010u;  // drop the dummy bit
            const bool a = m & 0b001u, b = m & 0b100u;
            if (b && !a) m = (m & ~0b100u) | 0b001u;  // sort the symmetric pair
            return m;
        };
        CoalitionGame game;
        for (std::size_t i = 0; i < n; ++i) game.players.push_back(static_cast<ModalityId>(i));
        game.value = [&](std::uint32_t mask) { return table[canonical(mask)]; };

        const auto phi = exact_shapley(game);
        double total = 0.0;
        for (const auto& [_, v] : phi) total += v;
        const double expected = table[canonical(static_cast<std::uint32_t>(masks - 1))] -
                                table[canonical(0)];
        if (std::abs(total - expected) > 1e-9) {
            ok = false;
            detail = "efficiency broken at n=" + std::to_string(n);
        }
        if (phi.at(1) != 0.0) {
            ok = false;
            detail = "dummy player nonzero at n=" + std::to_string(n);
        }
        if (n >= 3 && std::abs(phi.at(0) - phi.at(2)) >= 1e-9) {
            ok = false;
            detail = "symmetric players differ at n=" + std::to_string(n);
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 5.0) {
        ok = false;
        detail = "runtime " + format_number(elapsed) + "s";
    }
    c.passed = ok;
    c.detail = ok ? "fixtures n=2..8, " + format_number(elapsed) + "s" : detail;
    return c;
}

// --------------------------------------------------------------------------
// 2. Exact vs permutation-sampling oracle.

Criterion criterion_oracle() {
    Criterion c{"2 exact vs permutation oracle"};
    std::vector<double> storage(32);
    Rng rng(0x0AC1Eu);
    for (double& v : storage) v = rng.uniform();
    CoalitionGame game;
    for (std::size_t i = 0; i < 5; ++i) game.players.push_back(static_cast<ModalityId>(i));
    game.value = [&storage](std::uint32_t mask) { return storage[mask]; };

    const auto exact = exact_shapley(game);
    std::vector<double> mads;
    for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
        const auto sampled = permutation_shapley(game, 10000, seed);
        double mad = 0.0;
        for (const auto& [player, value] : exact) mad += std::abs(sampled.at(player) - value);
        mads.push_back(mad / 5.0);
    }
    const double median = median3(mads);

    CoalitionGame fixture;
    fixture.players = {1, 2, 3};
    fixture.value = [](std::uint32_t mask) {
        static const double table[8] = {0, 1, 2, 4, 3, 5, 6, 9};
        return table[mask];
    };
    const auto fx_exact = exact_shapley(fixture);
    const auto fx_enum = enumerated_permutation_shapley(fixture);
    bool fixture_ok = true;
    const std::map<ModalityId, double> expected{{1, 2.0}, {2, 3.0}, {3, 4.0}};
    for (const auto& [player, want] : expected) {
        if (std::abs(fx_exact.at(player) - want) > 1e-9) fixture_ok = false;
        if (std::abs(fx_enum.at(player) - want) > 1e-9) fixture_ok = false;
    }

    c.passed = median <= 0.02 && fixture_ok;
    c.detail = "median MAD = " + format_number(median) +
               (fixture_ok ? ", fixture phi = (2, 3, 4) on both paths"
                           : ", 3-player fixture FAILED");
    return c;
}

// --------------------------------------------------------------------------
// 3. Selection extremes over random reports.

Criterion criterion_selection_extremes() {
    Criterion c{"3 selection extremes (alpha_s = 1 and alpha_c = 1)"};
    bool ok = true;
    std::string detail;
    Rng rng(0x5E1Fu);
    for (int trial = 0; trial < 100 && ok; ++trial) {
        const std::size_t m_count = 2 + rng.uniform_below(6);
        ShapleyReport report;
        std::map<ModalityId, std::uint64_t> sizes;
        for (std::size_t m = 0; m < m_count; ++m) {
            report.per_modality_mean_abs[static_cast<ModalityId>(m)] =
                static_cast<double>(rng.uniform_below(128)) / 128.0;
            sizes[static_cast<ModalityId>(m)] = 4 * (1 + rng.uniform_below(2000));
        }

        const auto perf = compute_priorities(report, sizes, SelectionConfig{1, 1.0, 0.0});
        ModalityId best = report.per_modality_mean_abs.begin()->first;
        for (const auto& [m, v] : report.per_modality_mean_abs) {
            const double bv = report.per_modality_mean_abs.at(best);
            if (v > bv ||
                (v == bv && (sizes.at(m) < sizes.at(best) ||
                             (sizes.at(m) == sizes.at(best) && m < best))))
                best = m;
        }
        if (perf.selected != std::vector<ModalityId>{best}) {
            ok = false;
            detail = "alpha_s=1 did not select the raw-shapley argmax (trial " +
                     std::to_string(trial) + ")";
        }

        const auto comm = compute_priorities(report, sizes, SelectionConfig{1, 0.0, 1.0});
        std::uint64_t smallest = sizes.begin()->second;
        for (const auto& [_, s] : sizes) smallest = std::min(smallest, s);
        if (sizes.at(comm.selected.front()) != smallest) {
            ok = false;
            detail = "alpha_c=1 did not select a minimum-size modality (trial " +
                     std::to_string(trial) + ")";
        }
    }
    c.passed = ok;
    c.detail = ok ? "100 random reports" : detail;
    return c;
}

// --------------------------------------------------------------------------
// 4. Aggregation arithmetic.

Criterion criterion_aggregation() {
    Criterion c{"4 aggregation arithmetic (0.25p + 0.75q, weight sums)"};
    const Arch arch{3, 4, 3};
    const ModalityModelParams p = init_modality_params(0, arch, 1);
    const ModalityModelParams q = init_modality_params(0, arch, 2);
    const std::vector<UploadPacket> packets{{1, 0, p, 100}, {2, 0, q, 300}};
    const AggregationOutcome two = server_aggregate(packets, GlobalState{});

    bool exact = true;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        const float expected = static_cast<float>(0.25 * static_cast<double>(p.weights[i]) +
                                                  0.75 * static_cast<double>(q.weights[i]));
        if (two.state.global_models.at(0).weights[i] != expected) exact = false;
    }

    // weight sums across a 10-round heterogeneous run
    SynthSpec spec;
    spec.num_clients = 4;
    spec.num_classes = 3;
    spec.samples_per_client = 30;
    spec.seed = 3;
    spec.modalities = {{0, "a", 2, 4, 0.9, 0.6}, {1, "b", 3, 4, 0.9, 0.6}};
    spec.absence[3] = {1};
    DatasetBundle bundle = generate(spec);
    // unequal sample counts so the weights are nontrivial
    for (std::size_t k = 0; k < bundle.clients.size(); ++k) {
        ClientDataset& ds = bundle.clients[k];
        const std::size_t keep = 12 + 6 * k;
        ds.labels.resize(keep);
        for (auto& [m, data] : ds.modalities) {
            FloatMatrix trimmed(keep, data.features.cols());
            for (std::size_t r = 0; r < keep; ++r)
                for (std::size_t col = 0; col < data.features.cols(); ++col)
                    trimmed(r, col) = data.features(r, col);
            data.features = trimmed;
        }
    }
    ExperimentConfig cfg;
    cfg.rounds = 10;
    cfg.local_epochs = 1;
    cfg.batch_size = 8;
    cfg.strategy = Strategy::random_one;
    cfg.seed = 9;
    cfg.forest_trees = 5;
    cfg.forest_depth = 2;
    cfg.shapley_subsample = 5;
    const ExperimentResult result = run_experiment(cfg, bundle);

    bool sums_ok = result.round_weights.size() == 10;
    double worst = 0.0;
    for (const auto& per_round : result.round_weights)
        for (const auto& [m, w] : per_round) {
            double total = 0.0;
            for (const auto& [_, beta] : w.weight_by_client) total += beta;
            worst = std::max(worst, std::abs(total - 1.0));
            if (std::abs(total - 1.0) > 1e-9) sums_ok = false;
        }

    c.passed = exact && sums_ok;
    c.detail = std::string(exact ? "two-client case exact" : "two-client case WRONG") +
               ", max |sum(beta) - 1| = " + format_number(worst) + " over 10 rounds";
    return c;
}

// --------------------------------------------------------------------------
// 5. fedmfs at gamma = M matches upload_all bit for bit.

Criterion criterion_saturation() {
    Criterion c{"5 saturation equivalence (gamma = M vs upload_all)"};
    SynthSpec spec = default_paper_spec(5);
    spec.absence.clear();  // homogeneous federation
    const DatasetBundle bundle = generate(spec);

    ExperimentConfig fed = trend_config(Strategy::fedmfs, 5);
    fed.rounds = 5;
    fed.gamma = 6;
    ExperimentConfig all = fed;
    all.strategy = Strategy::upload_all;

    const ExperimentResult a = run_experiment(fed, bundle);
    const ExperimentResult b = run_experiment(all, bundle);

    bool identical = a.checkpoints.size() == b.checkpoints.size();
    for (std::size_t t = 0; identical && t < a.checkpoints.size(); ++t)
        identical = encode_global(a.checkpoints[t]) == encode_global(b.checkpoints[t]);
    c.passed = identical;
    c.detail = identical ? std::to_string(a.checkpoints.size()) +
                               " per-round checkpoints bit-identical"
                         : "checkpoints diverged";
    return c;
}

// --------------------------------------------------------------------------
// 6. Trade-off trend on the default federation.

Criterion criterion_tradeoff(const TrendRuns& runs) {
    Criterion c{"6 trade-off trend (fedmfs gamma=1 alpha=0.2/0.8 vs upload_all)"};
    std::vector<double> gaps, ratios;
    bool all_reached = true;
    for (std::size_t s = 0; s < runs.seeds.size(); ++s) {
        const ExperimentResult& fed = runs.fedmfs[s];
        const ExperimentResult& all = runs.upload_all[s];
        const double target = all.metrics.back().mean_accuracy;
        const double level = target - 0.05;
        gaps.push_back(target - fed.metrics.back().mean_accuracy);

        const auto fed_round = first_round_reaching(fed, level);
        const auto all_round = first_round_reaching(all, level);
        if (!fed_round || !all_round) {
            all_reached = false;
            ratios.push_back(1e9);
            continue;
        }
        const double fed_bytes = static_cast<double>(
            fed.metrics[*fed_round].cumulative_uploaded_bytes);
        const double all_bytes = static_cast<double>(
            all.metrics[*all_round].cumulative_uploaded_bytes);
        ratios.push_back(fed_bytes / all_bytes);
    }
    const double median_ratio = median3(ratios);
    c.passed = median_ratio <= 1.0 / 3.0;
    c.detail = "median upload ratio at the accuracy level = " + format_number(median_ratio) +
               ", median final-accuracy gap = " + format_number(median3(gaps)) +
               (all_reached ? "" : ", some seed never reached the level");
    return c;
}

// --------------------------------------------------------------------------
// 7. Baseline ordering against random-one selection.

Criterion criterion_baseline(const TrendRuns& runs) {
    Criterion c{"7 baseline ordering (fedmfs vs random_one at 25% budget)"};
    std::vector<double> diffs;
    std::string detail;
    for (std::size_t s = 0; s < runs.seeds.size(); ++s) {
        const std::uint64_t budget = runs.upload_all[s].ledger.total_uploaded() / 4;
        const double fed_acc = accuracy_at_budget(runs.fedmfs[s], budget);
        const double rnd_acc = accuracy_at_budget(runs.random_one[s], budget);
        diffs.push_back(fed_acc - rnd_acc);
        detail += (s ? ", " : "") + format_number(fed_acc) + " vs " + format_number(rnd_acc);
    }
    const double median_diff = median3(diffs);
    c.passed = median_diff >= 0.0;
    c.detail = "accuracy at budget per seed: " + detail +
               "; median difference = " + format_number(median_diff);
    return c;
}

// --------------------------------------------------------------------------
// 8. Heterogeneity safety across a sweep.

Criterion criterion_heterogeneity() {
    Criterion c{"8 heterogeneity safety (absent modalities never move)"};
    const DatasetBundle bundle = generate(default_paper_spec(1));
    std::map<ClientId, std::set<ModalityId>> held;
    for (const ClientDataset& ds : bundle.clients)
        for (const auto& [m, _] : ds.modalities) held[ds.client_id].insert(m);

    bool ok = true;
    std::string detail;
    std::size_t cells = 0;
    for (Strategy strategy :
         {Strategy::fedmfs, Strategy::upload_all, Strategy::random_one}) {
        std::vector<std::pair<std::int32_t, std::pair<double, double>>> grid;
        if (strategy == Strategy::fedmfs) {
            for (std::int32_t gamma : {1, 3, 6})
                for (const auto& alphas :
                     {std::pair{0.2, 0.8}, std::pair{1.0, 0.0}, std::pair{0.0, 1.0}})
                    grid.push_back({gamma, alphas});
        } else {
            grid.push_back({1, {0.2, 0.8}});
        }
        for (const auto& [gamma, alphas] : grid) {
            ExperimentConfig cfg = trend_config(strategy, 1);
            cfg.rounds = 3;
            cfg.gamma = gamma;
            cfg.alpha_s = alphas.first;
            cfg.alpha_c = alphas.second;
            const ExperimentResult result = run_experiment(cfg, bundle);
            ++cells;
            for (const SelectionLogRow& row : result.selection_log) {
                if (row.selected && !held.at(row.client_id).contains(row.modality_id)) {
                    ok = false;
                    detail = "client " + std::to_string(row.client_id) +
                             " uploaded absent modality " + std::to_string(row.modality_id);
                }
            }
            for (const auto& per_round : result.round_weights)
                for (const auto& [m, w] : per_round)
                    for (const auto& [client, _] : w.weight_by_client) {
                        if (!held.at(client).contains(m)) {
                            ok = false;
                            detail = "aggregation counted a client without modality " +
                                     std::to_string(m);
                        }
                        if ((m == 3 || m == 4) && client > 4) {
                            ok = false;
                            detail = "tactile denominator counted client " +
                                     std::to_string(client);
                        }
                    }
        }
    }
    c.passed = ok;
    c.detail = ok ? std::to_string(cells) + " sweep cells clean" : detail;
    return c;
}

// --------------------------------------------------------------------------
// 9. Determinism and scheduling independence.

Criterion criterion_determinism() {
    Criterion c{"9 determinism (reruns and parallel scheduling)"};
    const DatasetBundle bundle = generate(default_paper_spec(7));
    ExperimentConfig cfg = trend_config(Strategy::fedmfs, 7);
    cfg.rounds = 4;

    const ExperimentResult a = run_experiment(cfg, bundle);
    const ExperimentResult b = run_experiment(cfg, bundle);
    const ExperimentResult par = run_experiment(cfg, bundle, ExecutionMode::parallel);

    bool ok = metrics_to_csv(a.metrics) == metrics_to_csv(b.metrics) &&
              selection_to_csv(a.selection_log) == selection_to_csv(b.selection_log) &&
              attribution_to_csv(a.attribution) == attribution_to_csv(b.attribution);
    bool checkpoints_ok = a.checkpoints.size() == b.checkpoints.size();
    for (std::size_t t = 0; checkpoints_ok && t < a.checkpoints.size(); ++t)
        checkpoints_ok = encode_global(a.checkpoints[t]) == encode_global(b.checkpoints[t]);
    const bool parallel_ok =
        encode_global(a.final_global) == encode_global(par.final_global) &&
        metrics_to_csv(a.metrics) == metrics_to_csv(par.metrics);

    c.passed = ok && checkpoints_ok && parallel_ok;
    c.detail = std::string(ok ? "CSV outputs identical" : "CSV outputs DIFFER") + "; " +
               (checkpoints_ok ? "checkpoints identical" : "checkpoints DIFFER") + "; " +
               (parallel_ok ? "parallel == sequential" : "parallel DIVERGED");
    return c;
}

}  // namespace

int main() {
    const auto suite_start = std::chrono::steady_clock::now();
    std::vector<Criterion> results;

    results.push_back(criterion_axioms());
    results.push_back(criterion_oracle());
    results.push_back(criterion_selection_extremes());
    results.push_back(criterion_aggregation());
    results.push_back(criterion_saturation());

    const auto trend_start = std::chrono::steady_clock::now();
    const TrendRuns runs = run_trend_experiments();
    Criterion tradeoff = criterion_tradeoff(runs);
    const double trend_elapsed = seconds_since(trend_start);
    tradeoff.detail += ", runtime " + format_number(trend_elapsed) + "s";
    if (trend_elapsed >= 120.0) {
        tradeoff.passed = false;
        tradeoff.detail += " (over the 2 minute limit)";
    }
    results.push_back(tradeoff);
    results.push_back(criterion_baseline(runs));
    results.push_back(criterion_heterogeneity());
    results.push_back(criterion_determinism());

    bool all_ok = true;
    for (const Criterion& c : results) {
        std::cout << (c.passed ? "PASS" : "FAIL") << " criterion " << c.name;
        if (!c.detail.empty()) std::cout << " — " << c.detail;
        std::cout << '\n';
        all_ok = all_ok && c.passed;
    }
    std::cout << (all_ok ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << " in "
              << format_number(seconds_since(suite_start)) << "s\n";
    return all_ok ? 0 : 1;
}
