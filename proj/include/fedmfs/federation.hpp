#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/forest.hpp"
#include "fedmfs/io.hpp"
#include "fedmfs/mlp.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/selection.hpp"
#include "fedmfs/shapley.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// Purpose tags for per-client random streams. Every source of randomness
/// has its own stream so strategies that skip a step (e.g. upload_all never
/// computes Shapley values) still replay identical training schedules.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t ensemble = 4;
inline constexpr std::uint64_t shapley = 5;
inline constexpr std::uint64_t random_pick = 6;
inline constexpr std::uint64_t initial_eval = 7;
}  // namespace stream

inline std::uint64_t client_base_seed(std::uint64_t experiment_seed, ClientId client) {
    return experiment_seed ^ static_cast<std::uint64_t>(client);
}

/// Everything a client owns between rounds. The 20% evaluation split is
/// fixed once from the client's seed and reused for every round.
struct ClientState {
    ClientId client_id = 0;
    ClientDataset dataset;
    std::map<ModalityId, ModalityModelParams> local_models;
    EnsembleModel ensemble;
    std::uint64_t rng_seed = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> eval_indices;
};

/// Per-modality FedAvg weights for one aggregation step.
struct AggregationWeights {
    std::map<ClientId, double> weight_by_client;
    std::int32_t contributing_count = 0;
};

struct AggregationOutcome {
    GlobalState state;
    std::map<ModalityId, AggregationWeights> weights;
};

struct ClientRoundOutput {
    std::vector<UploadPacket> packets;
    ClientState state;
    std::optional<ShapleyReport> report;
    std::optional<SelectionResult> selection;
    std::vector<SelectionLogRow> log_rows;
};

struct DeployOutcome {
    ClientState state;
    double accuracy = 0.0;
};

enum class ExecutionMode { sequential, parallel };

namespace detail {

inline std::vector<std::int32_t> gather_labels(const std::vector<std::int32_t>& labels,
                                               std::span<const std::size_t> indices) {
    std::vector<std::int32_t> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels[i]);
    return out;
}

inline void deploy_available_globals(ClientState& state, const GlobalState& global) {
    for (auto& [m, params] : state.local_models) {
        auto it = global.global_models.find(m);
        if (it == global.global_models.end()) continue;
        if (!(it->second.arch == params.arch))
            throw ArchMismatch("global arch for modality " + std::to_string(m) +
                               " differs from client " + std::to_string(state.client_id));
        params = it->second;
        params.modality_id = m;
    }
}

inline EnsembleModel fit_stage_ensemble(const ClientState& state, const PredictionMatrix& preds,
                                        std::span<const std::int32_t> labels,
                                        const ExperimentConfig& cfg, std::int32_t round) {
    ForestConfig fc{cfg.forest_trees, cfg.forest_depth,
                    derive_seed(state.rng_seed, stream::ensemble,
                                static_cast<std::uint64_t>(round))};
    return train_ensemble(preds, labels, state.dataset.num_classes, cfg.ensemble, fc);
}

inline double evaluate_ensemble(const ClientState& state) {
    const PredictionMatrix preds =
        build_prediction_matrix(state.local_models, state.dataset, state.eval_indices);
    if (preds.rows() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < preds.rows(); ++r) {
        const std::int32_t fused = ensemble_predict(state.ensemble, preds.entries.row(r));
        if (fused == state.dataset.labels[state.eval_indices[r]]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.rows());
}

}  // namespace detail

/// Initializes client states from a dataset bundle: derived per-client
/// seeds, seeded 80/20 train/eval split, and fresh modality models with
/// archs taken from the bundle manifest.
inline std::vector<ClientState> setup_clients(const DatasetBundle& bundle,
                                              const ExperimentConfig& cfg) {
    std::vector<ClientState> states;
    states.reserve(bundle.clients.size());
    for (const ClientDataset& ds : bundle.clients) {
        ClientState st;
        st.client_id = ds.client_id;
        st.dataset = ds;
        st.rng_seed = client_base_seed(cfg.seed, ds.client_id);

        const std::size_t n = ds.labels.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng split_rng(derive_seed(st.rng_seed, stream::split));
        split_rng.shuffle(order);
        if (n <= 1) {
            st.train_indices = order;
            st.eval_indices = order;
        } else {
            auto eval_count = static_cast<std::size_t>(
                std::llround(0.2 * static_cast<double>(n)));
            eval_count = std::clamp<std::size_t>(eval_count, 1, n - 1);
            st.eval_indices.assign(order.begin(), order.begin() + eval_count);
            st.train_indices.assign(order.begin() + eval_count, order.end());
        }
        std::sort(st.train_indices.begin(), st.train_indices.end());
        std::sort(st.eval_indices.begin(), st.eval_indices.end());

        for (const auto& [m, data] : ds.modalities) {
            const Arch arch = bundle.arch_for(m);
            if (data.feature_dim() != static_cast<std::size_t>(arch.input_dim))
                throw DimensionMismatch("client " + std::to_string(ds.client_id) +
                                        " modality " + std::to_string(m) +
                                        " feature dim differs from manifest");
            // Common per-modality initialization across clients, as in
            // FedAvg: everyone holding modality m starts from the same
            // theta_m,0.
            st.local_models[m] =
                init_modality_params(m, arch, derive_seed(cfg.seed, stream::init,
                                                          static_cast<std::uint64_t>(m)));
        }
        states.push_back(std::move(st));
    }
    return states;
}

/// One client's share of a round: deploy available globals, run E local
/// epochs per modality, fit the Stage #1 ensemble, then pick the upload set
/// according to the configured strategy.
inline ClientRoundOutput client_round(ClientState state, const GlobalState& global,
                                      const ExperimentConfig& cfg) {
    const std::int32_t round = global.round_index;
    detail::deploy_available_globals(state, global);

    for (auto& [m, params] : state.local_models) {
        const TrainingConfig tc{cfg.local_epochs, static_cast<float>(cfg.learning_rate),
                                cfg.batch_size,
                                derive_seed(state.rng_seed, stream::train,
                                            static_cast<std::uint64_t>(round),
                                            static_cast<std::uint64_t>(m))};
        params = train_modality_model(params, state.dataset.modalities.at(m).features,
                                      state.dataset.labels, tc, state.train_indices);
    }

    const PredictionMatrix preds =
        build_prediction_matrix(state.local_models, state.dataset, state.train_indices);
    const std::vector<std::int32_t> train_labels =
        detail::gather_labels(state.dataset.labels, state.train_indices);
    state.ensemble = detail::fit_stage_ensemble(state, preds, train_labels, cfg, round);

    std::map<ModalityId, std::uint64_t> sizes;
    for (const auto& [m, params] : state.local_models) sizes[m] = params.size_bytes();

    ClientRoundOutput out;
    std::vector<ModalityId> selected;
    switch (cfg.strategy) {
        case Strategy::fedmfs: {
            out.report = modality_impact(state.ensemble, preds, train_labels,
                                         cfg.shapley_subsample,
                                         derive_seed(state.rng_seed, stream::shapley,
                                                     static_cast<std::uint64_t>(round)));
            out.selection = compute_priorities(
                *out.report, sizes, SelectionConfig{cfg.gamma, cfg.alpha_s, cfg.alpha_c});
            selected = out.selection->selected;
            break;
        }
        case Strategy::upload_all:
            for (const auto& [m, _] : state.local_models) selected.push_back(m);
            break;
        case Strategy::random_one: {
            std::vector<ModalityId> held;
            for (const auto& [m, _] : state.local_models) held.push_back(m);
            Rng pick(derive_seed(state.rng_seed, stream::random_pick,
                                 static_cast<std::uint64_t>(round)));
            selected.push_back(held[pick.uniform_below(held.size())]);
            break;
        }
        case Strategy::local_only:
            break;
    }

    for (ModalityId m : selected) {
        UploadPacket packet;
        packet.client_id = state.client_id;
        packet.modality_id = m;
        packet.params = state.local_models.at(m);
        packet.sample_count =
            static_cast<std::int64_t>(state.dataset.modalities.at(m).sample_count());
        out.packets.push_back(std::move(packet));
    }

    for (const auto& [m, size] : sizes) {
        SelectionLogRow row;
        row.round = round;
        row.client_id = state.client_id;
        row.modality_id = m;
        row.size_bytes = size;
        if (out.report) row.raw_shapley = out.report->per_modality_mean_abs.at(m);
        if (out.selection) {
            row.norm_shapley = out.selection->normalized_shapley.at(m);
            row.norm_size = out.selection->normalized_size.at(m);
            row.priority = out.selection->priorities.at(m);
        }
        row.selected = std::find(selected.begin(), selected.end(), m) != selected.end();
        out.log_rows.push_back(row);
    }

    out.state = std::move(state);
    return out;
}

/// Per-modality sample-count-weighted averaging. Modalities with no packets
/// this round keep the previous global parameters; the round index
/// advances by one.
inline AggregationOutcome server_aggregate(std::span<const UploadPacket> packets,
                                           const GlobalState& prev) {
    AggregationOutcome out;
    out.state.global_models = prev.global_models;
    out.state.round_index = prev.round_index + 1;

    std::map<ModalityId, std::vector<const UploadPacket*>> by_modality;
    for (const UploadPacket& p : packets) {
        if (p.sample_count <= 0)
            throw ZeroSampleCount("client " + std::to_string(p.client_id) +
                                  " uploaded modality " + std::to_string(p.modality_id) +
                                  " with zero samples");
        if (p.params.modality_id != p.modality_id)
            throw KeyMismatch("packet modality id does not match its params");
        if (p.params.weights.size() != p.params.arch.param_count())
            throw DimensionMismatch("packet weight count does not match arch");
        by_modality[p.modality_id].push_back(&p);
    }

    for (auto& [m, group] : by_modality) {
        std::sort(group.begin(), group.end(),
                  [](const UploadPacket* a, const UploadPacket* b) {
                      return a->client_id < b->client_id;
                  });
        const Arch arch = group.front()->params.arch;
        for (const UploadPacket* p : group)
            if (!(p->params.arch == arch))
                throw ArchMismatch("conflicting archs uploaded for modality " +
                                   std::to_string(m));
        auto prev_it = prev.global_models.find(m);
        if (prev_it != prev.global_models.end() && !(prev_it->second.arch == arch))
            throw ArchMismatch("uploaded arch for modality " + std::to_string(m) +
                               " differs from the global model");

        std::int64_t denom = 0;
        for (const UploadPacket* p : group) denom += p->sample_count;

        AggregationWeights weights;
        weights.contributing_count = static_cast<std::int32_t>(group.size());
        std::vector<double> acc(arch.param_count(), 0.0);
        for (const UploadPacket* p : group) {
            const double beta =
                static_cast<double>(p->sample_count) / static_cast<double>(denom);
            weights.weight_by_client[p->client_id] = beta;
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += beta * static_cast<double>(p->params.weights[i]);
        }
        ModalityModelParams merged;
        merged.modality_id = m;
        merged.arch = arch;
        merged.weights.resize(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i)
            merged.weights[i] = static_cast<float>(acc[i]);
        out.state.global_models[m] = std::move(merged);
        out.weights[m] = std::move(weights);
    }
    return out;
}

/// Deploys the freshly aggregated globals, refits the ensemble (Stage #2)
/// on recomputed predictions, and scores the evaluation split. Uses the
/// ensemble stream of the round that just finished, so a refit on identical
/// inputs reproduces the Stage #1 ensemble.
inline DeployOutcome deploy_and_stage2(ClientState state, const GlobalState& global,
                                       const ExperimentConfig& cfg) {
    const std::int32_t round = std::max(global.round_index - 1, 0);
    detail::deploy_available_globals(state, global);
    const PredictionMatrix preds =
        build_prediction_matrix(state.local_models, state.dataset, state.train_indices);
    const std::vector<std::int32_t> train_labels =
        detail::gather_labels(state.dataset.labels, state.train_indices);
    state.ensemble = detail::fit_stage_ensemble(state, preds, train_labels, cfg, round);

    DeployOutcome out;
    out.accuracy = detail::evaluate_ensemble(state);
    out.state = std::move(state);
    return out;
}

struct ExperimentResult {
    std::vector<RoundMetrics> metrics;
    CommLedger ledger;
    std::vector<SelectionLogRow> selection_log;
    std::vector<AttributionRow> attribution;
    std::vector<std::map<ModalityId, AggregationWeights>> round_weights;
    std::vector<GlobalState> checkpoints;  // global state after each round
    double initial_accuracy = 0.0;
    GlobalState final_global;
};

/// Runs the full T-round protocol over in-memory client datasets. Fully
/// deterministic given cfg.seed; sequential and parallel execution produce
/// identical results because all cross-client reductions are ordered by
/// client id.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetBundle& bundle,
                                       ExecutionMode mode = ExecutionMode::sequential) {
    {
        const std::vector<ConfigError> errors = validate_config(cfg);
        if (!errors.empty()) {
            std::string msg = "invalid config:";
            for (const ConfigError& e : errors) msg += " [" + e.field + "] " + e.message + ";";
            throw Error(msg);
        }
    }
    if (bundle.clients.empty()) throw EmptyInput("no clients in dataset");

    std::vector<ClientState> states = setup_clients(bundle, cfg);
    const std::size_t num_clients = states.size();

    ExperimentResult result;

    // Accuracy of freshly initialized models, used as the degenerate
    // "budget smaller than one round" baseline.
    {
        double total = 0.0;
        for (ClientState& st : states) {
            const PredictionMatrix preds =
                build_prediction_matrix(st.local_models, st.dataset, st.train_indices);
            const std::vector<std::int32_t> train_labels =
                detail::gather_labels(st.dataset.labels, st.train_indices);
            ForestConfig fc{cfg.forest_trees, cfg.forest_depth,
                            derive_seed(st.rng_seed, stream::initial_eval)};
            ClientState scored = st;
            scored.ensemble = train_ensemble(preds, train_labels, st.dataset.num_classes,
                                             cfg.ensemble, fc);
            total += detail::evaluate_ensemble(scored);
        }
        result.initial_accuracy = total / static_cast<double>(num_clients);
    }

    GlobalState global;
    std::uint64_t cumulative_uploaded = 0;

    for (std::int32_t round = 0; round < cfg.rounds; ++round) {
        std::vector<ClientRoundOutput> outputs(num_clients);
        try {
            if (mode == ExecutionMode::parallel) {
                std::vector<std::future<ClientRoundOutput>> futures;
                futures.reserve(num_clients);
                for (std::size_t i = 0; i < num_clients; ++i) {
                    futures.push_back(std::async(
                        std::launch::async,
                        [st = std::move(states[i]), &global, &cfg]() mutable {
                            return client_round(std::move(st), global, cfg);
                        }));
                }
                for (std::size_t i = 0; i < num_clients; ++i) outputs[i] = futures[i].get();
            } else {
                for (std::size_t i = 0; i < num_clients; ++i)
                    outputs[i] = client_round(std::move(states[i]), global, cfg);
            }
        } catch (const Error& e) {
            throw Error("round " + std::to_string(round) + ": " + e.what());
        }

        std::vector<UploadPacket> packets;
        std::uint64_t uploaded = 0;
        for (std::size_t i = 0; i < num_clients; ++i) {
            states[i] = std::move(outputs[i].state);
            for (UploadPacket& p : outputs[i].packets) {
                uploaded += p.params.size_bytes();
                packets.push_back(std::move(p));
            }
            for (const SelectionLogRow& row : outputs[i].log_rows)
                result.selection_log.push_back(row);
            if (outputs[i].report) {
                for (const auto& [m, value] : outputs[i].report->per_modality_mean_abs)
                    result.attribution.push_back(
                        {round, states[i].client_id, m, value});
            }
        }

        AggregationOutcome agg;
        try {
            agg = server_aggregate(packets, global);
        } catch (const Error& e) {
            throw Error("round " + std::to_string(round) + ": " + e.what());
        }
        global = std::move(agg.state);

        std::uint64_t downloaded = 0;
        for (const ClientState& st : states)
            for (const auto& [m, _] : st.local_models) {
                auto it = global.global_models.find(m);
                if (it != global.global_models.end()) downloaded += it->second.size_bytes();
            }

        std::vector<double> accuracies(num_clients, 0.0);
        try {
            if (mode == ExecutionMode::parallel) {
                std::vector<std::future<DeployOutcome>> futures;
                futures.reserve(num_clients);
                for (std::size_t i = 0; i < num_clients; ++i) {
                    futures.push_back(std::async(
                        std::launch::async,
                        [st = std::move(states[i]), &global, &cfg]() mutable {
                            return deploy_and_stage2(std::move(st), global, cfg);
                        }));
                }
                for (std::size_t i = 0; i < num_clients; ++i) {
                    DeployOutcome deployed = futures[i].get();
                    states[i] = std::move(deployed.state);
                    accuracies[i] = deployed.accuracy;
                }
            } else {
                for (std::size_t i = 0; i < num_clients; ++i) {
                    DeployOutcome deployed =
                        deploy_and_stage2(std::move(states[i]), global, cfg);
                    states[i] = std::move(deployed.state);
                    accuracies[i] = deployed.accuracy;
                }
            }
        } catch (const Error& e) {
            throw Error("round " + std::to_string(round) + ": " + e.what());
        }

        cumulative_uploaded += uploaded;
        RoundMetrics metrics;
        metrics.round = round;
        metrics.mean_accuracy = 0.0;
        metrics.min_accuracy = accuracies.front();
        metrics.max_accuracy = accuracies.front();
        for (double a : accuracies) {
            metrics.mean_accuracy += a;
            metrics.min_accuracy = std::min(metrics.min_accuracy, a);
            metrics.max_accuracy = std::max(metrics.max_accuracy, a);
        }
        metrics.mean_accuracy /= static_cast<double>(num_clients);
        metrics.uploaded_bytes = uploaded;
        metrics.downloaded_bytes = downloaded;
        metrics.cumulative_uploaded_bytes = cumulative_uploaded;
        result.metrics.push_back(metrics);
        result.ledger.rounds.push_back({round, uploaded, downloaded, cumulative_uploaded});
        result.round_weights.push_back(agg.weights);
        result.checkpoints.push_back(global);
    }

    result.final_global = std::move(global);
    return result;
}

/// Convenience overload: loads the dataset named by cfg.dataset_path.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       ExecutionMode mode = ExecutionMode::sequential) {
    if (cfg.dataset_path.empty()) throw Error("config has no dataset_path");
    return run_experiment(cfg, load_dataset_dir(cfg.dataset_path), mode);
}

}  // namespace fedmfs
