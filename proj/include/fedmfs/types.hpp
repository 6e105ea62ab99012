#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/matrix.hpp"

namespace fedmfs {

using ModalityId = std::int32_t;
using ClientId = std::int32_t;

/// Upload strategy executed by each client every round.
enum class Strategy { fedmfs, upload_all, random_one, local_only };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::fedmfs: return "fedmfs";
        case Strategy::upload_all: return "upload_all";
        case Strategy::random_one: return "random_one";
        case Strategy::local_only: return "local_only";
    }
    return "unknown";
}

inline Strategy parse_strategy(const std::string& name) {
    if (name == "fedmfs") return Strategy::fedmfs;
    if (name == "upload_all") return Strategy::upload_all;
    if (name == "random_one") return Strategy::random_one;
    if (name == "local_only") return Strategy::local_only;
    throw ParseError("unknown strategy: " + name);
}

enum class EnsembleKind { random_forest, majority_vote };

inline const char* ensemble_kind_name(EnsembleKind k) {
    return k == EnsembleKind::random_forest ? "random_forest" : "majority_vote";
}

inline EnsembleKind parse_ensemble_kind(const std::string& name) {
    if (name == "random_forest") return EnsembleKind::random_forest;
    if (name == "majority_vote") return EnsembleKind::majority_vote;
    throw ParseError("unknown ensemble kind: " + name);
}

/// One-hidden-layer classifier shape. Weight layout is
/// [W1 (input x hidden), b1 (hidden), W2 (hidden x classes), b2 (classes)].
struct Arch {
    std::int32_t input_dim = 0;
    std::int32_t hidden_dim = 0;
    std::int32_t num_classes = 0;

    std::size_t param_count() const {
        const auto d = static_cast<std::size_t>(input_dim);
        const auto h = static_cast<std::size_t>(hidden_dim);
        const auto c = static_cast<std::size_t>(num_classes);
        return d * h + h + h * c + c;
    }

    friend bool operator==(const Arch&, const Arch&) = default;
};

/// Parameters of one modality model. Weights are 32-bit reals; the wire
/// size of the model is exactly 4 bytes per parameter.
struct ModalityModelParams {
    ModalityId modality_id = 0;
    Arch arch;
    std::vector<float> weights;

    std::uint64_t size_bytes() const { return 4 * static_cast<std::uint64_t>(weights.size()); }

    friend bool operator==(const ModalityModelParams&, const ModalityModelParams&) = default;
};

/// Features for one modality on one client. Rows are samples.
struct ModalityData {
    ModalityId modality_id = 0;
    FloatMatrix features;

    std::size_t sample_count() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
};

/// A client's multimodal samples. All modalities cover the same samples;
/// the key set of `modalities` is the client's modality subset.
struct ClientDataset {
    ClientId client_id = 0;
    std::map<ModalityId, ModalityData> modalities;
    std::vector<std::int32_t> labels;
    std::int32_t num_classes = 0;

    std::size_t sample_count() const { return labels.size(); }
    std::size_t modality_count() const { return modalities.size(); }
};

/// Returns all invariant violations; empty means the dataset is valid.
inline std::vector<std::string> validate_dataset(const ClientDataset& ds) {
    std::vector<std::string> issues;
    const std::string who = "client " + std::to_string(ds.client_id);
    if (ds.modalities.empty()) issues.push_back(who + ": no modalities");
    if (ds.num_classes <= 0) issues.push_back(who + ": num_classes must be positive");
    for (const auto& [m, data] : ds.modalities) {
        if (data.modality_id != m)
            issues.push_back(who + ": modality key/id mismatch for " + std::to_string(m));
        if (data.sample_count() != ds.labels.size())
            issues.push_back(who + ": modality " + std::to_string(m) +
                             " row count differs from label count");
        for (float v : data.features.data()) {
            if (!std::isfinite(v)) {
                issues.push_back(who + ": modality " + std::to_string(m) +
                                 " contains non-finite values");
                break;
            }
        }
    }
    for (std::int32_t y : ds.labels) {
        if (y < 0 || y >= ds.num_classes) {
            issues.push_back(who + ": label out of range");
            break;
        }
    }
    return issues;
}

/// Predicted class indices per sample (rows) and per modality (columns,
/// strictly ascending ModalityId).
struct PredictionMatrix {
    std::vector<ModalityId> column_modalities;
    DenseMatrix<std::int32_t> entries;

    std::size_t rows() const { return entries.rows(); }
    std::size_t cols() const { return entries.cols(); }

    std::size_t column_index(ModalityId m) const {
        for (std::size_t i = 0; i < column_modalities.size(); ++i)
            if (column_modalities[i] == m) return i;
        throw KeyMismatch("modality " + std::to_string(m) + " not a prediction column");
    }
};

/// Per-modality modality-impact report.
struct ShapleyReport {
    std::map<ModalityId, double> per_modality_mean_abs;
    std::optional<DenseMatrix<double>> per_sample;  // raw signed values, one row per drawn sample
    std::vector<std::size_t> subsample_indices;
};

/// Outcome of priority scoring and top-gamma selection for one client.
struct SelectionResult {
    std::map<ModalityId, double> priorities;
    std::vector<ModalityId> selected;  // ascending ModalityId
    std::map<ModalityId, double> normalized_shapley;
    std::map<ModalityId, double> normalized_size;
};

struct UploadPacket {
    ClientId client_id = 0;
    ModalityId modality_id = 0;
    ModalityModelParams params;
    std::int64_t sample_count = 0;
};

/// Server-side model store. One entry per modality seen so far; the arch
/// of a modality never changes across rounds.
struct GlobalState {
    std::map<ModalityId, ModalityModelParams> global_models;
    std::int32_t round_index = 0;
};

struct RoundMetrics {
    std::int32_t round = 0;
    double mean_accuracy = 0.0;
    double min_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::uint64_t uploaded_bytes = 0;
    std::uint64_t downloaded_bytes = 0;
    std::uint64_t cumulative_uploaded_bytes = 0;
};

/// Exact uplink/downlink byte accounting per round.
struct CommLedger {
    struct Entry {
        std::int32_t round = 0;
        std::uint64_t uploaded_bytes = 0;
        std::uint64_t downloaded_bytes = 0;
        std::uint64_t cumulative_uploaded_bytes = 0;
    };
    std::vector<Entry> rounds;

    std::uint64_t total_uploaded() const {
        return rounds.empty() ? 0 : rounds.back().cumulative_uploaded_bytes;
    }
};

struct ExperimentConfig {
    std::int32_t rounds = 100;
    std::int32_t local_epochs = 5;
    double learning_rate = 0.1;
    std::int32_t batch_size = 32;
    std::int32_t gamma = 1;
    double alpha_s = 0.2;
    double alpha_c = 0.8;
    std::int32_t shapley_subsample = 50;
    Strategy strategy = Strategy::fedmfs;
    std::uint64_t seed = 42;
    std::filesystem::path dataset_path;

    // Ensemble hyperparameters; defaults match the reference experiments.
    EnsembleKind ensemble = EnsembleKind::random_forest;
    std::int32_t forest_trees = 25;
    std::int32_t forest_depth = 4;
};

struct ConfigError {
    enum class Code {
        AlphaSumViolation,
        NonPositiveRounds,
        MissingDataset,
        InvalidField,
    };
    Code code;
    std::string field;
    std::string message;
};

/// Checks every config invariant and reports the complete violation list;
/// an empty result means the config is valid as-is.
inline std::vector<ConfigError> validate_config(const ExperimentConfig& cfg) {
    using Code = ConfigError::Code;
    std::vector<ConfigError> errors;
    if (cfg.rounds <= 0)
        errors.push_back({Code::NonPositiveRounds, "rounds", "rounds must be >= 1"});
    if (cfg.local_epochs <= 0)
        errors.push_back({Code::InvalidField, "local_epochs", "local_epochs must be >= 1"});
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
        errors.push_back({Code::InvalidField, "learning_rate", "learning_rate must be positive"});
    if (cfg.batch_size <= 0)
        errors.push_back({Code::InvalidField, "batch_size", "batch_size must be >= 1"});
    if (cfg.gamma < 1)
        errors.push_back({Code::InvalidField, "gamma", "gamma must be >= 1"});
    if (cfg.alpha_s < 0.0 || cfg.alpha_s > 1.0)
        errors.push_back({Code::InvalidField, "alpha_s", "alpha_s must be in [0,1]"});
    if (cfg.alpha_c < 0.0 || cfg.alpha_c > 1.0)
        errors.push_back({Code::InvalidField, "alpha_c", "alpha_c must be in [0,1]"});
    if (std::abs(cfg.alpha_s + cfg.alpha_c - 1.0) > 1e-12)
        errors.push_back({Code::AlphaSumViolation, "alpha_s",
                          "alpha_s + alpha_c must equal 1"});
    if (cfg.shapley_subsample <= 0)
        errors.push_back({Code::InvalidField, "shapley_subsample",
                          "shapley_subsample must be >= 1"});
    if (cfg.forest_trees <= 0)
        errors.push_back({Code::InvalidField, "forest_trees", "forest_trees must be >= 1"});
    if (cfg.forest_depth < 0)
        errors.push_back({Code::InvalidField, "forest_depth", "forest_depth must be >= 0"});
    if (!cfg.dataset_path.empty() && !std::filesystem::exists(cfg.dataset_path))
        errors.push_back({Code::MissingDataset, "dataset_path",
                          "dataset directory not found: " + cfg.dataset_path.string()});
    return errors;
}

}  // namespace fedmfs
