#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/io.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// One synthetic sensor stream: class centers are seeded unit-norm vectors,
/// samples are informativeness * center + noise_sigma * standard normal.
struct ModalitySpec {
    ModalityId id = 0;
    std::string name;
    std::int32_t feature_dim = 1;
    std::int32_t hidden_dim = 16;
    double informativeness = 1.0;
    double noise_sigma = 1.0;
};

struct SynthSpec {
    std::int32_t num_clients = 8;
    std::int32_t num_classes = 5;
    std::int32_t samples_per_client = 150;
    std::vector<ModalitySpec> modalities;
    std::map<ClientId, std::set<ModalityId>> absence;
    std::uint64_t seed = 1;
};

inline void validate_spec(const SynthSpec& spec) {
    if (spec.num_clients < 1) throw InvalidSpec("num_clients must be >= 1");
    if (spec.num_classes < 2) throw InvalidSpec("num_classes must be >= 2");
    if (spec.samples_per_client < 1) throw InvalidSpec("samples_per_client must be >= 1");
    if (spec.modalities.empty()) throw InvalidSpec("at least one modality is required");
    std::set<ModalityId> ids;
    for (const ModalitySpec& m : spec.modalities) {
        if (m.feature_dim < 1) throw InvalidSpec("feature_dim must be >= 1");
        if (m.hidden_dim < 1) throw InvalidSpec("hidden_dim must be >= 1");
        if (m.informativeness < 0.0 || m.informativeness > 1.0)
            throw InvalidSpec("informativeness must be in [0,1]");
        if (!(m.noise_sigma > 0.0)) throw InvalidSpec("noise_sigma must be > 0");
        if (!ids.insert(m.id).second) throw InvalidSpec("duplicate modality id");
    }
    for (const auto& [client, missing] : spec.absence) {
        std::size_t removed = 0;
        for (ModalityId m : missing) {
            if (!ids.contains(m))
                throw InvalidSpec("absence references unknown modality " + std::to_string(m));
            ++removed;
        }
        if (removed >= spec.modalities.size())
            throw InvalidSpec("client " + std::to_string(client) +
                              " would be left without modalities");
    }
}

/// Default federation shaped like the reference setup: 8 clients, 5
/// classes, 6 modalities with feature dims (2, 8, 8, 64, 64, 66), model
/// sizes spread roughly 1 : 1.1 : 15 : 1.9, and the two large "tactile"
/// modalities missing on clients 5-8.
inline SynthSpec default_paper_spec(std::uint64_t seed = 1) {
    SynthSpec spec;
    spec.num_clients = 8;
    spec.num_classes = 5;
    spec.samples_per_client = 400;
    spec.seed = seed;
    spec.modalities = {
        {0, "eye", 2, 14, 0.50, 0.50},
        {1, "myo_left", 8, 9, 0.50, 0.50},
        {2, "myo_right", 8, 9, 0.95, 0.35},
        {3, "tactile_left", 64, 25, 0.90, 0.25},
        {4, "tactile_right", 64, 25, 0.90, 0.25},
        {5, "xsens", 66, 3, 0.70, 0.50},
    };
    for (ClientId k = 5; k <= 8; ++k) spec.absence[k] = {3, 4};
    return spec;
}

namespace detail {

inline std::vector<double> class_center(std::uint64_t seed, ModalityId m, std::int32_t cls,
                                        std::int32_t dim) {
    Rng rng(derive_seed(seed, 0xCE47E25Bu /*centers*/, static_cast<std::uint64_t>(m),
                        static_cast<std::uint64_t>(cls)));
    std::vector<double> mu(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    for (double& v : mu) {
        v = rng.normal();
        norm_sq += v * v;
    }
    const double inv_norm = 1.0 / std::sqrt(std::max(norm_sq, 1e-30));
    for (double& v : mu) v *= inv_norm;
    return mu;
}

}  // namespace detail

/// Deterministic synthetic federation. Clients are numbered 1..K; clients
/// named in `absence` lack those modalities entirely.
inline DatasetBundle generate(const SynthSpec& spec) {
    validate_spec(spec);

    DatasetBundle bundle;
    bundle.num_classes = spec.num_classes;
    for (const ModalitySpec& m : spec.modalities) {
        ModalityMeta meta;
        meta.id = m.id;
        meta.name = m.name.empty() ? "modality_" + std::to_string(m.id) : m.name;
        meta.feature_dim = m.feature_dim;
        meta.hidden_dim = m.hidden_dim;
        bundle.modalities[m.id] = meta;
    }

    std::map<ModalityId, std::vector<std::vector<double>>> centers;
    for (const ModalitySpec& m : spec.modalities) {
        auto& per_class = centers[m.id];
        for (std::int32_t c = 0; c < spec.num_classes; ++c)
            per_class.push_back(detail::class_center(spec.seed, m.id, c, m.feature_dim));
    }

    for (ClientId k = 1; k <= spec.num_clients; ++k) {
        ClientDataset ds;
        ds.client_id = k;
        ds.num_classes = spec.num_classes;

        Rng label_rng(derive_seed(spec.seed, 0x1ABE15u /*labels*/, static_cast<std::uint64_t>(k)));
        ds.labels.resize(static_cast<std::size_t>(spec.samples_per_client));
        for (std::int32_t& y : ds.labels)
            y = static_cast<std::int32_t>(label_rng.uniform_below(
                static_cast<std::uint64_t>(spec.num_classes)));

        const auto absent_it = spec.absence.find(k);
        for (const ModalitySpec& m : spec.modalities) {
            if (absent_it != spec.absence.end() && absent_it->second.contains(m.id)) continue;
            ModalityData data;
            data.modality_id = m.id;
            data.features = FloatMatrix(ds.labels.size(), static_cast<std::size_t>(m.feature_dim));
            Rng feat_rng(derive_seed(spec.seed, 0xFEA7u /*features*/,
                                     static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(m.id)));
            for (std::size_t r = 0; r < ds.labels.size(); ++r) {
                const auto& mu = centers[m.id][static_cast<std::size_t>(ds.labels[r])];
                for (std::size_t c = 0; c < mu.size(); ++c) {
                    const double v =
                        m.informativeness * mu[c] + m.noise_sigma * feat_rng.normal();
                    data.features(r, c) = static_cast<float>(v);
                }
            }
            ds.modalities[m.id] = std::move(data);
        }
        bundle.clients.push_back(std::move(ds));
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Spec file (JSON) support for the gen-data CLI.

inline json synth_spec_to_json(const SynthSpec& spec) {
    json j;
    j["num_clients"] = spec.num_clients;
    j["num_classes"] = spec.num_classes;
    j["samples_per_client"] = spec.samples_per_client;
    j["seed"] = spec.seed;
    j["modalities"] = json::array();
    for (const ModalitySpec& m : spec.modalities)
        j["modalities"].push_back({{"id", m.id},
                                   {"name", m.name},
                                   {"feature_dim", m.feature_dim},
                                   {"hidden_dim", m.hidden_dim},
                                   {"informativeness", m.informativeness},
                                   {"noise_sigma", m.noise_sigma}});
    json absence = json::object();
    for (const auto& [client, missing] : spec.absence)
        absence[std::to_string(client)] = missing;
    j["absence"] = absence;
    return j;
}

inline SynthSpec synth_spec_from_json(const json& j) {
    try {
        SynthSpec spec;
        spec.num_clients = j.value("num_clients", spec.num_clients);
        spec.num_classes = j.value("num_classes", spec.num_classes);
        spec.samples_per_client = j.value("samples_per_client", spec.samples_per_client);
        spec.seed = j.value("seed", spec.seed);
        if (j.contains("modalities")) {
            spec.modalities.clear();
            for (const json& jm : j.at("modalities")) {
                ModalitySpec m;
                m.id = jm.at("id");
                m.name = jm.value("name", std::string{});
                m.feature_dim = jm.at("feature_dim");
                m.hidden_dim = jm.value("hidden_dim", m.hidden_dim);
                m.informativeness = jm.value("informativeness", m.informativeness);
                m.noise_sigma = jm.value("noise_sigma", m.noise_sigma);
                spec.modalities.push_back(std::move(m));
            }
        }
        if (j.contains("absence")) {
            for (const auto& [key, value] : j.at("absence").items()) {
                const ClientId client = parse_number<ClientId>(key);
                std::set<ModalityId>& missing = spec.absence[client];
                for (const json& jm : value) missing.insert(jm.get<ModalityId>());
            }
        }
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad synth spec: ") + e.what());
    }
}

inline SynthSpec load_synth_spec(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("cannot parse spec " + path.string() + ": " + e.what());
    }
    return synth_spec_from_json(j);
}

}  // namespace fedmfs
