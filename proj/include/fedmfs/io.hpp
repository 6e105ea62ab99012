#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fedmfs/errors.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Locale-independent number formatting ('.' decimal separator, shortest
// round-trippable form).

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(float v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
inline T parse_number(std::string_view text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("cannot parse number: '" + std::string(text) + "'");
    return value;
}

// ---------------------------------------------------------------------------
// Model checkpoint: little-endian int32 header (modality_id, input_dim,
// hidden_dim, num_classes) followed by little-endian float32 weights. The
// payload length equals ModalityModelParams::size_bytes().

namespace detail {

inline void put_le_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_le_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::string encode_checkpoint(const ModalityModelParams& params) {
    std::string out;
    out.reserve(16 + params.weights.size() * 4);
    detail::put_le_u32(out, static_cast<std::uint32_t>(params.modality_id));
    detail::put_le_u32(out, static_cast<std::uint32_t>(params.arch.input_dim));
    detail::put_le_u32(out, static_cast<std::uint32_t>(params.arch.hidden_dim));
    detail::put_le_u32(out, static_cast<std::uint32_t>(params.arch.num_classes));
    for (float w : params.weights) {
        std::uint32_t bits;
        static_assert(sizeof bits == sizeof w);
        std::memcpy(&bits, &w, 4);
        detail::put_le_u32(out, bits);
    }
    return out;
}

inline ModalityModelParams decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16 || (bytes.size() - 16) % 4 != 0)
        throw ParseError("malformed checkpoint: bad length");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    ModalityModelParams params;
    params.modality_id = static_cast<std::int32_t>(detail::get_le_u32(p));
    params.arch.input_dim = static_cast<std::int32_t>(detail::get_le_u32(p + 4));
    params.arch.hidden_dim = static_cast<std::int32_t>(detail::get_le_u32(p + 8));
    params.arch.num_classes = static_cast<std::int32_t>(detail::get_le_u32(p + 12));
    const std::size_t count = (bytes.size() - 16) / 4;
    if (count != params.arch.param_count())
        throw ParseError("checkpoint payload does not match arch");
    params.weights.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = detail::get_le_u32(p + 16 + 4 * i);
        std::memcpy(&params.weights[i], &bits, 4);
    }
    return params;
}

inline void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_checkpoint(const fs::path& path, const ModalityModelParams& params) {
    write_file(path, encode_checkpoint(params));
}

inline ModalityModelParams read_checkpoint(const fs::path& path) {
    return decode_checkpoint(read_file(path));
}

/// Writes one .bin per global modality model under dir/round_<t>/.
inline void write_round_checkpoints(const fs::path& dir, const GlobalState& global,
                                    std::int32_t round) {
    const fs::path round_dir = dir / ("round_" + std::to_string(round));
    fs::create_directories(round_dir);
    for (const auto& [m, params] : global.global_models)
        write_checkpoint(round_dir / ("modality_" + std::to_string(m) + ".bin"), params);
}

// ---------------------------------------------------------------------------
// Experiment config (flat JSON).

inline json config_to_json(const ExperimentConfig& cfg) {
    return json{{"rounds", cfg.rounds},
                {"local_epochs", cfg.local_epochs},
                {"learning_rate", cfg.learning_rate},
                {"batch_size", cfg.batch_size},
                {"gamma", cfg.gamma},
                {"alpha_s", cfg.alpha_s},
                {"alpha_c", cfg.alpha_c},
                {"shapley_subsample", cfg.shapley_subsample},
                {"strategy", strategy_name(cfg.strategy)},
                {"seed", cfg.seed},
                {"dataset_path", cfg.dataset_path.string()},
                {"ensemble", ensemble_kind_name(cfg.ensemble)},
                {"forest_trees", cfg.forest_trees},
                {"forest_depth", cfg.forest_depth}};
}

inline ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig cfg;
        cfg.rounds = j.value("rounds", cfg.rounds);
        cfg.local_epochs = j.value("local_epochs", cfg.local_epochs);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.alpha_s = j.value("alpha_s", cfg.alpha_s);
        cfg.alpha_c = j.value("alpha_c", cfg.alpha_c);
        cfg.shapley_subsample = j.value("shapley_subsample", cfg.shapley_subsample);
        if (j.contains("strategy")) cfg.strategy = parse_strategy(j.at("strategy"));
        cfg.seed = j.value("seed", cfg.seed);
        cfg.dataset_path = j.value("dataset_path", std::string{});
        if (j.contains("ensemble")) cfg.ensemble = parse_ensemble_kind(j.at("ensemble"));
        cfg.forest_trees = j.value("forest_trees", cfg.forest_trees);
        cfg.forest_depth = j.value("forest_depth", cfg.forest_depth);
        return cfg;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("cannot parse config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const fs::path& path, const ExperimentConfig& cfg) {
    write_file(path, config_to_json(cfg).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dataset directory: labels_<client>.csv, modality_<m>_<client>.csv, and a
// manifest.json listing clients, their modalities, feature dims, hidden
// dims, and num_classes.

struct ModalityMeta {
    ModalityId id = 0;
    std::string name;
    std::int32_t feature_dim = 0;
    std::int32_t hidden_dim = 16;
};

struct DatasetBundle {
    std::vector<ClientDataset> clients;
    std::map<ModalityId, ModalityMeta> modalities;
    std::int32_t num_classes = 0;

    Arch arch_for(ModalityId m) const {
        const ModalityMeta& meta = modalities.at(m);
        return Arch{meta.feature_dim, meta.hidden_dim, num_classes};
    }
};

inline void save_dataset_dir(const fs::path& dir, const DatasetBundle& bundle) {
    fs::create_directories(dir);
    json manifest;
    manifest["num_classes"] = bundle.num_classes;
    manifest["modalities"] = json::array();
    for (const auto& [m, meta] : bundle.modalities) {
        manifest["modalities"].push_back({{"id", meta.id},
                                          {"name", meta.name},
                                          {"feature_dim", meta.feature_dim},
                                          {"hidden_dim", meta.hidden_dim}});
    }
    manifest["clients"] = json::array();
    for (const ClientDataset& ds : bundle.clients) {
        std::vector<ModalityId> held;
        for (const auto& [m, _] : ds.modalities) held.push_back(m);
        manifest["clients"].push_back({{"id", ds.client_id},
                                       {"modalities", held},
                                       {"samples", ds.labels.size()}});

        std::string labels;
        for (std::int32_t y : ds.labels) labels += std::to_string(y) + "\n";
        write_file(dir / ("labels_" + std::to_string(ds.client_id) + ".csv"), labels);

        for (const auto& [m, data] : ds.modalities) {
            std::string rows;
            for (std::size_t r = 0; r < data.features.rows(); ++r) {
                auto row = data.features.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) {
                    if (c) rows += ',';
                    rows += format_number(row[c]);
                }
                rows += '\n';
            }
            write_file(dir / ("modality_" + std::to_string(m) + "_" +
                              std::to_string(ds.client_id) + ".csv"),
                       rows);
        }
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace detail

inline DatasetBundle load_dataset_dir(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw IoError("no manifest.json in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad manifest: ") + e.what());
    }

    DatasetBundle bundle;
    try {
        bundle.num_classes = manifest.at("num_classes");
        for (const json& jm : manifest.at("modalities")) {
            ModalityMeta meta;
            meta.id = jm.at("id");
            meta.name = jm.value("name", "modality_" + std::to_string(meta.id));
            meta.feature_dim = jm.at("feature_dim");
            meta.hidden_dim = jm.value("hidden_dim", 16);
            bundle.modalities[meta.id] = meta;
        }
        for (const json& jc : manifest.at("clients")) {
            ClientDataset ds;
            ds.client_id = jc.at("id");
            ds.num_classes = bundle.num_classes;

            const std::string labels_text =
                read_file(dir / ("labels_" + std::to_string(ds.client_id) + ".csv"));
            std::istringstream label_lines(labels_text);
            std::string line;
            while (std::getline(label_lines, line)) {
                if (line.empty()) continue;
                ds.labels.push_back(parse_number<std::int32_t>(line));
            }

            for (const json& jmid : jc.at("modalities")) {
                const ModalityId m = jmid;
                auto meta_it = bundle.modalities.find(m);
                if (meta_it == bundle.modalities.end())
                    throw ParseError("client lists unknown modality " + std::to_string(m));
                const auto dim = static_cast<std::size_t>(meta_it->second.feature_dim);

                ModalityData data;
                data.modality_id = m;
                data.features = FloatMatrix(ds.labels.size(), dim);
                const std::string text = read_file(dir / ("modality_" + std::to_string(m) +
                                                          "_" + std::to_string(ds.client_id) +
                                                          ".csv"));
                std::istringstream lines(text);
                std::size_t r = 0;
                while (std::getline(lines, line)) {
                    if (line.empty()) continue;
                    if (r >= ds.labels.size())
                        throw ParseError("modality file has more rows than labels");
                    const std::vector<std::string> fields = detail::split_csv_line(line);
                    if (fields.size() != dim)
                        throw ParseError("modality " + std::to_string(m) + " row has " +
                                         std::to_string(fields.size()) + " fields, expected " +
                                         std::to_string(dim));
                    for (std::size_t c = 0; c < dim; ++c)
                        data.features(r, c) = parse_number<float>(fields[c]);
                    ++r;
                }
                if (r != ds.labels.size())
                    throw ParseError("modality file has fewer rows than labels");
                ds.modalities[m] = std::move(data);
            }
            bundle.clients.push_back(std::move(ds));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad manifest: ") + e.what());
    }

    for (const ClientDataset& ds : bundle.clients) {
        const std::vector<std::string> issues = validate_dataset(ds);
        if (!issues.empty()) throw ParseError("invalid dataset: " + issues.front());
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// CSV emission for run outputs.

inline std::string metrics_csv_header() {
    return "round,mean_accuracy,min_accuracy,max_accuracy,uploaded_bytes,"
           "downloaded_bytes,cumulative_uploaded_bytes\n";
}

inline std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics) {
    std::string out = metrics_csv_header();
    for (const RoundMetrics& m : metrics) {
        out += std::to_string(m.round) + ',' + format_number(m.mean_accuracy) + ',' +
               format_number(m.min_accuracy) + ',' + format_number(m.max_accuracy) + ',' +
               std::to_string(m.uploaded_bytes) + ',' + std::to_string(m.downloaded_bytes) +
               ',' + std::to_string(m.cumulative_uploaded_bytes) + '\n';
    }
    return out;
}

struct SelectionLogRow {
    std::int32_t round = 0;
    ClientId client_id = 0;
    ModalityId modality_id = 0;
    double raw_shapley = 0.0;
    double norm_shapley = 0.0;
    std::uint64_t size_bytes = 0;
    double norm_size = 0.0;
    double priority = 0.0;
    bool selected = false;
};

inline std::string selection_csv_header() {
    return "round,client_id,modality_id,raw_shapley,norm_shapley,size_bytes,"
           "norm_size,priority,selected\n";
}

inline std::string selection_to_csv(const std::vector<SelectionLogRow>& rows) {
    std::string out = selection_csv_header();
    for (const SelectionLogRow& r : rows) {
        out += std::to_string(r.round) + ',' + std::to_string(r.client_id) + ',' +
               std::to_string(r.modality_id) + ',' + format_number(r.raw_shapley) + ',' +
               format_number(r.norm_shapley) + ',' + std::to_string(r.size_bytes) + ',' +
               format_number(r.norm_size) + ',' + format_number(r.priority) + ',' +
               (r.selected ? "1" : "0") + '\n';
    }
    return out;
}

struct AttributionRow {
    std::int32_t round = 0;
    ClientId client_id = 0;
    ModalityId modality_id = 0;
    double mean_abs_shapley = 0.0;
};

inline std::string attribution_csv_header() {
    return "round,client_id,modality_id,mean_abs_shapley\n";
}

inline std::string attribution_to_csv(const std::vector<AttributionRow>& rows) {
    std::string out = attribution_csv_header();
    for (const AttributionRow& r : rows) {
        out += std::to_string(r.round) + ',' + std::to_string(r.client_id) + ',' +
               std::to_string(r.modality_id) + ',' + format_number(r.mean_abs_shapley) + '\n';
    }
    return out;
}

/// Strict CSV reader: fixed header, fixed field count, '.' decimals.
inline std::vector<std::vector<std::string>> parse_strict_csv(const std::string& text,
                                                              const std::string& expected_header) {
    std::istringstream lines(text);
    std::string line;
    if (!std::getline(lines, line) || line + "\n" != expected_header)
        throw ParseError("unexpected CSV header: '" + line + "'");
    const std::size_t arity = detail::split_csv_line(line).size();
    std::vector<std::vector<std::string>> rows;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != arity)
            throw ParseError("CSV row arity mismatch: '" + line + "'");
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace fedmfs
