#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedmfs/matrix.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/types.hpp"

namespace testutil {

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "fedmfs_test") {
        static std::atomic<std::uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (prefix + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct Blobs {
    fedmfs::FloatMatrix features;
    std::vector<std::int32_t> labels;
};

/// Two-class Gaussian blobs with the given center separation (in units of
/// the unit noise sigma).
inline Blobs make_blobs(std::size_t dim, std::size_t samples, double separation,
                        std::uint64_t seed, std::int32_t num_classes = 2) {
    Blobs blobs;
    blobs.features = fedmfs::FloatMatrix(samples, dim);
    blobs.labels.resize(samples);
    fedmfs::Rng rng(seed);

    std::vector<std::vector<double>> centers;
    for (std::int32_t c = 0; c < num_classes; ++c) {
        std::vector<double> center(dim, 0.0);
        // class centers spaced `separation` apart along distinct axes
        center[static_cast<std::size_t>(c) % dim] = separation * (c + 1);
        centers.push_back(std::move(center));
    }
    for (std::size_t i = 0; i < samples; ++i) {
        const auto y = static_cast<std::int32_t>(rng.uniform_below(
            static_cast<std::uint64_t>(num_classes)));
        blobs.labels[i] = y;
        for (std::size_t d = 0; d < dim; ++d)
            blobs.features(i, d) =
                static_cast<float>(centers[static_cast<std::size_t>(y)][d] + rng.normal());
    }
    return blobs;
}

/// Prediction matrix from explicit columns (each column a full vector).
inline fedmfs::PredictionMatrix make_preds(
    const std::vector<fedmfs::ModalityId>& modalities,
    const std::vector<std::vector<std::int32_t>>& columns) {
    fedmfs::PredictionMatrix preds;
    preds.column_modalities = modalities;
    preds.entries = fedmfs::DenseMatrix<std::int32_t>(columns.front().size(), columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c)
        for (std::size_t r = 0; r < columns[c].size(); ++r)
            preds.entries(r, c) = columns[c][r];
    return preds;
}

inline std::vector<std::int32_t> random_labels(std::size_t n, std::int32_t num_classes,
                                               std::uint64_t seed) {
    std::vector<std::int32_t> labels(n);
    fedmfs::Rng rng(seed);
    for (auto& y : labels)
        y = static_cast<std::int32_t>(rng.uniform_below(
            static_cast<std::uint64_t>(num_classes)));
    return labels;
}

}  // namespace testutil
