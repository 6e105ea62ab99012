#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// Settings for one local training call. Loss is negative log-likelihood.
struct TrainingConfig {
    std::int32_t epochs = 5;
    float learning_rate = 0.1f;
    std::int32_t batch_size = 32;
    std::uint64_t rng_seed = 0;
};

struct Prediction {
    std::int32_t label = 0;
    std::vector<float> log_probs;
};

namespace detail {

struct WeightViews {
    std::span<float> w1, b1, w2, b2;
};

inline WeightViews split_weights(std::vector<float>& w, const Arch& a) {
    const auto d = static_cast<std::size_t>(a.input_dim);
    const auto h = static_cast<std::size_t>(a.hidden_dim);
    const auto c = static_cast<std::size_t>(a.num_classes);
    float* p = w.data();
    return {{p, d * h}, {p + d * h, h}, {p + d * h + h, h * c}, {p + d * h + h + h * c, c}};
}

struct ConstWeightViews {
    std::span<const float> w1, b1, w2, b2;
};

inline ConstWeightViews split_weights(const std::vector<float>& w, const Arch& a) {
    const auto d = static_cast<std::size_t>(a.input_dim);
    const auto h = static_cast<std::size_t>(a.hidden_dim);
    const auto c = static_cast<std::size_t>(a.num_classes);
    const float* p = w.data();
    return {{p, d * h}, {p + d * h, h}, {p + d * h + h, h * c}, {p + d * h + h + h * c, c}};
}

/// hidden = tanh(W1^T x + b1), logits = W2^T hidden + b2.
inline void forward(const ConstWeightViews& w, const Arch& a, std::span<const float> x,
                    std::vector<float>& hidden, std::vector<float>& logits) {
    const auto d = static_cast<std::size_t>(a.input_dim);
    const auto h = static_cast<std::size_t>(a.hidden_dim);
    const auto c = static_cast<std::size_t>(a.num_classes);
    hidden.assign(h, 0.0f);
    for (std::size_t j = 0; j < h; ++j) {
        float z = w.b1[j];
        for (std::size_t i = 0; i < d; ++i) z += w.w1[i * h + j] * x[i];
        hidden[j] = std::tanh(z);
    }
    logits.assign(c, 0.0f);
    for (std::size_t k = 0; k < c; ++k) {
        float z = w.b2[k];
        for (std::size_t j = 0; j < h; ++j) z += w.w2[j * c + k] * hidden[j];
        logits[k] = z;
    }
}

inline void log_softmax_inplace(std::vector<float>& logits) {
    float mx = logits[0];
    for (float v : logits) mx = std::max(mx, v);
    float sum = 0.0f;
    for (float v : logits) sum += std::exp(v - mx);
    const float lse = mx + std::log(sum);
    for (float& v : logits) v -= lse;
}

inline std::int32_t argmax_lowest(std::span<const float> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<std::int32_t>(best);
}

}  // namespace detail

/// Fresh parameters with small deterministic random weights.
inline ModalityModelParams init_modality_params(ModalityId m, const Arch& arch,
                                                std::uint64_t seed) {
    ModalityModelParams params;
    params.modality_id = m;
    params.arch = arch;
    params.weights.resize(arch.param_count());
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(arch.input_dim, 1)));
    auto views = detail::split_weights(params.weights, arch);
    for (float& w : views.w1) w = static_cast<float>(rng.normal() * scale);
    for (float& w : views.b1) w = 0.0f;
    const double scale2 = 1.0 / std::sqrt(static_cast<double>(std::max(arch.hidden_dim, 1)));
    for (float& w : views.w2) w = static_cast<float>(rng.normal() * scale2);
    for (float& w : views.b2) w = 0.0f;
    return params;
}

/// Class and log-probability vector for one feature row.
inline Prediction predict_modality(const ModalityModelParams& params,
                                   std::span<const float> features_row) {
    if (params.weights.size() != params.arch.param_count())
        throw DimensionMismatch("weight count does not match arch");
    if (features_row.size() != static_cast<std::size_t>(params.arch.input_dim))
        throw DimensionMismatch("feature dim " + std::to_string(features_row.size()) +
                                " does not match arch input dim " +
                                std::to_string(params.arch.input_dim));
    auto views = detail::split_weights(params.weights, params.arch);
    std::vector<float> hidden, logits;
    detail::forward(views, params.arch, features_row, hidden, logits);
    detail::log_softmax_inplace(logits);
    Prediction out;
    out.label = detail::argmax_lowest(logits);
    out.log_probs = std::move(logits);
    return out;
}

/// Mean NLL over the given sample indices (all rows if empty span).
inline double nll_loss(const ModalityModelParams& params, const FloatMatrix& features,
                       std::span<const std::int32_t> labels,
                       std::span<const std::size_t> indices = {}) {
    std::vector<std::size_t> all;
    if (indices.empty()) {
        all.resize(features.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        indices = all;
    }
    auto views = detail::split_weights(params.weights, params.arch);
    std::vector<float> hidden, logits;
    double total = 0.0;
    for (std::size_t i : indices) {
        detail::forward(views, params.arch, features.row(i), hidden, logits);
        detail::log_softmax_inplace(logits);
        total -= logits[static_cast<std::size_t>(labels[i])];
    }
    return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

/// E epochs of mini-batch SGD on NLL. The shuffle schedule is a pure
/// function of rng_seed, so identical calls return bit-identical weights.
/// epochs = 0 returns the input parameters unchanged.
inline ModalityModelParams train_modality_model(const ModalityModelParams& params,
                                                const FloatMatrix& features,
                                                std::span<const std::int32_t> labels,
                                                const TrainingConfig& tc,
                                                std::span<const std::size_t> sample_indices = {}) {
    if (params.weights.size() != params.arch.param_count())
        throw DimensionMismatch("weight count does not match arch");
    if (features.cols() != static_cast<std::size_t>(params.arch.input_dim))
        throw DimensionMismatch("feature matrix has " + std::to_string(features.cols()) +
                                " columns, arch expects " +
                                std::to_string(params.arch.input_dim));
    if (features.rows() != labels.size())
        throw DimensionMismatch("label count does not match sample count");

    std::vector<std::size_t> order;
    if (sample_indices.empty()) {
        order.resize(features.rows());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    } else {
        order.assign(sample_indices.begin(), sample_indices.end());
    }

    ModalityModelParams out = params;
    if (tc.epochs <= 0 || order.empty()) return out;

    const Arch& a = params.arch;
    const auto d = static_cast<std::size_t>(a.input_dim);
    const auto h = static_cast<std::size_t>(a.hidden_dim);
    const auto c = static_cast<std::size_t>(a.num_classes);
    const auto batch = static_cast<std::size_t>(std::max(tc.batch_size, 1));

    Rng rng(tc.rng_seed);
    std::vector<float> hidden, logits, dz2(c);
    std::vector<float> grad(out.weights.size(), 0.0f);

    for (std::int32_t epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(start + batch, order.size());
            const float inv_n = 1.0f / static_cast<float>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0f);
            auto g = detail::split_weights(grad, a);
            auto w = detail::split_weights(out.weights, a);
            detail::ConstWeightViews cw{w.w1, w.b1, w.w2, w.b2};

            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t row = order[bi];
                auto x = features.row(row);
                detail::forward(cw, a, x, hidden, logits);
                detail::log_softmax_inplace(logits);
                const auto y = static_cast<std::size_t>(labels[row]);
                // dL/dlogit = softmax - onehot
                for (std::size_t k = 0; k < c; ++k) {
                    dz2[k] = std::exp(logits[k]) - (k == y ? 1.0f : 0.0f);
                    g.b2[k] += dz2[k];
                    for (std::size_t j = 0; j < h; ++j) g.w2[j * c + k] += hidden[j] * dz2[k];
                }
                for (std::size_t j = 0; j < h; ++j) {
                    float da = 0.0f;
                    for (std::size_t k = 0; k < c; ++k) da += w.w2[j * c + k] * dz2[k];
                    const float dz1 = (1.0f - hidden[j] * hidden[j]) * da;
                    g.b1[j] += dz1;
                    for (std::size_t i = 0; i < d; ++i) g.w1[i * h + j] += x[i] * dz1;
                }
            }
            const float step = tc.learning_rate * inv_n;
            for (std::size_t i = 0; i < out.weights.size(); ++i)
                out.weights[i] -= step * grad[i];
        }
        for (float v : out.weights) {
            if (!std::isfinite(v))
                throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch) +
                                    "; lower the learning rate");
        }
    }
    return out;
}

/// Hard-label prediction matrix over the given sample rows, columns in
/// ascending ModalityId order.
inline PredictionMatrix build_prediction_matrix(
    const std::map<ModalityId, ModalityModelParams>& models, const ClientDataset& dataset,
    std::span<const std::size_t> sample_indices) {
    PredictionMatrix preds;
    preds.column_modalities.reserve(models.size());
    for (const auto& [m, _] : models) preds.column_modalities.push_back(m);
    preds.entries = DenseMatrix<std::int32_t>(sample_indices.size(), models.size());

    std::size_t col = 0;
    for (const auto& [m, params] : models) {
        auto it = dataset.modalities.find(m);
        if (it == dataset.modalities.end())
            throw KeyMismatch("client " + std::to_string(dataset.client_id) +
                              " has no data for modality " + std::to_string(m));
        for (std::size_t r = 0; r < sample_indices.size(); ++r) {
            const auto row = sample_indices[r];
            preds.entries(r, col) = predict_modality(params, it->second.features.row(row)).label;
        }
        ++col;
    }
    return preds;
}

}  // namespace fedmfs
