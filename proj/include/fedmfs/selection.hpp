#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

struct SelectionConfig {
    std::int32_t gamma = 1;
    double alpha_s = 0.2;
    double alpha_c = 0.8;
};

/// (x - min) / (max - min) per entry. When max == min every output is 0.5
/// so the other priority criterion decides.
inline std::map<ModalityId, double> minmax_normalize(const std::map<ModalityId, double>& values) {
    if (values.empty()) throw EmptyInput("minmax_normalize needs at least one value");
    double lo = values.begin()->second, hi = values.begin()->second;
    for (const auto& [m, v] : values) {
        if (!std::isfinite(v))
            throw NonFiniteInput("non-finite value for modality " + std::to_string(m));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::map<ModalityId, double> out;
    if (hi == lo) {
        for (const auto& [m, _] : values) out[m] = 0.5;
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (const auto& [m, v] : values) out[m] = (v - lo) * inv;
    return out;
}

/// Top min(gamma, M) modalities by priority; ties break toward the smaller
/// model, then the lower id. Result is sorted ascending by ModalityId.
inline std::vector<ModalityId> select_top_gamma(const std::map<ModalityId, double>& priorities,
                                                std::int32_t gamma,
                                                const std::map<ModalityId, std::uint64_t>& sizes) {
    if (priorities.empty()) throw EmptyInput("select_top_gamma needs at least one priority");
    std::vector<ModalityId> order;
    order.reserve(priorities.size());
    for (const auto& [m, _] : priorities) order.push_back(m);
    auto size_of = [&](ModalityId m) {
        auto it = sizes.find(m);
        return it != sizes.end() ? it->second : std::uint64_t{0};
    };
    std::sort(order.begin(), order.end(), [&](ModalityId a, ModalityId b) {
        const double pa = priorities.at(a), pb = priorities.at(b);
        if (pa != pb) return pa > pb;
        if (size_of(a) != size_of(b)) return size_of(a) < size_of(b);
        return a < b;
    });
    const std::size_t take =
        std::min(static_cast<std::size_t>(std::max(gamma, 0)), order.size());
    std::vector<ModalityId> selected(order.begin(), order.begin() + take);
    std::sort(selected.begin(), selected.end());
    return selected;
}

/// Composite priority P = alpha_s * norm_shapley + alpha_c * (1 - norm_size)
/// with both criteria min-max normalized, plus the resulting top-gamma set.
inline SelectionResult compute_priorities(const ShapleyReport& shapley,
                                          const std::map<ModalityId, std::uint64_t>& sizes,
                                          const SelectionConfig& cfg) {
    if (shapley.per_modality_mean_abs.size() != sizes.size())
        throw KeyMismatch("shapley and size maps differ in size");
    for (const auto& [m, _] : shapley.per_modality_mean_abs)
        if (!sizes.contains(m))
            throw KeyMismatch("no size for modality " + std::to_string(m));

    std::map<ModalityId, double> size_values;
    for (const auto& [m, bytes] : sizes) size_values[m] = static_cast<double>(bytes);

    SelectionResult result;
    result.normalized_shapley = minmax_normalize(shapley.per_modality_mean_abs);
    result.normalized_size = minmax_normalize(size_values);
    for (const auto& [m, ns] : result.normalized_shapley)
        result.priorities[m] = cfg.alpha_s * ns + cfg.alpha_c * (1.0 - result.normalized_size.at(m));
    result.selected = select_top_gamma(result.priorities, cfg.gamma, sizes);
    return result;
}

}  // namespace fedmfs
