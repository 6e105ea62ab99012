#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/forest.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// A coalition game over the ensemble's modality inputs. The value function
/// receives a bitmask over `players` (bit i set means players[i] present)
/// and must be pure.
struct CoalitionGame {
    std::vector<ModalityId> players;
    std::function<double(std::uint32_t)> value;
};

inline constexpr std::size_t kMaxExactPlayers = 16;

namespace detail {

inline double factorial(std::size_t n) {
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

inline std::vector<double> coalition_weights(std::size_t n) {
    // weight(s) = s! (n-s-1)! / n!  for a coalition of size s not containing
    // the player under consideration.
    std::vector<double> w(n);
    const double fn = factorial(n);
    for (std::size_t s = 0; s < n; ++s)
        w[s] = factorial(s) * factorial(n - 1 - s) / fn;
    return w;
}

}  // namespace detail

/// Exact Shapley values by enumerating all 2^n coalitions once. The value
/// function is called exactly 2^n times.
inline std::map<ModalityId, double> exact_shapley(const CoalitionGame& game) {
    const std::size_t n = game.players.size();
    if (n > kMaxExactPlayers)
        throw TooManyPlayers("exact enumeration supports at most " +
                             std::to_string(kMaxExactPlayers) + " players, got " +
                             std::to_string(n));
    const std::size_t num_masks = std::size_t{1} << n;
    std::vector<double> v(num_masks);
    for (std::size_t mask = 0; mask < num_masks; ++mask)
        v[mask] = game.value(static_cast<std::uint32_t>(mask));

    const std::vector<double> w = detail::coalition_weights(n);
    std::map<ModalityId, double> phi;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bit = std::size_t{1} << i;
        double sum = 0.0;
        for (std::size_t mask = 0; mask < num_masks; ++mask) {
            if (mask & bit) continue;
            sum += w[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
        }
        phi[game.players[i]] = sum;
    }
    return phi;
}

/// Monte-Carlo estimate: mean marginal contribution over uniformly sampled
/// player orderings. Deterministic given the seed.
inline std::map<ModalityId, double> permutation_shapley(const CoalitionGame& game,
                                                        std::size_t num_permutations,
                                                        std::uint64_t seed) {
    const std::size_t n = game.players.size();
    if (num_permutations == 0)
        throw EmptyInput("permutation_shapley needs at least one permutation");
    std::vector<std::size_t> order(n);
    std::vector<double> acc(n, 0.0);
    Rng rng(seed);
    for (std::size_t p = 0; p < num_permutations; ++p) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::uint32_t mask = 0;
        double prev = game.value(0);
        for (std::size_t i : order) {
            mask |= (std::uint32_t{1} << i);
            const double cur = game.value(mask);
            acc[i] += cur - prev;
            prev = cur;
        }
    }
    std::map<ModalityId, double> phi;
    for (std::size_t i = 0; i < n; ++i)
        phi[game.players[i]] = acc[i] / static_cast<double>(num_permutations);
    return phi;
}

/// Exhaustive variant: averages marginal contributions over all n!
/// orderings, which equals exact_shapley up to rounding.
inline std::map<ModalityId, double> enumerated_permutation_shapley(const CoalitionGame& game) {
    const std::size_t n = game.players.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::vector<double> acc(n, 0.0);
    std::size_t count = 0;
    do {
        std::uint32_t mask = 0;
        double prev = game.value(0);
        for (std::size_t i : order) {
            mask |= (std::uint32_t{1} << i);
            const double cur = game.value(mask);
            acc[i] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    std::map<ModalityId, double> phi;
    for (std::size_t i = 0; i < n; ++i)
        phi[game.players[i]] = acc[i] / static_cast<double>(count);
    return phi;
}

/// Per-modality impact on the ensemble output, per Stage #1 scoring: draw a
/// seeded subsample, use it as the masking background, attribute the
/// probability of each drawn sample's true label, and report mean |phi|.
inline ShapleyReport modality_impact(const EnsembleModel& ens, const PredictionMatrix& preds,
                                     std::span<const std::int32_t> labels,
                                     std::int32_t subsample, std::uint64_t seed) {
    if (preds.rows() == 0)
        throw EmptyPredictionMatrix("modality impact needs at least one sample");
    if (subsample < 1)
        throw EmptyInput("subsample must be >= 1");
    if (preds.rows() != labels.size())
        throw DimensionMismatch("prediction rows do not match label count");

    const std::size_t take = std::min(static_cast<std::size_t>(subsample), preds.rows());
    Rng rng(seed);
    ShapleyReport report;
    report.subsample_indices = rng.sample_without_replacement(preds.rows(), take);

    std::vector<std::vector<std::int32_t>> background;
    background.reserve(take);
    for (std::size_t idx : report.subsample_indices) {
        std::vector<std::int32_t> row(preds.cols());
        for (std::size_t c = 0; c < preds.cols(); ++c) row[c] = preds.entries(idx, c);
        background.push_back(std::move(row));
    }

    const std::size_t n = preds.cols();
    report.per_sample = DenseMatrix<double>(take, n);
    std::map<ModalityId, double> abs_sum;
    for (ModalityId m : preds.column_modalities) abs_sum[m] = 0.0;

    for (std::size_t s = 0; s < take; ++s) {
        const std::size_t sample = report.subsample_indices[s];
        const auto true_label = static_cast<std::size_t>(labels[sample]);
        CoalitionGame game;
        game.players = preds.column_modalities;
        game.value = [&](std::uint32_t mask) {
            std::map<ModalityId, std::int32_t> partial;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (std::uint32_t{1} << i))
                    partial[preds.column_modalities[i]] = preds.entries(sample, i);
            return ensemble_predict_proba_masked(ens, partial, background)[true_label];
        };
        const std::map<ModalityId, double> phi = exact_shapley(game);
        for (std::size_t i = 0; i < n; ++i) {
            const double value = phi.at(preds.column_modalities[i]);
            (*report.per_sample)(s, i) = value;
            abs_sum[preds.column_modalities[i]] += std::abs(value);
        }
    }
    for (auto& [m, total] : abs_sum)
        report.per_modality_mean_abs[m] = total / static_cast<double>(take);
    return report;
}

}  // namespace fedmfs
