#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedmfs/io.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/shapley.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

/// One axiom or oracle check over built-in fixtures.
struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

/// Random transferable-utility game with values in [0,1]; v(empty) is also
/// randomized so efficiency is a real constraint.
inline CoalitionGame random_game(std::size_t players, std::uint64_t seed,
                                 std::vector<double>& storage) {
    const std::size_t masks = std::size_t{1} << players;
    storage.resize(masks);
    Rng rng(seed);
    for (double& v : storage) v = rng.uniform();
    CoalitionGame game;
    for (std::size_t i = 0; i < players; ++i)
        game.players.push_back(static_cast<ModalityId>(i));
    game.value = [&storage](std::uint32_t mask) { return storage[mask]; };
    return game;
}

/// Deliberately wrong coalition weights (uniform instead of s!(n-s-1)!/n!).
/// Used as the negative control for the efficiency check.
inline std::map<ModalityId, double> broken_weight_shapley(const CoalitionGame& game) {
    const std::size_t n = game.players.size();
    const std::size_t masks = std::size_t{1} << n;
    std::vector<double> v(masks);
    for (std::size_t mask = 0; mask < masks; ++mask)
        v[mask] = game.value(static_cast<std::uint32_t>(mask));
    const double w = 1.0 / static_cast<double>(masks / 2);
    std::map<ModalityId, double> phi;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bit = std::size_t{1} << i;
        double sum = 0.0;
        for (std::size_t mask = 0; mask < masks; ++mask) {
            if (mask & bit) continue;
            sum += w * (v[mask | bit] - v[mask]);
        }
        phi[game.players[i]] = sum;
    }
    return phi;
}

}  // namespace detail

/// Axiom and oracle self-test on built-in fixtures. With
/// inject_broken_weights the efficiency check runs against an intentionally
/// wrong weight formula and must fail.
inline std::vector<CheckResult> run_shapley_checks(bool inject_broken_weights = false) {
    std::vector<CheckResult> results;

    // Efficiency on random games, 2..8 players.
    {
        bool ok = true;
        std::string detail_msg;
        for (std::size_t n = 2; n <= 8 && ok; ++n) {
            std::vector<double> storage;
            const CoalitionGame game = detail::random_game(n, 0x5ECu + n, storage);
            const auto phi = inject_broken_weights ? detail::broken_weight_shapley(game)
                                                   : exact_shapley(game);
            double total = 0.0;
            for (const auto& [_, value] : phi) total += value;
            const double expected =
                storage[(std::size_t{1} << n) - 1] - storage[0];
            if (std::abs(total - expected) > 1e-9) {
                ok = false;
                detail_msg = "sum(phi) - (v(N) - v(empty)) = " +
                             format_number(total - expected) + " at n=" + std::to_string(n);
            }
        }
        results.push_back({"efficiency", ok, detail_msg});
    }

    // Dummy player gets exactly zero.
    {
        CoalitionGame game;
        game.players = {0, 1, 2};
        game.value = [](std::uint32_t mask) {
            // player 1 is a dummy: value ignores its bit
            const std::uint32_t effective = mask & 0b101u;
            return static_cast<double>(std::popcount(effective)) * 0.25 +
                   ((effective & 0b100u) ? 0.1 : 0.0);
        };
        const auto phi = exact_shapley(game);
        const bool ok = phi.at(1) == 0.0;
        results.push_back({"dummy", ok, ok ? "" : "phi(dummy) = " + format_number(phi.at(1))});
    }

    // Symmetry on the 2-player AND game.
    {
        CoalitionGame game;
        game.players = {0, 1};
        game.value = [](std::uint32_t mask) { return mask == 0b11u ? 1.0 : 0.0; };
        const auto phi = exact_shapley(game);
        const bool ok = std::abs(phi.at(0) - 0.5) < 1e-9 && std::abs(phi.at(1) - 0.5) < 1e-9;
        results.push_back({"symmetry_and_game", ok,
                           ok ? "" : "phi = (" + format_number(phi.at(0)) + ", " +
                                     format_number(phi.at(1)) + ")"});
    }

    // Known 3-player fixture, exact and exhaustive-permutation paths.
    {
        CoalitionGame game;
        game.players = {1, 2, 3};
        game.value = [](std::uint32_t mask) {
            static const double table[8] = {0, 1, 2, 4, 3, 5, 6, 9};
            return table[mask];
        };
        const auto exact = exact_shapley(game);
        const auto enumerated = enumerated_permutation_shapley(game);
        bool ok = true;
        const std::map<ModalityId, double> expected{{1, 2.0}, {2, 3.0}, {3, 4.0}};
        for (const auto& [player, want] : expected) {
            if (std::abs(exact.at(player) - want) > 1e-9) ok = false;
            if (std::abs(enumerated.at(player) - want) > 1e-9) ok = false;
        }
        results.push_back({"three_player_fixture", ok, ok ? "" : "phi != (2, 3, 4)"});
    }

    // Sampling oracle agreement: 5-player random game, 10k permutations,
    // median MAD over 3 seeds within 0.02.
    {
        std::vector<double> storage;
        const CoalitionGame game = detail::random_game(5, 0xABCDEF, storage);
        const auto exact = exact_shapley(game);
        std::vector<double> mads;
        for (std::uint64_t seed : {11u, 22u, 33u}) {
            const auto sampled = permutation_shapley(game, 10000, seed);
            double mad = 0.0;
            for (const auto& [player, value] : exact)
                mad += std::abs(sampled.at(player) - value);
            mads.push_back(mad / static_cast<double>(exact.size()));
        }
        std::sort(mads.begin(), mads.end());
        const double median = mads[1];
        const bool ok = median <= 0.02;
        results.push_back({"permutation_oracle_agreement", ok,
                           "median MAD = " + format_number(median)});
    }

    // Call-count contract: exactly 2^n evaluations.
    {
        std::size_t calls = 0;
        CoalitionGame game;
        game.players = {0, 1, 2, 3, 4, 5};
        game.value = [&calls](std::uint32_t mask) {
            ++calls;
            return static_cast<double>(std::popcount(mask));
        };
        exact_shapley(game);
        const bool ok = calls == (std::size_t{1} << 6);
        results.push_back({"call_count", ok,
                           ok ? "" : "value_fn called " + std::to_string(calls) + " times"});
    }

    return results;
}

}  // namespace fedmfs
