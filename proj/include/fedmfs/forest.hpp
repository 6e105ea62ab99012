#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedmfs/errors.hpp"
#include "fedmfs/rng.hpp"
#include "fedmfs/types.hpp"

namespace fedmfs {

struct ForestConfig {
    std::int32_t tree_count = 25;
    std::int32_t max_depth = 4;
    std::uint64_t rng_seed = 0;
};

/// Internal nodes test row[column] == value; equal goes left.
struct TreeNode {
    bool leaf = true;
    std::int32_t label = 0;
    std::int32_t column = 0;
    std::int32_t value = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    std::int32_t predict(std::span<const std::int32_t> row) const {
        std::int32_t i = 0;
        while (!nodes[static_cast<std::size_t>(i)].leaf) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = row[static_cast<std::size_t>(n.column)] == n.value ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].label;
    }
};

/// Personal decision-level fuser over per-modality predicted labels.
struct EnsembleModel {
    EnsembleKind kind = EnsembleKind::majority_vote;
    std::vector<DecisionTree> trees;
    std::vector<ModalityId> input_modalities;
    std::int32_t class_count = 0;
};

namespace detail {

inline std::int32_t majority_class(std::span<const std::int32_t> counts) {
    std::int32_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[static_cast<std::size_t>(best)])
            best = static_cast<std::int32_t>(c);
    return best;
}

inline double gini(std::span<const std::int32_t> counts, std::int32_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::int32_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct TreeBuilder {
    const PredictionMatrix& preds;
    std::span<const std::int32_t> labels;
    std::int32_t class_count;
    std::int32_t max_depth;
    DecisionTree tree;

    std::int32_t grow(std::vector<std::size_t>& rows, std::int32_t depth) {
        std::vector<std::int32_t> counts(static_cast<std::size_t>(class_count), 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(labels[r])];
        const auto total = static_cast<std::int32_t>(rows.size());
        const std::int32_t node_label = majority_class(counts);

        bool pure = false;
        for (std::int32_t c : counts)
            if (c == total) pure = true;

        if (pure || depth >= max_depth) return push_leaf(node_label);

        // Candidate splits: equality test of (column, class value); best
        // Gini gain wins, ties by lower column then lower value.
        const double node_imp = gini(counts, total);
        double best_gain = 1e-12;
        std::int32_t best_col = -1, best_val = 0;
        std::vector<std::int32_t> left_counts(static_cast<std::size_t>(class_count));
        for (std::size_t col = 0; col < preds.cols(); ++col) {
            std::vector<bool> seen(static_cast<std::size_t>(class_count), false);
            for (std::size_t r : rows)
                seen[static_cast<std::size_t>(preds.entries(r, col))] = true;
            for (std::int32_t val = 0; val < class_count; ++val) {
                if (!seen[static_cast<std::size_t>(val)]) continue;
                std::fill(left_counts.begin(), left_counts.end(), 0);
                std::int32_t n_left = 0;
                for (std::size_t r : rows) {
                    if (preds.entries(r, col) == val) {
                        ++left_counts[static_cast<std::size_t>(labels[r])];
                        ++n_left;
                    }
                }
                const std::int32_t n_right = total - n_left;
                if (n_left == 0 || n_right == 0) continue;
                std::vector<std::int32_t> right_counts(counts);
                for (std::size_t c = 0; c < right_counts.size(); ++c)
                    right_counts[c] -= left_counts[c];
                const double child_imp =
                    (static_cast<double>(n_left) / total) * gini(left_counts, n_left) +
                    (static_cast<double>(n_right) / total) * gini(right_counts, n_right);
                const double gain = node_imp - child_imp;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_col = static_cast<std::int32_t>(col);
                    best_val = val;
                }
            }
        }
        if (best_col < 0) return push_leaf(node_label);

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            if (preds.entries(r, static_cast<std::size_t>(best_col)) == best_val)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        const auto idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({false, node_label, best_col, best_val, -1, -1});
        const std::int32_t li = grow(left_rows, depth + 1);
        const std::int32_t ri = grow(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(idx)].left = li;
        tree.nodes[static_cast<std::size_t>(idx)].right = ri;
        return idx;
    }

    std::int32_t push_leaf(std::int32_t label) {
        const auto idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({true, label, 0, 0, -1, -1});
        return idx;
    }
};

}  // namespace detail

/// Fits the decision-level ensemble on hard per-modality predictions.
/// majority_vote needs no fitting; random_forest grows tree_count trees on
/// seeded bootstrap resamples.
inline EnsembleModel train_ensemble(const PredictionMatrix& preds,
                                    std::span<const std::int32_t> labels,
                                    std::int32_t class_count, EnsembleKind kind,
                                    const ForestConfig& cfg = {}) {
    if (preds.rows() == 0 || preds.cols() == 0)
        throw EmptyInput("cannot fit ensemble on an empty prediction matrix");
    if (preds.rows() != labels.size())
        throw DimensionMismatch("prediction rows do not match label count");

    EnsembleModel ens;
    ens.kind = kind;
    ens.input_modalities = preds.column_modalities;
    ens.class_count = class_count;
    if (kind == EnsembleKind::majority_vote) return ens;

    ens.trees.reserve(static_cast<std::size_t>(cfg.tree_count));
    const std::size_t n = preds.rows();
    for (std::int32_t t = 0; t < cfg.tree_count; ++t) {
        Rng rng(derive_seed(cfg.rng_seed, 0x7265657du /*tree*/, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i)
            rows[i] = static_cast<std::size_t>(rng.uniform_below(n));
        detail::TreeBuilder builder{preds, labels, class_count, cfg.max_depth, {}};
        builder.grow(rows, 0);
        ens.trees.push_back(std::move(builder.tree));
    }
    return ens;
}

/// Class-probability vector: vote fractions for a forest, one-hot of the
/// vote result for majority_vote.
inline std::vector<double> ensemble_predict_proba(const EnsembleModel& ens,
                                                  std::span<const std::int32_t> row) {
    if (row.size() != ens.input_modalities.size())
        throw ArityMismatch("row length " + std::to_string(row.size()) +
                            " does not match ensemble arity " +
                            std::to_string(ens.input_modalities.size()));
    std::vector<double> probs(static_cast<std::size_t>(ens.class_count), 0.0);
    if (ens.kind == EnsembleKind::random_forest) {
        std::vector<std::int32_t> votes(static_cast<std::size_t>(ens.class_count), 0);
        for (const DecisionTree& tree : ens.trees)
            ++votes[static_cast<std::size_t>(tree.predict(row))];
        const double inv = 1.0 / static_cast<double>(ens.trees.size());
        for (std::size_t c = 0; c < probs.size(); ++c)
            probs[c] = votes[c] * inv;
    } else {
        std::vector<std::int32_t> counts(static_cast<std::size_t>(ens.class_count), 0);
        for (std::int32_t v : row) ++counts[static_cast<std::size_t>(v)];
        probs[static_cast<std::size_t>(detail::majority_class(counts))] = 1.0;
    }
    return probs;
}

/// Final fused class for one row of per-modality predictions. Ties break
/// toward the lowest class index.
inline std::int32_t ensemble_predict(const EnsembleModel& ens,
                                     std::span<const std::int32_t> row) {
    if (row.size() != ens.input_modalities.size())
        throw ArityMismatch("row length does not match ensemble arity");
    if (ens.kind == EnsembleKind::majority_vote) {
        std::vector<std::int32_t> counts(static_cast<std::size_t>(ens.class_count), 0);
        for (std::int32_t v : row) ++counts[static_cast<std::size_t>(v)];
        return detail::majority_class(counts);
    }
    std::vector<std::int32_t> votes(static_cast<std::size_t>(ens.class_count), 0);
    for (const DecisionTree& tree : ens.trees)
        ++votes[static_cast<std::size_t>(tree.predict(row))];
    return detail::majority_class(votes);
}

/// Coalition read-out: absent modalities are completed from each background
/// row in turn and the class-probability vectors are averaged. A complete
/// partial_row is background independent.
inline std::vector<double> ensemble_predict_proba_masked(
    const EnsembleModel& ens, const std::map<ModalityId, std::int32_t>& partial_row,
    const std::vector<std::vector<std::int32_t>>& background) {
    if (background.empty())
        throw EmptyBackground("masked evaluation needs at least one background row");
    for (const auto& [m, _] : partial_row) {
        if (std::find(ens.input_modalities.begin(), ens.input_modalities.end(), m) ==
            ens.input_modalities.end())
            throw ArityMismatch("partial row references modality " + std::to_string(m) +
                                " that is not an ensemble input");
    }

    std::vector<double> acc(static_cast<std::size_t>(ens.class_count), 0.0);
    std::vector<std::int32_t> completed(ens.input_modalities.size(), 0);
    for (const auto& bg : background) {
        if (bg.size() != ens.input_modalities.size())
            throw ArityMismatch("background row length does not match ensemble arity");
        for (std::size_t i = 0; i < completed.size(); ++i) {
            auto it = partial_row.find(ens.input_modalities[i]);
            completed[i] = it != partial_row.end() ? it->second : bg[i];
        }
        const std::vector<double> p = ensemble_predict_proba(ens, completed);
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += p[c];
    }
    const double inv = 1.0 / static_cast<double>(background.size());
    for (double& v : acc) v *= inv;
    return acc;
}

}  // namespace fedmfs
