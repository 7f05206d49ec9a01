#pragma once

// Feature ranking by gradient-boosted regression trees: squared-error
// boosting with exact greedy split search, split-count ("weight") importance
// and summed split gain as tie-breaker.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/preprocess.hpp"

namespace diskrul {

struct GBTConfig {
    int n_trees = 50;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    std::size_t max_rows = 200000;  // uniform seeded subsample bound

    void validate() const {
        if (n_trees < 1) throw DomainError("GBTConfig: n_trees must be positive");
        if (max_depth < 1) throw DomainError("GBTConfig: max_depth must be positive");
        if (learning_rate <= 0 || learning_rate > 1)
            throw DomainError("GBTConfig: learning_rate must be in (0,1]");
        if (min_samples_leaf < 1) throw DomainError("GBTConfig: min_samples_leaf must be positive");
    }
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double gain = 0.0;   // squared-error reduction at this split
    double value = 0.0;  // leaf mean (unscaled residual mean)
    int left = -1, right = -1;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    template <class Row>
    double predict(const Row& row) const {
        int i = 0;
        while (!nodes[i].is_leaf())
            i = row(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }
};

struct GBTEnsemble {
    std::vector<int> attributes;  // attribute id per X column
    double base = 0.0;            // initial prediction (training mean)
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // training MSE after each tree

    template <class Row>
    double predict(const Row& row) const {
        double p = base;
        for (const auto& t : trees) p += learning_rate * t.predict(row);
        return p;
    }

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        Eigen::VectorXd out(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i));
        return out;
    }
};

struct ImportanceEntry {
    int attribute = 0;
    std::uint64_t weight = 0;  // number of splits on this feature
    double gain = 0.0;         // summed squared-error reduction
};

struct ImportanceReport {
    std::vector<ImportanceEntry> entries;  // weight desc, gain desc, attribute asc

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write importance report " + path.string());
        out << "attribute,weight,gain\n";
        for (const auto& e : entries)
            out << e.attribute << ',' << e.weight << ',' << format_double(e.gain) << '\n';
    }
};

namespace detail {

struct TreeBuilder {
    const Eigen::MatrixXd& X;
    const std::vector<double>& residual;
    const GBTConfig& cfg;
    double pure_sse;  // below this a node counts as pure
    RegressionTree tree;

    int build(std::vector<std::size_t>& rows, int depth) {
        const std::size_t n = rows.size();
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t r : rows) {
            sum += residual[r];
            sumsq += residual[r] * residual[r];
        }
        const double mean = sum / double(n);
        const double sse = std::max(0.0, sumsq - sum * sum / double(n));

        const int node_id = int(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].value = mean;
        if (depth >= cfg.max_depth || n < 2 * std::size_t(cfg.min_samples_leaf) || sse <= pure_sse)
            return node_id;

        // Exact greedy search over midpoints of consecutive distinct values.
        int best_feature = -1;
        double best_threshold = 0.0, best_reduction = 0.0;
        std::vector<std::pair<double, double>> col(n);  // (x, residual)
        for (int f = 0; f < int(X.cols()); ++f) {
            for (std::size_t i = 0; i < n; ++i)
                col[i] = {X(Eigen::Index(rows[i]), f), residual[rows[i]]};
            std::sort(col.begin(), col.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double lsum = 0.0, lsumsq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                lsum += col[i].second;
                lsumsq += col[i].second * col[i].second;
                if (col[i].first == col[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < std::size_t(cfg.min_samples_leaf) || nr < std::size_t(cfg.min_samples_leaf))
                    continue;
                const double rsum = sum - lsum, rsumsq = sumsq - lsumsq;
                const double sse_l = lsumsq - lsum * lsum / double(nl);
                const double sse_r = rsumsq - rsum * rsum / double(nr);
                const double reduction = sse - sse_l - sse_r;
                if (reduction > best_reduction) {
                    best_reduction = reduction;
                    best_feature = f;
                    best_threshold = 0.5 * (col[i].first + col[i + 1].first);
                }
            }
        }
        if (best_feature < 0 || best_reduction <= pure_sse) return node_id;

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(n);
        right_rows.reserve(n);
        for (std::size_t r : rows)
            (X(Eigen::Index(r), best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);

        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        tree.nodes[node_id].gain = best_reduction;
        const int left = build(left_rows, depth + 1);
        tree.nodes[node_id].left = left;
        const int right = build(right_rows, depth + 1);
        tree.nodes[node_id].right = right;
        return node_id;
    }
};

}  // namespace detail

/// Fits `n_trees` depth-limited regression trees by gradient boosting on
/// squared error. Deterministic given seed (the seed only drives the optional
/// row subsample).
inline GBTEnsemble fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<int> attributes, const GBTConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (X.rows() != y.size()) throw DomainError("fit_gbt: X rows != y length");
    if (std::size_t(X.cols()) != attributes.size())
        throw DomainError("fit_gbt: attribute list does not match X columns");
    if (std::size_t(X.rows()) < 2 * std::size_t(cfg.min_samples_leaf))
        throw DomainError("fit_gbt: need at least 2*min_samples_leaf rows");
    if (!X.allFinite() || !y.allFinite()) throw DomainError("fit_gbt: absent or non-finite values");

    // Bound the working set with a uniform seeded subsample, gathered into a
    // dense block so tree building indexes positionally.
    Eigen::MatrixXd sub_X;
    Eigen::VectorXd sub_y;
    const Eigen::MatrixXd* Xp = &X;
    const Eigen::VectorXd* yp = &y;
    if (std::size_t(X.rows()) > cfg.max_rows) {
        std::vector<std::size_t> rows(std::size_t(X.rows()));
        std::iota(rows.begin(), rows.end(), 0);
        Rng rng(seed);
        for (std::size_t i = 0; i < cfg.max_rows; ++i)
            std::swap(rows[i], rows[i + rng.index(rows.size() - i)]);
        rows.resize(cfg.max_rows);
        std::sort(rows.begin(), rows.end());
        sub_X.resize(Eigen::Index(rows.size()), X.cols());
        sub_y.resize(Eigen::Index(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            sub_X.row(Eigen::Index(i)) = X.row(Eigen::Index(rows[i]));
            sub_y(Eigen::Index(i)) = y(Eigen::Index(rows[i]));
        }
        Xp = &sub_X;
        yp = &sub_y;
    }
    const Eigen::MatrixXd& Xf = *Xp;
    const Eigen::VectorXd& yf = *yp;
    const std::size_t n = std::size_t(Xf.rows());

    GBTEnsemble ens;
    ens.attributes = std::move(attributes);
    ens.learning_rate = cfg.learning_rate;
    ens.base = yf.mean();
    const double pure_sse = 1e-24 * std::max(1.0, yf.squaredNorm());

    std::vector<double> pred(n, ens.base), residual(n);
    std::vector<std::size_t> root_rows(n);
    for (int t = 0; t < cfg.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = yf(Eigen::Index(i)) - pred[i];
        detail::TreeBuilder builder{Xf, residual, cfg, pure_sse, {}};
        std::iota(root_rows.begin(), root_rows.end(), 0);
        builder.build(root_rows, 0);
        ens.trees.push_back(std::move(builder.tree));

        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += cfg.learning_rate * ens.trees.back().predict(Xf.row(Eigen::Index(i)));
            const double e = yf(Eigen::Index(i)) - pred[i];
            mse += e * e;
        }
        ens.train_mse.push_back(mse / double(n));
    }
    return ens;
}

/// Importance report over every ensemble feature (zero-weight features
/// included so top-k can cover the full set).
inline ImportanceReport importance(const GBTEnsemble& ens) {
    std::vector<ImportanceEntry> entries(ens.attributes.size());
    for (std::size_t f = 0; f < ens.attributes.size(); ++f) entries[f].attribute = ens.attributes[f];
    for (const auto& tree : ens.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) {
                entries[std::size_t(node.feature)].weight += 1;
                entries[std::size_t(node.feature)].gain += node.gain;
            }
    std::sort(entries.begin(), entries.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.gain != b.gain) return a.gain > b.gain;
        return a.attribute < b.attribute;
    });
    return ImportanceReport{std::move(entries)};
}

/// Top-k attributes by report order, emitted in ascending attribute order.
inline FeatureSet select_features(const ImportanceReport& report, int k) {
    if (k < 1 || std::size_t(k) > report.entries.size())
        throw DomainError("select_features: k out of range");
    std::vector<int> attrs;
    attrs.reserve(std::size_t(k));
    for (int i = 0; i < k; ++i) attrs.push_back(report.entries[std::size_t(i)].attribute);
    std::sort(attrs.begin(), attrs.end());
    return FeatureSet(std::move(attrs));
}

}  // namespace diskrul
