#include "lur/trees.hpp"

#include "lur/parallel.hpp"
#include "lur/rng.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lur::models {

// ---------------------------------------------------------------------------
// RegressionTree
// ---------------------------------------------------------------------------

int RegressionTree::leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto &n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

double RegressionTree::predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto &n = nodes[i];
        if (!n.is_leaf()) {
            d[static_cast<std::size_t>(n.left)] = d[i] + 1;
            d[static_cast<std::size_t>(n.right)] = d[i] + 1;
            best = std::max(best, d[i] + 1);
        }
    }
    return best;
}

void RegressionTree::validate(std::size_t n_features) const {
    if (nodes.empty()) {
        throw ValidationError("tree without nodes");
    }
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto &n = nodes[i];
        if (!(n.cover > 0.0)) {
            throw ValidationError(fmt::format("tree node {} has non-positive cover", i));
        }
        if (n.is_leaf()) {
            if (!std::isfinite(n.value)) {
                throw ValidationError(fmt::format("tree leaf {} has non-finite value", i));
            }
            continue;
        }
        if (static_cast<std::size_t>(n.feature) >= n_features || !std::isfinite(n.threshold)) {
            throw ValidationError(fmt::format("tree node {} has an invalid split", i));
        }
        for (int c : {n.left, n.right}) {
            if (c <= static_cast<int>(i) || static_cast<std::size_t>(c) >= nodes.size()) {
                throw ValidationError(fmt::format("tree node {} has an invalid child {}", i, c));
            }
            ++parents[static_cast<std::size_t>(c)];
        }
    }
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (parents[i] != 1) {
            throw ValidationError(fmt::format("tree node {} is not reachable exactly once", i));
        }
    }
}

double RegressionTree::expected_value() const {
    double total = 0.0;
    double cover = 0.0;
    for (const auto &n : nodes) {
        if (n.is_leaf()) {
            total += n.value * n.cover;
            cover += n.cover;
        }
    }
    return total / cover;
}

nlohmann::json RegressionTree::to_json() const {
    // Compact row per node: [feature, threshold, left, right, value, cover].
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &n : nodes) {
        rows.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.cover});
    }
    return rows;
}

RegressionTree RegressionTree::from_json(const nlohmann::json &j) {
    RegressionTree t;
    for (const auto &row : j) {
        if (!row.is_array() || row.size() != 6) {
            throw ValidationError("tree node must have 6 fields");
        }
        t.nodes.push_back({row[0].get<int>(), row[1].get<double>(), row[2].get<int>(), row[3].get<int>(),
                           row[4].get<double>(), row[5].get<double>()});
    }
    return t;
}

double TreeEnsemble::predict(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto &t : trees) {
        sum += t.predict(x);
    }
    return base_score + tree_weight * sum;
}

namespace {

double midpoint(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    // Adjacent doubles: keep lo so that lo <= t < hi still separates them.
    return (mid >= hi) ? lo : mid;
}

// Threshold after value v: midpoint to the next distinct value of the whole
// training column, not of the node sample, so that every training row routes
// the same way under any strictly monotone transform of the feature.
double split_threshold(const std::vector<double> &column_sorted, double v) {
    const auto it = std::upper_bound(column_sorted.begin(), column_sorted.end(), v);
    return it == column_sorted.end() ? v : midpoint(v, *it);
}

std::vector<std::vector<double>> sorted_columns(const Matrix &x) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        auto &c = out[static_cast<std::size_t>(j)];
        c.assign(x.col(j).data(), x.col(j).data() + x.rows());
        std::sort(c.begin(), c.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// random forest
// ---------------------------------------------------------------------------

RegressionTree grow_cart(const Matrix &x, const std::vector<std::vector<double>> &columns, std::span<const double> y,
                         std::vector<std::size_t> samples, const RfParams &p, Rng &rng) {
    const auto d = static_cast<std::size_t>(x.cols());
    const auto mtry = static_cast<std::size_t>(std::clamp<int>(p.mtry, 1, static_cast<int>(d)));
    RegressionTree tree;
    struct Pending {
        int node;
        std::vector<std::size_t> samples;
    };
    std::vector<Pending> stack;
    tree.nodes.push_back({});
    stack.push_back({0, std::move(samples)});
    std::vector<std::size_t> order;
    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        const auto &s = cur.samples;
        const auto n = s.size();
        double sum = 0.0;
        bool pure = true;
        for (auto i : s) {
            sum += y[i];
            pure = pure && (y[i] == y[s.front()]);
        }
        auto &node = tree.nodes[static_cast<std::size_t>(cur.node)];
        node.cover = static_cast<double>(n);
        node.value = pure ? y[s.front()] : sum / static_cast<double>(n);
        if (pure || n <= static_cast<std::size_t>(p.min_node) || n < 2) {
            continue;
        }
        auto features = rng.sample_without_replacement(d, mtry);
        std::sort(features.begin(), features.end());
        const double parent_score = sum * sum / static_cast<double>(n);
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (auto f : features) {
            const auto fc = static_cast<Eigen::Index>(f);
            order = s;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = x(static_cast<Eigen::Index>(a), fc);
                const double vb = x(static_cast<Eigen::Index>(b), fc);
                return va < vb || (va == vb && a < b);
            });
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_sum += y[order[k]];
                const double v = x(static_cast<Eigen::Index>(order[k]), fc);
                const double v_next = x(static_cast<Eigen::Index>(order[k + 1]), fc);
                if (v == v_next) {
                    continue;
                }
                const double nl = static_cast<double>(k + 1);
                const double nr = static_cast<double>(n - k - 1);
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = split_threshold(columns[f], v);
                }
            }
        }
        if (best_feature < 0) {
            continue;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto i : s) {
            (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right).push_back(i);
        }
        const int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto &parent = tree.nodes[static_cast<std::size_t>(cur.node)];
        parent.feature = best_feature;
        parent.threshold = best_threshold;
        parent.left = left_id;
        parent.right = left_id + 1;
        // Right pushed first so the left subtree is grown first.
        stack.push_back({left_id + 1, std::move(right)});
        stack.push_back({left_id, std::move(left)});
    }
    return tree;
}

} // namespace

RfResult fit_random_forest(const Matrix &x, std::span<const double> y, const RfParams &p, std::uint64_t seed,
                           unsigned threads) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0 || y.size() != n) {
        throw ValidationError("random forest: X and y sizes differ or are empty");
    }
    if (p.n_trees < 1) {
        throw ValidationError("random forest: n_trees must be >= 1");
    }
    if (p.min_node < 1 || static_cast<std::size_t>(p.min_node) > n) {
        throw ValidationError(fmt::format("random forest: min_node {} outside [1, n={}]", p.min_node, n));
    }
    if (p.mtry < 1 || p.mtry > x.cols()) {
        throw ValidationError(fmt::format("random forest: mtry {} outside [1, {}]", p.mtry, x.cols()));
    }
    const auto n_trees = static_cast<std::size_t>(p.n_trees);
    std::vector<RegressionTree> trees(n_trees);
    std::vector<std::vector<char>> in_bag(n_trees);
    const auto columns = sorted_columns(x);
    parallel_for(
        n_trees,
        [&](std::size_t t) {
            Rng rng(derive_key(seed, {0x52465452ULL, t}));
            std::vector<std::size_t> samples(n);
            in_bag[t].assign(n, 0);
            for (std::size_t i = 0; i < n; ++i) {
                samples[i] = p.bootstrap ? static_cast<std::size_t>(rng.below(n)) : i;
                in_bag[t][samples[i]] = 1;
            }
            std::sort(samples.begin(), samples.end());
            trees[t] = grow_cart(x, columns, y, std::move(samples), p, rng);
        },
        threads);

    RfResult out;
    out.ensemble.base_score = 0.0;
    out.ensemble.tree_weight = 1.0 / static_cast<double>(n_trees);
    out.ensemble.trees = std::move(trees);
    if (p.bootstrap) {
        double sse = 0.0;
        std::size_t counted = 0;
        std::vector<double> row(static_cast<std::size_t>(x.cols()));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                row[j] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            double sum = 0.0;
            std::size_t k = 0;
            for (std::size_t t = 0; t < n_trees; ++t) {
                if (!in_bag[t][i]) {
                    sum += out.ensemble.trees[t].predict(row);
                    ++k;
                }
            }
            if (k > 0) {
                const double e = sum / static_cast<double>(k) - y[i];
                sse += e * e;
                ++counted;
            }
        }
        if (counted > 0) {
            out.oob_mse = sse / static_cast<double>(counted);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// gradient boosting
// ---------------------------------------------------------------------------

namespace {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Row indices of each feature in ascending value order, with the values alongside.
struct SortedColumns {
    std::vector<std::vector<std::size_t>> index;
    std::vector<std::vector<double>> value;
};

// Level-wise exact greedy growth. Each frontier node owns the same contiguous
// segment [begin, end) in every per-feature array, so the split scan reads
// memory sequentially; after a split the segments are stably partitioned.
RegressionTree grow_boosted_tree(const Matrix &x, const SortedColumns &sorted, const std::vector<double> &grad,
                                 const std::vector<char> &sampled, const std::vector<std::size_t> &features,
                                 const GbtParams &p) {
    const auto n = grad.size();
    const double lambda = p.reg_lambda;
    // Hessians are sample counts, so 1 / (h + lambda) comes from a table.
    std::vector<double> inv(n + 1);
    for (std::size_t h = 0; h <= n; ++h) inv[h] = 1.0 / (static_cast<double>(h) + lambda);
    auto leaf_value = [&](double g, std::size_t h) { return p.eta * (-g * inv[h]); };

    std::size_t m = 0;
    for (char c : sampled) m += c ? 1 : 0;
    const std::size_t nf = features.size();
    std::vector<std::size_t> idx(nf * m), idx_tmp(m);
    std::vector<double> val(nf * m), val_tmp(m), gs(nf * m), gs_tmp(m);
    for (std::size_t fi = 0; fi < nf; ++fi) {
        const auto &order = sorted.index[features[fi]];
        const auto &values = sorted.value[features[fi]];
        std::size_t k = fi * m;
        for (std::size_t pos = 0; pos < n; ++pos) {
            const auto i = order[pos];
            if (!sampled[i]) continue;
            idx[k] = i;
            val[k] = values[pos];
            gs[k] = grad[i];
            ++k;
        }
    }

    struct Segment {
        int node;
        std::size_t begin;
        std::size_t end;
        double g;
        SplitCandidate best;
    };
    auto segment_sum = [&](std::size_t b, std::size_t e) {
        double g = 0.0;
        for (std::size_t k = b; k < e; ++k) g += gs[k];
        return g;
    };

    RegressionTree tree;
    std::vector<Segment> frontier{{0, 0, m, segment_sum(0, m), {}}};
    tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(frontier[0].g, m), static_cast<double>(m)});
    std::vector<char> goes_left(n, 0);

    for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
        for (auto &seg : frontier) {
            const std::size_t cnt = seg.end - seg.begin;
            const double parent = seg.g * seg.g * inv[cnt];
            for (std::size_t fi = 0; fi < nf; ++fi) {
                const double *v = val.data() + fi * m;
                const double *g = gs.data() + fi * m;
                double gl = 0.0;
                for (std::size_t k = seg.begin; k + 1 < seg.end; ++k) {
                    gl += g[k];
                    if (v[k] == v[k + 1]) continue;
                    const std::size_t hl = k - seg.begin + 1, hr = cnt - hl;
                    if (static_cast<double>(hl) < p.min_child_weight || static_cast<double>(hr) < p.min_child_weight) {
                        continue;
                    }
                    const double gr = seg.g - gl;
                    const double gain = 0.5 * (gl * gl * inv[hl] + gr * gr * inv[hr] - parent) - p.reg_gamma;
                    if (gain > seg.best.gain) {
                        seg.best = {gain, static_cast<int>(features[fi]), split_threshold(sorted.value[features[fi]], v[k])};
                    }
                }
            }
        }
        std::vector<Segment> next;
        for (const auto &seg : frontier) {
            if (seg.best.feature < 0) continue;
            const int left = static_cast<int>(tree.nodes.size());
            auto &node = tree.nodes[static_cast<std::size_t>(seg.node)];
            node.feature = seg.best.feature;
            node.threshold = seg.best.threshold;
            node.left = left;
            node.right = left + 1;
            std::size_t nl = 0;
            for (std::size_t k = seg.begin; k < seg.end; ++k) {
                const auto i = idx[k];
                goes_left[i] = x(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? 1 : 0;
                nl += static_cast<std::size_t>(goes_left[i]);
            }
            for (std::size_t fi = 0; fi < nf; ++fi) {
                const std::size_t off = fi * m;
                std::size_t l = 0, r = nl;
                for (std::size_t k = off + seg.begin; k < off + seg.end; ++k) {
                    const std::size_t dst = goes_left[idx[k]] ? l++ : r++;
                    idx_tmp[dst] = idx[k];
                    val_tmp[dst] = val[k];
                    gs_tmp[dst] = gs[k];
                }
                const std::size_t cnt = seg.end - seg.begin;
                std::copy_n(idx_tmp.begin(), cnt, idx.begin() + static_cast<long>(off + seg.begin));
                std::copy_n(val_tmp.begin(), cnt, val.begin() + static_cast<long>(off + seg.begin));
                std::copy_n(gs_tmp.begin(), cnt, gs.begin() + static_cast<long>(off + seg.begin));
            }
            const std::size_t nr = seg.end - seg.begin - nl;
            const Segment l{left, seg.begin, seg.begin + nl, segment_sum(seg.begin, seg.begin + nl), {}};
            const Segment r{left + 1, seg.begin + nl, seg.end, segment_sum(seg.begin + nl, seg.end), {}};
            tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(l.g, nl), static_cast<double>(nl)});
            tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(r.g, nr), static_cast<double>(nr)});
            next.push_back(l);
            next.push_back(r);
        }
        frontier = std::move(next);
    }
    for (auto &node : tree.nodes) {
        if (!node.is_leaf()) {
            node.value = 0.0;
        }
    }
    return tree;
}

} // namespace

GbtResult fit_gradient_boosting(const Matrix &x, std::span<const double> y, const GbtParams &p, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    if (n == 0 || y.size() != n) {
        throw ValidationError("gradient boosting: X and y sizes differ or are empty");
    }
    if (!(p.eta > 0.0 && p.eta <= 1.0) || p.max_depth < 1 || p.rounds < 0 || !(p.subsample > 0.0 && p.subsample <= 1.0) ||
        !(p.colsample > 0.0 && p.colsample <= 1.0) || p.reg_lambda < 0.0 || p.reg_gamma < 0.0 ||
        !(p.min_child_weight > 0.0)) {
        throw ValidationError("gradient boosting: hyperparameter out of range");
    }
    SortedColumns sorted;
    sorted.index.resize(d);
    sorted.value.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
        auto &idx = sorted.index[f];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        const auto fc = static_cast<Eigen::Index>(f);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return x(static_cast<Eigen::Index>(a), fc) < x(static_cast<Eigen::Index>(b), fc);
        });
        sorted.value[f].resize(n);
        for (std::size_t k = 0; k < n; ++k) sorted.value[f][k] = x(static_cast<Eigen::Index>(idx[k]), fc);
    }

    GbtResult out;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    out.ensemble.base_score = mean;
    out.ensemble.tree_weight = 1.0;

    std::vector<double> pred(n, mean);
    auto mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
        return s / static_cast<double>(n);
    };
    out.training_mse.push_back(mse());

    const auto n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p.subsample * static_cast<double>(n))));
    const auto n_cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p.colsample * static_cast<double>(d))));
    std::vector<double> grad(n);
    std::vector<char> sampled(n);
    for (int round = 0; round < p.rounds; ++round) {
        Rng rng(derive_key(seed, {0x47425452ULL, static_cast<std::uint64_t>(round)}));
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = pred[i] - y[i];
        }
        if (n_rows >= n) {
            std::fill(sampled.begin(), sampled.end(), 1);
        } else {
            std::fill(sampled.begin(), sampled.end(), 0);
            for (auto i : rng.sample_without_replacement(n, n_rows)) sampled[i] = 1;
        }
        std::vector<std::size_t> features;
        if (n_cols >= d) {
            features.resize(d);
            std::iota(features.begin(), features.end(), std::size_t{0});
        } else {
            features = rng.sample_without_replacement(d, n_cols);
            std::sort(features.begin(), features.end());
        }
        auto tree = grow_boosted_tree(x, sorted, grad, sampled, features, p);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            int id = 0;
            while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
                const auto &node = tree.nodes[static_cast<std::size_t>(id)];
                id = x(r, node.feature) <= node.threshold ? node.left : node.right;
            }
            pred[i] += tree.nodes[static_cast<std::size_t>(id)].value;
        }
        out.ensemble.trees.push_back(std::move(tree));
        out.training_mse.push_back(mse());
    }
    return out;
}

} // namespace lur::models
