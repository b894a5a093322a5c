#include "lur/explain.hpp"

#include "lur/io_util.hpp"
#include "lur/parallel.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace lur::explain {

std::size_t ShapMatrix::feature_index(const std::string &name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) {
        throw ValidationError(fmt::format("unknown feature '{}'", name));
    }
    return static_cast<std::size_t>(it - feature_names.begin());
}

namespace {

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double weight = 0.0;
};

using Path = std::vector<PathElement>;

void extend_path(Path &path, int depth, double zero_fraction, double one_fraction, int feature) {
    path[static_cast<std::size_t>(depth)] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    for (int i = depth - 1; i >= 0; --i) {
        auto &cur = path[static_cast<std::size_t>(i)];
        path[static_cast<std::size_t>(i) + 1].weight += one_fraction * cur.weight * (i + 1) / (depth + 1.0);
        cur.weight = zero_fraction * cur.weight * (depth - i) / (depth + 1.0);
    }
}

void unwind_path(Path &path, int depth, int index) {
    const double one = path[static_cast<std::size_t>(index)].one_fraction;
    const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
    double next_one = path[static_cast<std::size_t>(depth)].weight;
    for (int i = depth - 1; i >= 0; --i) {
        auto &cur = path[static_cast<std::size_t>(i)];
        if (one != 0.0) {
            const double tmp = cur.weight;
            cur.weight = next_one * (depth + 1.0) / ((i + 1.0) * one);
            next_one = tmp - cur.weight * zero * (depth - i) / (depth + 1.0);
        } else {
            cur.weight = cur.weight * (depth + 1.0) / (zero * (depth - i));
        }
    }
    for (int i = index; i < depth; ++i) {
        auto &dst = path[static_cast<std::size_t>(i)];
        const auto &src = path[static_cast<std::size_t>(i) + 1];
        dst.feature = src.feature;
        dst.zero_fraction = src.zero_fraction;
        dst.one_fraction = src.one_fraction;
    }
}

double unwound_sum(const Path &path, int depth, int index) {
    const double one = path[static_cast<std::size_t>(index)].one_fraction;
    const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
    double next_one = path[static_cast<std::size_t>(depth)].weight;
    double total = 0.0;
    for (int i = depth - 1; i >= 0; --i) {
        const auto &cur = path[static_cast<std::size_t>(i)];
        if (one != 0.0) {
            const double tmp = next_one * (depth + 1.0) / ((i + 1.0) * one);
            total += tmp;
            next_one = cur.weight - tmp * zero * ((depth - i) / (depth + 1.0));
        } else {
            total += (cur.weight / zero) / ((depth - i) / (depth + 1.0));
        }
    }
    return total;
}

void recurse(const models::RegressionTree &tree, int node, std::span<const double> x, std::span<double> phi,
             Path path, int depth, double zero_fraction, double one_fraction, int feature) {
    if (static_cast<int>(path.size()) <= depth) path.resize(static_cast<std::size_t>(depth) + 1);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const auto &n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf()) {
        for (int i = 1; i <= depth; ++i) {
            const double w = unwound_sum(path, depth, i);
            const auto &el = path[static_cast<std::size_t>(i)];
            phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * n.value;
        }
        return;
    }
    const int hot = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    const int cold = hot == n.left ? n.right : n.left;
    const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / n.cover;
    const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / n.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int index = 0;
    for (; index <= depth; ++index) {
        if (path[static_cast<std::size_t>(index)].feature == n.feature) break;
    }
    if (index != depth + 1) {
        incoming_zero = path[static_cast<std::size_t>(index)].zero_fraction;
        incoming_one = path[static_cast<std::size_t>(index)].one_fraction;
        unwind_path(path, depth, index);
        --depth;
    }
    recurse(tree, hot, x, phi, path, depth + 1, hot_zero * incoming_zero, incoming_one, n.feature);
    recurse(tree, cold, x, phi, path, depth + 1, cold_zero * incoming_zero, 0.0, n.feature);
}

} // namespace

void tree_shap_single(const models::RegressionTree &tree, std::span<const double> x, std::span<double> phi) {
    Path path(static_cast<std::size_t>(tree.depth()) + 2);
    recurse(tree, 0, x, phi, std::move(path), 0, 1.0, 1.0, -1);
}

double tree_shap(const models::TreeEnsemble &ensemble, std::span<const double> x, std::span<double> phi) {
    std::vector<double> acc(phi.size(), 0.0);
    double expected = 0.0;
    for (const auto &t : ensemble.trees) {
        tree_shap_single(t, x, acc);
        expected += t.expected_value();
    }
    for (std::size_t j = 0; j < phi.size(); ++j) phi[j] = ensemble.tree_weight * acc[j];
    return ensemble.base_score + ensemble.tree_weight * expected;
}

ShapMatrix tree_shap(const models::TrainedModel &model, const Matrix &x, const std::vector<std::string> &names,
                     const std::vector<std::string> &row_ids, const std::vector<std::string> &cities,
                     unsigned threads) {
    const auto &ens = model.ensemble();
    const auto rows = static_cast<std::size_t>(x.rows());
    if (static_cast<std::size_t>(x.cols()) != names.size()) {
        throw ValidationError("tree_shap: column names do not match the matrix");
    }
    if ((!row_ids.empty() && row_ids.size() != rows) || (!cities.empty() && cities.size() != rows)) {
        throw ValidationError("tree_shap: row ids or city labels do not match the row count");
    }
    ShapMatrix s;
    s.feature_names = model.feature_names;
    s.predictions = model.predict(x, names); // also checks for missing columns
    const auto d = s.feature_names.size();
    std::vector<Eigen::Index> raw_pos(d);
    for (std::size_t j = 0; j < d; ++j) {
        raw_pos[j] = std::find(names.begin(), names.end(), s.feature_names[j]) - names.begin();
    }
    // transform column k -> position in feature_names
    std::vector<std::size_t> active(model.transform.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
        active[k] = static_cast<std::size_t>(
            std::find(s.feature_names.begin(), s.feature_names.end(), model.transform.columns[k]) -
            s.feature_names.begin());
    }
    s.values = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    s.feature_values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            s.feature_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                x(static_cast<Eigen::Index>(i), raw_pos[j]);
        }
    }
    double expected = ens.base_score;
    {
        double sum = 0.0;
        for (const auto &t : ens.trees) sum += t.expected_value();
        expected += ens.tree_weight * sum;
    }
    s.base_value = expected;
    parallel_for(
        rows,
        [&](std::size_t i) {
            const auto k = active.size();
            std::vector<double> raw(k), z(k), phi(k, 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                raw[c] = s.feature_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(active[c]));
            }
            model.transform.apply_row(raw, z);
            tree_shap(ens, z, phi);
            for (std::size_t c = 0; c < k; ++c) {
                s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(active[c])) = phi[c];
            }
        },
        threads);
    s.row_ids = row_ids;
    if (s.row_ids.empty()) {
        for (std::size_t i = 0; i < rows; ++i) s.row_ids.push_back(std::to_string(i));
    }
    s.cities = cities.empty() ? std::vector<std::string>(rows) : cities;
    return s;
}

std::vector<double> enumerate_shapley(const ScalarModel &f, std::span<const double> x, const Matrix &background,
                                      std::size_t feature_limit) {
    const std::size_t d = x.size();
    if (d > feature_limit) {
        throw ValidationError(fmt::format("enumerate_shapley: {} features exceed the limit of {}", d, feature_limit));
    }
    if (background.rows() == 0 || static_cast<std::size_t>(background.cols()) != d) {
        throw ValidationError("enumerate_shapley: background must be non-empty with one column per feature");
    }
    const std::size_t subsets = std::size_t{1} << d;
    std::vector<double> v(subsets, 0.0);
    std::vector<double> hybrid(d);
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        double sum = 0.0;
        for (Eigen::Index b = 0; b < background.rows(); ++b) {
            for (std::size_t j = 0; j < d; ++j) {
                hybrid[j] = (mask >> j) & 1U ? x[j] : background(b, static_cast<Eigen::Index>(j));
            }
            sum += f(hybrid);
        }
        v[mask] = sum / static_cast<double>(background.rows());
    }
    // weight[s] = s! (d - s - 1)! / d!
    std::vector<double> weight(d);
    for (std::size_t s = 0; s < d; ++s) {
        double w = 1.0 / static_cast<double>(d);
        // 1/d * 1/C(d-1, s)
        double c = 1.0;
        for (std::size_t k = 1; k <= s; ++k) c = c * static_cast<double>(d - 1 - s + k) / static_cast<double>(k);
        weight[s] = w / c;
    }
    std::vector<double> phi(d, 0.0);
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t j = 0; j < d; ++j) {
            if ((mask >> j) & 1U) continue;
            phi[j] += weight[size] * (v[mask | (std::size_t{1} << j)] - v[mask]);
        }
    }
    return phi;
}

std::vector<Importance> importance_ranking(const ShapMatrix &shap, bool by_city, std::size_t top_k) {
    if (shap.rows() == 0) {
        throw ValidationError("importance_ranking: empty SHAP matrix");
    }
    std::vector<Importance> out;
    for (std::size_t j = 0; j < shap.feature_names.size(); ++j) {
        Importance imp;
        imp.feature = shap.feature_names[j];
        imp.mean_abs = shap.values.col(static_cast<Eigen::Index>(j)).cwiseAbs().mean();
        if (by_city) {
            std::map<std::string, std::pair<double, std::size_t>> acc;
            for (std::size_t i = 0; i < shap.rows(); ++i) {
                auto &[sum, cnt] = acc[shap.cities.empty() ? std::string() : shap.cities[i]];
                sum += std::abs(shap.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                ++cnt;
            }
            for (const auto &[city, sc] : acc) imp.by_city[city] = sc.first / static_cast<double>(sc.second);
        }
        out.push_back(std::move(imp));
    }
    std::sort(out.begin(), out.end(), [](const Importance &a, const Importance &b) {
        if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
        return a.feature < b.feature;
    });
    if (top_k > 0 && out.size() > top_k) out.resize(top_k);
    return out;
}

std::vector<BeeswarmRecord> beeswarm_data(const ShapMatrix &shap) {
    std::vector<BeeswarmRecord> out;
    const auto d = shap.feature_names.size();
    std::vector<double> lo(d), hi(d);
    for (std::size_t j = 0; j < d; ++j) {
        lo[j] = shap.feature_values.col(static_cast<Eigen::Index>(j)).minCoeff();
        hi[j] = shap.feature_values.col(static_cast<Eigen::Index>(j)).maxCoeff();
    }
    for (std::size_t i = 0; i < shap.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double v = shap.feature_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            BeeswarmRecord r;
            r.row_id = shap.row_ids[i];
            r.city = shap.cities.empty() ? std::string() : shap.cities[i];
            r.feature = shap.feature_names[j];
            r.phi = shap.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            r.value = v;
            r.normalized = hi[j] > lo[j] ? (v - lo[j]) / (hi[j] - lo[j]) : 0.5;
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<std::pair<double, double>> dependence_data(const ShapMatrix &shap, const std::string &feature) {
    const auto j = static_cast<Eigen::Index>(shap.feature_index(feature));
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < shap.rows(); ++i) {
        out.emplace_back(shap.feature_values(static_cast<Eigen::Index>(i), j),
                         shap.values(static_cast<Eigen::Index>(i), j));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
    return out;
}

std::vector<std::filesystem::path> write_outputs(const std::filesystem::path &dir, const ShapMatrix &shap,
                                                 const std::vector<std::string> &dependence_features,
                                                 std::size_t top_k) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string &name, const std::string &text) {
        io::write_text(dir / name, text);
        written.push_back(dir / name);
    };
    std::string values = "row_id,city";
    for (const auto &f : shap.feature_names) values += "," + io::csv_field(f);
    values += "\n";
    for (std::size_t i = 0; i < shap.rows(); ++i) {
        values += io::csv_field(shap.row_ids[i]) + "," + io::csv_field(shap.cities[i]);
        for (Eigen::Index j = 0; j < shap.values.cols(); ++j) {
            values += "," + io::format_double(shap.values(static_cast<Eigen::Index>(i), j));
        }
        values += "\n";
    }
    put("shap_values.csv", values);

    nlohmann::json meta = {{"base_value", shap.base_value},
                           {"rows", shap.rows()},
                           {"features", shap.feature_names},
                           {"value_function", "tree-path conditional expectation weighted by training covers"}};
    put("shap_meta.json", meta.dump(2) + "\n");

    std::string imp = "rank,feature,mean_abs_shap\n";
    const auto global = importance_ranking(shap, false, 0);
    for (std::size_t r = 0; r < global.size(); ++r) {
        imp += fmt::format("{},{},{}\n", r + 1, io::csv_field(global[r].feature), io::format_double(global[r].mean_abs));
    }
    put("importance.csv", imp);

    std::string city_imp = "feature,city,mean_abs_shap\n";
    for (const auto &e : importance_ranking(shap, true, top_k)) {
        for (const auto &[city, v] : e.by_city) {
            city_imp += fmt::format("{},{},{}\n", io::csv_field(e.feature), io::csv_field(city), io::format_double(v));
        }
    }
    put("importance_by_city.csv", city_imp);

    std::string bee = "row_id,city,feature,shap,value,normalized_value\n";
    for (const auto &r : beeswarm_data(shap)) {
        bee += fmt::format("{},{},{},{},{},{}\n", io::csv_field(r.row_id), io::csv_field(r.city),
                           io::csv_field(r.feature), io::format_double(r.phi), io::format_double(r.value),
                           io::format_double(r.normalized));
    }
    put("beeswarm.csv", bee);

    for (const auto &f : dependence_features) {
        std::string dep = "value,shap\n";
        for (const auto &[v, phi] : dependence_data(shap, f)) {
            dep += io::format_double(v) + "," + io::format_double(phi) + "\n";
        }
        put("dependence_" + f + ".csv", dep);
    }
    return written;
}

} // namespace lur::explain
