#pragma once

#include "lur/common.hpp"
#include "lur/models.hpp"
#include "lur/trees.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lur::explain {

struct ShapMatrix {
    double base_value = 0.0;
    Matrix values; // rows x features, dB(A)
    std::vector<std::string> feature_names;
    std::vector<std::string> row_ids;
    std::vector<std::string> cities;   // one per row, may be empty strings
    Matrix feature_values;             // raw inputs aligned with `values`
    std::vector<double> predictions;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t feature_index(const std::string &name) const;
};

/// Path-dependent TreeSHAP for a single tree, accumulating into `phi`
/// (size = number of features the tree indexes into).
void tree_shap_single(const models::RegressionTree &tree, std::span<const double> x, std::span<double> phi);

/// Ensemble attributions: phi = tree_weight * sum of per-tree values; the
/// returned base value is base_score + tree_weight * sum of cover-weighted tree
/// expectations, so base + sum(phi) equals the ensemble prediction.
double tree_shap(const models::TreeEnsemble &ensemble, std::span<const double> x, std::span<double> phi);

/// Attributions for a trained RF or GBT model on raw inputs. Columns the model
/// dropped before fitting receive exactly 0. The background set is implicit in
/// the node covers recorded at training time.
ShapMatrix tree_shap(const models::TrainedModel &model, const Matrix &x, const std::vector<std::string> &names,
                     const std::vector<std::string> &row_ids = {}, const std::vector<std::string> &cities = {},
                     unsigned threads = 0);

using ScalarModel = std::function<double(std::span<const double>)>;

/// Exact interventional Shapley values by enumerating all coalitions; v(S) is
/// the background mean of f with features in S taken from x.
std::vector<double> enumerate_shapley(const ScalarModel &f, std::span<const double> x, const Matrix &background,
                                      std::size_t feature_limit = 12);

struct Importance {
    std::string feature;
    double mean_abs = 0.0;
    std::map<std::string, double> by_city;
};

/// Sorted by mean |phi| descending, ties by feature name. top_k = 0 keeps all.
std::vector<Importance> importance_ranking(const ShapMatrix &shap, bool by_city = false, std::size_t top_k = 8);

struct BeeswarmRecord {
    std::string row_id;
    std::string city;
    std::string feature;
    double phi = 0.0;
    double value = 0.0;
    double normalized = 0.0; // min-max over all rows, 0.5 for a constant feature
};

std::vector<BeeswarmRecord> beeswarm_data(const ShapMatrix &shap);

/// (raw value, phi) pairs sorted by value. Throws ValidationError for an unknown feature.
std::vector<std::pair<double, double>> dependence_data(const ShapMatrix &shap, const std::string &feature);

/// shap_values.csv, shap_meta.json, importance.csv, importance_by_city.csv,
/// beeswarm.csv and one dependence_<feature>.csv per listed feature.
std::vector<std::filesystem::path> write_outputs(const std::filesystem::path &dir, const ShapMatrix &shap,
                                                 const std::vector<std::string> &dependence_features,
                                                 std::size_t top_k = 8);

} // namespace lur::explain
