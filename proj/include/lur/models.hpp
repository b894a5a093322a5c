#pragma once

#include "lur/common.hpp"
#include "lur/linear.hpp"
#include "lur/preprocess.hpp"
#include "lur/svr.hpp"
#include "lur/trees.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lur::models {

enum class Family { LM, ENET, SVR, RF, GBT };

std::string to_string(Family f);
Family parse_family(const std::string &s);
const std::vector<Family> &all_families();

/// A hyperparameter is either a number or an expression in the active feature
/// count d: "sqrt(d)", "d/3", "d/2", "1/(2d)", "1/d", "2/d", "d".
struct HyperValue {
    std::optional<double> number;
    std::string expression;

    HyperValue() = default;
    HyperValue(double v) : number(v) {}
    HyperValue(const char *e) : expression(e) {}
    HyperValue(std::string e) : expression(std::move(e)) {}

    double resolve(std::size_t d) const;
    std::string str() const;

    nlohmann::json to_json() const;
    static HyperValue from_json(const nlohmann::json &j);

    friend bool operator==(const HyperValue &, const HyperValue &) = default;
};

using HyperMap = std::map<std::string, HyperValue>;
using Resolved = std::map<std::string, double>;

struct PreprocessPolicy {
    bool yeo_johnson = true;
    bool standardize = true;
    bool vif_screen = false;
    double vif_threshold = 10.0;

    friend bool operator==(const PreprocessPolicy &, const PreprocessPolicy &) = default;
    nlohmann::json to_json() const;
    static PreprocessPolicy from_json(const nlohmann::json &j);
};

/// LM: Yeo-Johnson + standardize + VIF screen. ENET, SVR: Yeo-Johnson +
/// standardize. RF, GBT: untransformed.
PreprocessPolicy default_policy(Family f);

struct ModelSpec {
    Family family = Family::GBT;
    HyperMap hyper; // missing names take the family defaults
    PreprocessPolicy policy;
    std::uint64_t seed = 0;

    static ModelSpec make(Family f, HyperMap hyper = {}, std::uint64_t seed = 0);
};

/// Family defaults; every accepted hyperparameter name appears here.
HyperMap default_hyper(Family f);

/// Fills defaults, resolves expressions against d and checks ranges.
/// Throws ValidationError naming the offending hyperparameter.
Resolved resolve_hyper(Family f, const HyperMap &hyper, std::size_t d);

/// Grid axes; expanded in lexical name order with the last axis varying fastest.
using GridAxes = std::map<std::string, std::vector<HyperValue>>;

std::vector<HyperMap> expand_grid(const GridAxes &axes);
GridAxes default_grid_axes(Family f);

/// Output of the per-partition preprocessing, reusable across grid points.
struct Prepared {
    preprocess::FittedTransform transform;
    Matrix z; // transformed training matrix, columns in transform order
    std::vector<std::string> dropped_constant;
    std::vector<std::string> dropped_vif;
};

/// Drops constant columns, fits the transform, applies the VIF screen.
Prepared prepare(const PreprocessPolicy &policy, const Matrix &x, const std::vector<std::string> &names);

struct LinearParams {
    LinearFit fit;
};

struct Diagnostics {
    std::optional<double> oob_mse;
    std::vector<std::string> selected;
    std::vector<double> adj_r2_trace;
    std::vector<double> training_mse;
    std::optional<double> kkt_gap;
    std::optional<int> sweeps;
    std::optional<std::size_t> n_support;
    std::vector<std::string> dropped_constant;
    std::vector<std::string> dropped_vif;

    nlohmann::json to_json() const;
    static Diagnostics from_json(const nlohmann::json &j);
};

struct TrainedModel {
    Family family = Family::GBT;
    Resolved hyper;
    PreprocessPolicy policy;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::vector<std::string> feature_names; // training input columns
    preprocess::FittedTransform transform;  // active columns only
    std::variant<LinearParams, SvrModel, TreeEnsemble> params;
    Diagnostics diagnostics;

    /// Columns are matched by name; extra columns are ignored.
    std::vector<double> predict(const Matrix &x, const std::vector<std::string> &names) const;
    /// Input already in transform space (columns = transform.columns).
    double predict_transformed(std::span<const double> z) const;

    bool is_tree() const { return family == Family::RF || family == Family::GBT; }
    const TreeEnsemble &ensemble() const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json &j);
    void save(const std::filesystem::path &path) const;
    static TrainedModel load(const std::filesystem::path &path);
};

inline constexpr int kModelFormatVersion = 1;

TrainedModel fit_model(const ModelSpec &spec, const Matrix &x, const std::vector<std::string> &names,
                       std::span<const double> y, unsigned threads = 0);

/// Fits on an already prepared partition. `feature_names` are the raw input
/// columns the preparation started from.
TrainedModel fit_prepared(const ModelSpec &spec, const Prepared &prep, const std::vector<std::string> &feature_names,
                          std::span<const double> y, unsigned threads = 0);

} // namespace lur::models
