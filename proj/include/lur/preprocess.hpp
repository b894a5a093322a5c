#pragma once

#include "lur/common.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lur::preprocess {

inline constexpr double kLambdaMin = -5.0;
inline constexpr double kLambdaMax = 5.0;

/// Yeo-Johnson power transform. Total, continuous in lambda, strictly
/// increasing in y.
double yeo_johnson(double y, double lambda);

/// Gaussian profile log-likelihood of the transformed sample, Jacobian included.
double yeo_johnson_log_likelihood(std::span<const double> values, double lambda);

/// Maximum-likelihood lambda on [-5, 5]: 101-point grid, then golden-section
/// refinement around the best grid point. Needs at least 3 distinct values.
double fit_lambda(std::span<const double> values);

/// Per-column Yeo-Johnson lambda plus optional standardization, fitted once and
/// then applied verbatim. Columns are matched by name on apply.
struct FittedTransform {
    std::vector<std::string> columns;
    std::vector<double> lambdas;
    std::vector<double> means; // of the transformed training column
    std::vector<double> sds;   // sample SD (n - 1); 1 when not standardizing
    bool standardize = true;

    std::size_t size() const { return columns.size(); }

    /// Input columns must be in `columns` order.
    Matrix apply(const Matrix &x) const;
    void apply_row(std::span<const double> in, std::span<double> out) const;

    nlohmann::json to_json() const;
    static FittedTransform from_json(const nlohmann::json &j);

    friend bool operator==(const FittedTransform &, const FittedTransform &) = default;
};

/// Fits lambdas (identity for columns with fewer than 3 distinct values, or for
/// all columns when `fit_lambdas` is false) and, when requested, standardizes to
/// mean 0 / SD 1. Constant columns throw.
std::pair<FittedTransform, Matrix> fit_transform(const Matrix &x, const std::vector<std::string> &columns,
                                                 bool standardize = true, bool fit_lambdas = true);

/// Reorders `x` (named by `columns`) into the transform's order and applies it.
/// Throws ValidationError naming the first missing column.
Matrix apply_transform(const FittedTransform &t, const Matrix &x, const std::vector<std::string> &columns);

/// Variance inflation factors, one per column; +inf for exactly collinear columns.
std::vector<double> variance_inflation(const Matrix &x);

/// Iteratively drops the column with the largest VIF (lowest index on ties)
/// while any VIF exceeds `threshold`. Returns the retained column indices in
/// ascending order.
std::vector<std::size_t> vif_screen(const Matrix &x, double threshold = 10.0);

bool is_constant(std::span<const double> values);
std::size_t count_distinct(std::span<const double> values, std::size_t stop_at = 3);

} // namespace lur::preprocess
