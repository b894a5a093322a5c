#pragma once

#include "lur/common.hpp"
#include "lur/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lur::validation {

using Indices = std::vector<std::size_t>;

/// Outer folds per repeat plus inner folds over each outer-training set. All
/// index lists are sorted row indices into the full data set.
struct FoldPlan {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    int repeats = 4;
    int folds = 10;
    int inner_folds = 10;
    std::vector<std::vector<Indices>> outer;              // [repeat][fold] -> test rows
    std::vector<std::vector<std::vector<Indices>>> inner; // [repeat][fold][inner] -> inner-test rows

    Indices outer_train(int repeat, int fold) const;
    Indices inner_train(int repeat, int fold, int inner_fold) const;
};

/// Plain random permutation per repeat; permuted position i goes to fold i % k.
FoldPlan make_fold_plan(std::size_t n, std::uint64_t seed, int repeats = 4, int folds = 10, int inner_folds = 10);

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);
/// Squared Pearson correlation. Throws ValidationError when either side is constant.
double r2(std::span<const double> y, std::span<const double> yhat);
/// 1 - SS_res / SS_tot.
double r2_ss(std::span<const double> y, std::span<const double> yhat);

/// Two-tailed rank-sum test with midranks. Exact null distribution when both
/// samples have at most 10 values and there are no ties, otherwise the normal
/// approximation with tie and continuity corrections.
double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);
/// Exact two-tailed p by enumerating every assignment of ranks (small n oracle
/// and the exact branch's definition).
double wilcoxon_exact(std::size_t n1, std::size_t n2, double rank_sum_a);

std::vector<double> benjamini_hochberg(std::span<const double> pvals);

struct FamilyConfig {
    models::Family family = models::Family::GBT;
    std::string label; // defaults to the family name
    std::vector<models::HyperMap> grid;
    models::PreprocessPolicy policy;

    std::string name() const { return label.empty() ? models::to_string(family) : label; }
};

FamilyConfig default_family_config(models::Family f);

struct FoldResult {
    std::string family;
    int repeat = 0;
    int fold = 0;
    double rmse = 0.0;
    double mae = 0.0;
    std::optional<double> r2;
    double r2_ss = 0.0;
    std::size_t grid_index = 0;
    models::Resolved hyper;
    std::vector<double> inner_rmse; // mean inner RMSE per grid point (empty for one-point grids)
    preprocess::FittedTransform transform;
    Indices test_rows;
    std::vector<double> predictions;
};

struct CityMetric {
    std::string family;
    int repeat = 0;
    int fold = 0;
    std::string city;
    std::size_t n = 0;
    double rmse = 0.0;
    double mae = 0.0;
};

struct FamilySummary {
    std::string family;
    double mean_rmse = 0.0;
    double mean_mae = 0.0;
    std::optional<double> mean_r2;
    double mean_r2_ss = 0.0;
    std::size_t r2_missing = 0;
    double sd_rmse = 0.0;
};

struct PairTest {
    std::string a;
    std::string b;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

struct Comparison {
    std::string winner;
    std::vector<PairTest> pairs;
    double alpha = 0.05;
};

struct CVReport {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    int repeats = 0;
    int folds = 0;
    int inner_folds = 0;
    std::vector<std::string> families; // declaration order
    std::vector<FoldResult> fold_results;
    std::vector<CityMetric> city_metrics;
    std::vector<FamilySummary> summaries;
    Comparison comparison;
    /// Mean out-of-fold residual (y - yhat) per row across repeats, per family.
    std::vector<std::vector<double>> oof_residuals;
    nlohmann::json residual_diagnostics = nlohmann::json::object();

    const FamilySummary &summary(const std::string &family) const;
    std::vector<double> fold_rmse(const std::string &family) const;

    nlohmann::json to_json() const;
    /// report.json, fold_metrics.csv, pairwise_tests.csv, city_metrics.csv, boxplot_data.csv
    std::vector<std::filesystem::path> write(const std::filesystem::path &dir) const;
};

/// Winner = lowest mean outer RMSE (declaration order on ties); every pair gets
/// a rank-sum test on the per-fold RMSE vectors, BH-adjusted over all pairs.
Comparison compare_models(const CVReport &report, double alpha = 0.05);

std::vector<FamilySummary> summarize(const CVReport &report);

struct CvOptions {
    unsigned threads = 0;
    bool keep_predictions = true;
};

/// Nested cross-validation. Preprocessing is fitted on each training partition
/// only and shared across grid points and families with the same policy.
/// Model seeds derive from (plan seed, repeat, fold, inner fold), not from the
/// family, so identical configurations produce identical metrics.
CVReport nested_cv(const Matrix &x, const std::vector<std::string> &names, std::span<const double> y,
                   const std::vector<std::string> &cities, const std::vector<FamilyConfig> &families,
                   const FoldPlan &plan, const CvOptions &options = {});

struct TuneResult {
    std::vector<double> cv_rmse; // mean held-out RMSE per grid point
    std::size_t best = 0;        // lowest mean RMSE, first on ties
};

/// Single-level k-fold search over a family's grid, used to pick the
/// hyperparameters of a final model fitted on all rows.
TuneResult tune(const Matrix &x, const std::vector<std::string> &names, std::span<const double> y,
                const FamilyConfig &family, const std::vector<Indices> &test_folds, std::uint64_t seed,
                unsigned threads = 0);

} // namespace lur::validation
