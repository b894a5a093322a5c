#pragma once

#include "lur/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace lur::models {

struct LinearFit {
    double intercept = 0.0;
    std::vector<double> coef; // one per input column, 0 for columns left out

    double predict(std::span<const double> x) const;
};

struct StepwiseResult {
    LinearFit fit;
    std::vector<std::size_t> selected; // in order of entry
    std::vector<double> adj_r2_trace;  // [0] intercept-only (= 0), then after each entry
};

/// Greedy forward selection. Each step adds the column giving the smallest
/// residual sum of squares (lowest index on ties); selection stops when the
/// adjusted R^2 does not strictly improve or `selection_limit` columns are in.
/// Candidates that make the design rank deficient are skipped.
StepwiseResult fit_lm_forward(const Matrix &x, std::span<const double> y, std::size_t selection_limit);

/// Ordinary least squares with intercept on the given columns. Returns false
/// (leaving `out` untouched) when the design is rank deficient.
bool fit_ols(const Matrix &x, std::span<const double> y, const std::vector<std::size_t> &columns, LinearFit &out,
             double *rss = nullptr);

struct EnetResult {
    LinearFit fit;
    int sweeps = 0;
    bool converged = false;
};

/// Minimizes (1/2n)||y - X b - b0||^2 + lambda (alpha ||b||_1 + (1 - alpha)/2 ||b||^2)
/// by cyclic coordinate descent (max coefficient change < 1e-7 or 10,000 sweeps),
/// followed by an exact solve on the active set when that solve keeps the
/// signs and the optimality conditions.
EnetResult fit_enet(const Matrix &x, std::span<const double> y, double alpha, double lambda);

/// Largest violation of the elastic-net subgradient conditions at `fit`.
double enet_kkt_violation(const Matrix &x, std::span<const double> y, double alpha, double lambda,
                          const LinearFit &fit);

} // namespace lur::models
