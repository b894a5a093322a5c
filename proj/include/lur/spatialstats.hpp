#pragma once

#include "lur/common.hpp"
#include "lur/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace lur::spatial {

struct WeightMatrix {
    Matrix w; // n x n, zero diagonal
    double power = 1.0;
    bool row_standardized = true;

    std::size_t size() const { return static_cast<std::size_t>(w.rows()); }
};

/// w_ij = 1 / d_ij^power. Throws ValidationError naming the first coincident pair.
WeightMatrix inverse_distance_weights(std::span<const geo::Point> points, double power = 1.0,
                                      bool row_standardize = true);

/// I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2 with z = values - mean.
double morans_i(std::span<const double> values, const WeightMatrix &w);

struct PermutationResult {
    double observed = 0.0;
    double expected = 0.0; // -1 / (n - 1)
    double p_two_sided = 1.0;
    double p_greater = 1.0; // one-sided, positive autocorrelation
    double p_less = 1.0;    // one-sided, negative autocorrelation
    double permutation_mean = 0.0;
    int n_perm = 0;

    nlohmann::json to_json() const;
};

/// Monte Carlo test with one counter-based substream per permutation, so the
/// result is identical for any thread count.
PermutationResult permutation_test(std::span<const double> values, const WeightMatrix &w, int n_perm = 999,
                                   std::uint64_t seed = 0, unsigned threads = 0);

} // namespace lur::spatial
