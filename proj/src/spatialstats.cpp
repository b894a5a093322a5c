#include "lur/spatialstats.hpp"

#include "lur/parallel.hpp"
#include "lur/rng.hpp"

#include <fmt/core.h>

#include <cmath>
#include <numeric>

namespace lur::spatial {

WeightMatrix inverse_distance_weights(std::span<const geo::Point> points, double power, bool row_standardize) {
    const std::size_t n = points.size();
    if (n < 3) {
        throw ValidationError(fmt::format("inverse distance weights need at least 3 points, got {}", n));
    }
    if (!(power > 0.0) || !std::isfinite(power)) {
        throw ValidationError("inverse distance power must be positive");
    }
    WeightMatrix out;
    out.power = power;
    out.row_standardized = row_standardize;
    out.w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = geo::distance(points[i], points[j]);
            if (!(d > 0.0)) {
                throw ValidationError(fmt::format("points {} and {} coincide", i, j));
            }
            const double w = power == 1.0 ? 1.0 / d : std::pow(d, -power);
            out.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
            out.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
        }
    }
    if (row_standardize) {
        for (Eigen::Index i = 0; i < out.w.rows(); ++i) {
            out.w.row(i) /= out.w.row(i).sum();
        }
    }
    return out;
}

namespace {

struct Prepared {
    std::vector<double> z;
    double s0 = 0.0;
    double denom = 0.0;
};

Prepared center(std::span<const double> values, const WeightMatrix &w) {
    const std::size_t n = values.size();
    if (n != w.size()) {
        throw ValidationError(fmt::format("{} values for a {}x{} weight matrix", n, w.size(), w.size()));
    }
    Prepared p;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    p.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.z[i] = values[i] - mean;
        p.denom += p.z[i] * p.z[i];
    }
    // Constant input can leave rounding-level residue; compare against the data scale.
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v));
    if (!(p.denom > 1e-24 * scale * scale * static_cast<double>(n))) {
        throw ValidationError("Moran's I is undefined for constant values");
    }
    p.s0 = w.w.sum();
    return p;
}

double statistic(const std::vector<double> &z, const WeightMatrix &w, double s0, double denom) {
    const auto n = static_cast<Eigen::Index>(z.size());
    double num = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) row += w.w(i, j) * z[static_cast<std::size_t>(j)];
        num += z[static_cast<std::size_t>(i)] * row;
    }
    return static_cast<double>(n) / s0 * num / denom;
}

} // namespace

double morans_i(std::span<const double> values, const WeightMatrix &w) {
    const auto p = center(values, w);
    return statistic(p.z, w, p.s0, p.denom);
}

nlohmann::json PermutationResult::to_json() const {
    return {{"morans_i", observed},
            {"expected", expected},
            {"p_two_sided", p_two_sided},
            {"p_greater", p_greater},
            {"p_less", p_less},
            {"permutation_mean", permutation_mean},
            {"n_perm", n_perm}};
}

PermutationResult permutation_test(std::span<const double> values, const WeightMatrix &w, int n_perm,
                                   std::uint64_t seed, unsigned threads) {
    if (n_perm < 1) {
        throw ValidationError("permutation test needs at least one permutation");
    }
    const auto p = center(values, w);
    PermutationResult res;
    res.n_perm = n_perm;
    res.observed = statistic(p.z, w, p.s0, p.denom);
    res.expected = -1.0 / (static_cast<double>(values.size()) - 1.0);
    std::vector<double> perm_i(static_cast<std::size_t>(n_perm));
    parallel_for(
        perm_i.size(),
        [&](std::size_t k) {
            Rng rng(derive_key(seed, {0x4d4f52414eULL, k}));
            auto z = p.z;
            rng.shuffle(z);
            perm_i[k] = statistic(z, w, p.s0, p.denom);
        },
        threads);
    const double obs_dev = std::abs(res.observed - res.expected);
    int extreme = 0, greater = 0, less = 0;
    double sum = 0.0;
    for (double v : perm_i) {
        sum += v;
        // Small slack so permutations reproducing the observed value count as ties.
        if (std::abs(v - res.expected) >= obs_dev - 1e-12) ++extreme;
        if (v >= res.observed - 1e-12) ++greater;
        if (v <= res.observed + 1e-12) ++less;
    }
    const double denom = n_perm + 1.0;
    res.p_two_sided = (1.0 + extreme) / denom;
    res.p_greater = (1.0 + greater) / denom;
    res.p_less = (1.0 + less) / denom;
    res.permutation_mean = sum / n_perm;
    return res;
}

} // namespace lur::spatial
