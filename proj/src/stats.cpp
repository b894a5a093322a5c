#include "lur/validation.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lur::validation {

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat, const char *what) {
    if (y.size() != yhat.size() || y.size() < 2) {
        throw ValidationError(fmt::format("{}: need equal lengths >= 2 (got {} and {})", what, y.size(), yhat.size()));
    }
}

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

double r2(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "r2");
    const double my = mean(y);
    const double mh = mean(yhat);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (y[i] - my) * (yhat[i] - mh);
        sxx += (y[i] - my) * (y[i] - my);
        syy += (yhat[i] - mh) * (yhat[i] - mh);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw ValidationError("r2: correlation undefined for a constant vector");
    }
    return sxy * sxy / (sxx * syy);
}

double r2_ss(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "r2_ss");
    const double my = mean(y);
    double res = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        tot += (y[i] - my) * (y[i] - my);
    }
    if (!(tot > 0.0)) {
        throw ValidationError("r2_ss: constant observations");
    }
    return 1.0 - res / tot;
}

double wilcoxon_exact(std::size_t n1, std::size_t n2, double rank_sum_a) {
    const std::size_t n = n1 + n2;
    // count[k][s]: subsets of size k of {1..m} with rank sum s, built up over m.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<std::vector<double>> count(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    count[0][0] = 1.0;
    for (std::size_t m = 1; m <= n; ++m) {
        for (std::size_t k = std::min(m, n1); k >= 1; --k) {
            for (std::size_t s = max_sum; s >= m; --s) {
                count[k][s] += count[k - 1][s - m];
            }
        }
    }
    double total = 0.0, lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
        const double c = count[n1][s];
        total += c;
        if (static_cast<double>(s) <= rank_sum_a + 1e-9) lower += c;
        if (static_cast<double>(s) >= rank_sum_a - 1e-9) upper += c;
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 3 || b.size() < 3) {
        throw ValidationError("wilcoxon_rank_sum: need at least 3 values per sample");
    }
    const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    std::vector<std::pair<double, std::size_t>> pooled;
    pooled.reserve(n);
    for (std::size_t i = 0; i < n1; ++i) pooled.emplace_back(a[i], i);
    for (std::size_t i = 0; i < n2; ++i) pooled.emplace_back(b[i], n1 + i);
    std::sort(pooled.begin(), pooled.end());
    std::vector<double> rank(n);
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) rank[pooled[k].second] = mid;
        const double t = static_cast<double>(j - i);
        if (j - i > 1) ties = true;
        tie_term += t * t * t - t;
        i = j;
    }
    double w = 0.0;
    for (std::size_t i = 0; i < n1; ++i) w += rank[i];
    if (!ties && n1 <= 10 && n2 <= 10) {
        return wilcoxon_exact(n1, n2, w);
    }
    const double dn = static_cast<double>(n);
    const double mu = static_cast<double>(n1) * (dn + 1.0) / 2.0;
    const double var =
        static_cast<double>(n1) * static_cast<double>(n2) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (!(var > 0.0)) {
        return 1.0;
    }
    const double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

std::vector<double> benjamini_hochberg(std::span<const double> pvals) {
    const std::size_t m = pvals.size();
    for (double p : pvals) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError(fmt::format("benjamini_hochberg: p-value {} outside [0, 1]", p));
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pvals[i] < pvals[j]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t i = order[r];
        running = std::min(running, static_cast<double>(m) * pvals[i] / static_cast<double>(r + 1));
        adj[i] = std::min(1.0, running);
    }
    return adj;
}

} // namespace lur::validation
