#include "lur/linear.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lur::models {

double LinearFit::predict(std::span<const double> x) const {
    double s = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) {
        if (coef[j] != 0.0) {
            s += coef[j] * x[j];
        }
    }
    return s;
}

namespace {

void check_inputs(const Matrix &x, std::span<const double> y, const char *what) {
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) {
        throw ValidationError(fmt::format("{}: X has {} rows but y has {}", what, x.rows(), y.size()));
    }
    if (!x.allFinite() || !std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError(fmt::format("{}: non-finite input", what));
    }
}

double mean_of(std::span<const double> y) {
    double s = 0.0;
    for (double v : y) s += v;
    return s / static_cast<double>(y.size());
}

} // namespace

bool fit_ols(const Matrix &x, std::span<const double> y, const std::vector<std::size_t> &columns, LinearFit &out,
             double *rss) {
    const Eigen::Index n = x.rows();
    const auto k = static_cast<Eigen::Index>(columns.size());
    const double ybar = mean_of(y);
    Vector yc(n);
    for (Eigen::Index i = 0; i < n; ++i) yc(i) = y[static_cast<std::size_t>(i)] - ybar;

    LinearFit fit;
    fit.coef.assign(static_cast<std::size_t>(x.cols()), 0.0);
    fit.intercept = ybar;
    if (k == 0) {
        if (rss) *rss = yc.squaredNorm();
        out = std::move(fit);
        return true;
    }
    if (k >= n) {
        return false;
    }
    Matrix a(n, k);
    Vector means(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto col = x.col(static_cast<Eigen::Index>(columns[static_cast<std::size_t>(c)]));
        means(c) = col.mean();
        a.col(c) = col.array() - means(c);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        return false;
    }
    const Vector beta = qr.solve(yc);
    if (!beta.allFinite()) {
        return false;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        fit.coef[columns[static_cast<std::size_t>(c)]] = beta(c);
        fit.intercept -= beta(c) * means(c);
    }
    if (rss) *rss = (yc - a * beta).squaredNorm();
    out = std::move(fit);
    return true;
}

StepwiseResult fit_lm_forward(const Matrix &x, std::span<const double> y, std::size_t selection_limit) {
    check_inputs(x, y, "forward stepwise");
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    if (n <= selection_limit + 1) {
        throw ValidationError(
            fmt::format("forward stepwise: {} rows is not more than selection_limit + 1 = {}", n, selection_limit + 1));
    }
    StepwiseResult res;
    double tss = 0.0;
    fit_ols(x, y, {}, res.fit, &tss);
    res.adj_r2_trace.push_back(0.0);
    if (!(tss > 0.0)) {
        return res;
    }
    const double nd = static_cast<double>(n);
    auto adjusted = [&](double rss, std::size_t k) {
        return 1.0 - (rss / (nd - static_cast<double>(k) - 1.0)) / (tss / (nd - 1.0));
    };
    std::vector<char> used(p, 0);
    double current = 0.0;
    while (res.selected.size() < selection_limit) {
        double best_rss = std::numeric_limits<double>::infinity();
        std::size_t best = p;
        LinearFit best_fit;
        auto trial = res.selected;
        trial.push_back(0);
        for (std::size_t j = 0; j < p; ++j) {
            if (used[j]) continue;
            trial.back() = j;
            LinearFit f;
            double rss = 0.0;
            if (!fit_ols(x, y, trial, f, &rss)) continue;
            if (rss < best_rss) {
                best_rss = rss;
                best = j;
                best_fit = std::move(f);
            }
        }
        if (best == p) break;
        const double adj = adjusted(best_rss, res.selected.size() + 1);
        if (!(adj > current)) break;
        current = adj;
        used[best] = 1;
        res.selected.push_back(best);
        res.fit = std::move(best_fit);
        res.adj_r2_trace.push_back(adj);
    }
    return res;
}

namespace {

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

struct Centered {
    Matrix x;
    Vector y;
    Vector xbar;
    double ybar = 0.0;
    Vector col_sq; // x_j^T x_j / n
};

Centered center(const Matrix &x, std::span<const double> y) {
    Centered c;
    const auto n = static_cast<double>(x.rows());
    c.xbar = x.colwise().mean().transpose();
    c.x = x.rowwise() - c.xbar.transpose();
    c.ybar = mean_of(y);
    c.y.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) c.y(i) = y[static_cast<std::size_t>(i)] - c.ybar;
    c.col_sq = c.x.colwise().squaredNorm().transpose() / n;
    return c;
}

double kkt_violation(const Centered &c, const Vector &beta, double alpha, double lambda) {
    const auto n = static_cast<double>(c.x.rows());
    const Vector grad = c.x.transpose() * (c.y - c.x * beta) / n;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        double v;
        if (beta(j) != 0.0) {
            v = std::abs(grad(j) - lambda * alpha * (beta(j) > 0 ? 1.0 : -1.0) - lambda * (1.0 - alpha) * beta(j));
        } else {
            v = std::max(0.0, std::abs(grad(j)) - lambda * alpha);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

LinearFit to_fit(const Centered &c, const Vector &beta) {
    LinearFit f;
    f.coef = to_std(beta);
    f.intercept = c.ybar - c.xbar.dot(beta);
    return f;
}

} // namespace

EnetResult fit_enet(const Matrix &x, std::span<const double> y, double alpha, double lambda) {
    check_inputs(x, y, "elastic net");
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError(fmt::format("elastic net: alpha={} lambda={} out of range", alpha, lambda));
    }
    constexpr double kTol = 1e-7;
    constexpr int kMaxSweeps = 10000;
    const Centered c = center(x, y);
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index p = x.cols();
    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);

    Vector beta = Vector::Zero(p);
    Vector r = c.y;
    EnetResult res;
    for (res.sweeps = 1; res.sweeps <= kMaxSweeps; ++res.sweeps) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double denom = c.col_sq(j) + l2;
            if (!(denom > 0.0)) continue;
            const double old = beta(j);
            const double rho = c.x.col(j).dot(r) / n + c.col_sq(j) * old;
            const double next = soft_threshold(rho, l1) / denom;
            if (next != old) {
                r -= (next - old) * c.x.col(j);
                beta(j) = next;
                max_change = std::max(max_change, std::abs(next - old));
            }
        }
        if (max_change < kTol) {
            res.converged = true;
            break;
        }
    }
    res.sweeps = std::min(res.sweeps, kMaxSweeps);

    // Exact solve of the stationarity equations on the active set with the
    // signs found by descent.
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (beta(j) != 0.0) active.push_back(j);
    }
    if (!active.empty()) {
        const auto k = static_cast<Eigen::Index>(active.size());
        Matrix xa(x.rows(), k);
        Vector rhs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            xa.col(a) = c.x.col(active[static_cast<std::size_t>(a)]);
            rhs(a) = xa.col(a).dot(c.y) / n - l1 * (beta(active[static_cast<std::size_t>(a)]) > 0 ? 1.0 : -1.0);
        }
        Matrix gram = xa.transpose() * xa / n;
        gram.diagonal().array() += l2;
        Eigen::LDLT<Matrix> ldlt(gram);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            const Vector sol = ldlt.solve(rhs);
            Vector polished = Vector::Zero(p);
            bool signs_kept = sol.allFinite();
            for (Eigen::Index a = 0; a < k && signs_kept; ++a) {
                const auto j = active[static_cast<std::size_t>(a)];
                signs_kept = (sol(a) > 0) == (beta(j) > 0) && sol(a) != 0.0;
                polished(j) = sol(a);
            }
            if (signs_kept && kkt_violation(c, polished, alpha, lambda) <= kkt_violation(c, beta, alpha, lambda)) {
                beta = polished;
            }
        }
    }
    res.fit = to_fit(c, beta);
    return res;
}

double enet_kkt_violation(const Matrix &x, std::span<const double> y, double alpha, double lambda,
                          const LinearFit &fit) {
    const Centered c = center(x, y);
    return kkt_violation(c, to_eigen(fit.coef), alpha, lambda);
}

} // namespace lur::models
