#include "lur/svr.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace lur::models {

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double d = u[k] - v[k];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

namespace {

constexpr double kTau = 1e-12;

class KernelRows {
public:
    KernelRows(const Matrix &x, double gamma) : x_(x), gamma_(gamma), rows_(static_cast<std::size_t>(x.rows())) {}

    const std::vector<double> &row(std::size_t i) {
        auto &r = rows_[i];
        if (!r) {
            const auto n = static_cast<Eigen::Index>(rows_.size());
            const auto ii = static_cast<Eigen::Index>(i);
            r.emplace(rows_.size());
            for (Eigen::Index j = 0; j < n; ++j) {
                const double d2 = (x_.row(ii) - x_.row(j)).squaredNorm();
                (*r)[static_cast<std::size_t>(j)] = std::exp(-gamma_ * d2);
            }
        }
        return *r;
    }

private:
    const Matrix &x_;
    double gamma_;
    std::vector<std::optional<std::vector<double>>> rows_;
};

} // namespace

SvrDual solve_svr_dual(const Matrix &x, std::span<const double> y, std::span<const double> c_per_sample,
                       double epsilon, double gamma, double tolerance) {
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t l = 2 * n;
    KernelRows kernel(x, gamma);

    // Variables 0..n-1 are alpha (sign +1), n..2n-1 are alpha* (sign -1).
    auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
    auto sample = [n](std::size_t t) { return t < n ? t : t - n; };
    auto bound = [&](std::size_t t) { return c_per_sample[sample(t)]; };
    auto q = [&](std::size_t i, std::size_t j) {
        return sign(i) * sign(j) * kernel.row(sample(i))[sample(j)];
    };

    std::vector<double> a(l, 0.0);
    std::vector<double> g(l);
    for (std::size_t t = 0; t < l; ++t) {
        g[t] = epsilon - sign(t) * y[sample(t)];
    }
    auto at_upper = [&](std::size_t t) { return a[t] >= bound(t); };
    auto at_lower = [&](std::size_t t) { return a[t] <= 0.0; };

    SvrDual out;
    const long max_iter = std::max<long>(10'000'000L, 100L * static_cast<long>(l));
    double gap = 0.0;
    for (;; ++out.iterations) {
        if (out.iterations >= max_iter) {
            throw ComputeError(fmt::format("SVR solver did not reach tolerance {} in {} iterations", tolerance,
                                           max_iter));
        }
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t i = l;
        for (std::size_t t = 0; t < l; ++t) {
            if (sign(t) > 0) {
                if (!at_upper(t) && -g[t] >= gmax) {
                    gmax = -g[t];
                    i = t;
                }
            } else if (!at_lower(t) && g[t] >= gmax) {
                gmax = g[t];
                i = t;
            }
        }
        std::size_t j = l;
        double best_obj = std::numeric_limits<double>::infinity();
        if (i < l) {
            for (std::size_t t = 0; t < l; ++t) {
                double grad_diff;
                double quad;
                if (sign(t) > 0) {
                    if (at_lower(t)) continue;
                    gmax2 = std::max(gmax2, g[t]);
                    grad_diff = gmax + g[t];
                    quad = 2.0 - 2.0 * sign(i) * q(i, t);
                } else {
                    if (at_upper(t)) continue;
                    gmax2 = std::max(gmax2, -g[t]);
                    grad_diff = gmax - g[t];
                    quad = 2.0 + 2.0 * sign(i) * q(i, t);
                }
                if (grad_diff > 0.0) {
                    const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
                    if (obj <= best_obj) {
                        best_obj = obj;
                        j = t;
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if (i == l || j == l || gap < tolerance) {
            break;
        }

        const double ci = bound(i);
        const double cj = bound(j);
        const double qij = q(i, j);
        const double old_i = a[i];
        const double old_j = a[j];
        if (sign(i) != sign(j)) {
            double quad = 2.0 + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if (diff > ci - cj) {
                if (a[i] > ci) {
                    a[i] = ci;
                    a[j] = ci - diff;
                }
            } else if (a[j] > cj) {
                a[j] = cj;
                a[i] = cj + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > ci) {
                if (a[i] > ci) {
                    a[i] = ci;
                    a[j] = sum - ci;
                }
            } else if (a[j] < 0.0) {
                a[j] = 0.0;
                a[i] = sum;
            }
            if (sum > cj) {
                if (a[j] > cj) {
                    a[j] = cj;
                    a[i] = sum - cj;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        const double di = a[i] - old_i;
        const double dj = a[j] - old_j;
        const auto &ki = kernel.row(sample(i));
        const auto &kj = kernel.row(sample(j));
        for (std::size_t t = 0; t < l; ++t) {
            const auto s = sample(t);
            g[t] += sign(t) * (sign(i) * ki[s] * di + sign(j) * kj[s] * dj);
        }
    }
    out.kkt_gap = std::max(gap, 0.0);

    // Bias from free variables, midpoint of the feasible interval otherwise.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (std::size_t t = 0; t < l; ++t) {
        const double yg = sign(t) * g[t];
        if (at_upper(t)) {
            if (sign(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (sign(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    out.bias = -rho;

    out.alpha.resize(n);
    out.alpha_star.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // Only the difference enters the model; splitting it back keeps a*a* = 0 exactly.
        const double beta = a[k] - a[k + n];
        out.alpha[k] = std::max(beta, 0.0);
        out.alpha_star[k] = std::max(-beta, 0.0);
    }
    out.objective = svr_dual_objective(x, y, out.alpha, out.alpha_star, epsilon, gamma);
    return out;
}

double svr_dual_objective(const Matrix &x, std::span<const double> y, std::span<const double> alpha,
                          std::span<const double> alpha_star, double epsilon, double gamma) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<double> beta(n);
    double linear = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        beta[i] = alpha[i] - alpha_star[i];
        linear += epsilon * (alpha[i] + alpha_star[i]) - y[i] * beta[i];
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (beta[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (beta[j] == 0.0) continue;
            const double d2 = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
            quad += beta[i] * beta[j] * std::exp(-gamma * d2);
        }
    }
    return 0.5 * quad + linear;
}

double SvrModel::predict(std::span<const double> x) const {
    double f = bias;
    const auto d = static_cast<std::size_t>(support.cols());
    std::vector<double> row(d);
    for (Eigen::Index s = 0; s < support.rows(); ++s) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = support(s, static_cast<Eigen::Index>(k)) - x[k];
            d2 += diff * diff;
        }
        f += coef[static_cast<std::size_t>(s)] * std::exp(-gamma * d2);
    }
    return f;
}

SvrFit fit_svr(const Matrix &x, std::span<const double> y, const SvrParams &p) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0 || y.size() != n) {
        throw ValidationError("SVR: X and y sizes differ or are empty");
    }
    if (n > p.cap) {
        throw ValidationError(fmt::format(
            "SVR: {} training rows exceed the dual-solver cap of {}; subsample the training set or raise the cap", n,
            p.cap));
    }
    if (!(p.C > 0.0) || !(p.epsilon >= 0.0) || !(p.gamma > 0.0) || !std::isfinite(p.C) || !std::isfinite(p.gamma)) {
        throw ValidationError(fmt::format("SVR: C={} epsilon={} gamma={} out of range", p.C, p.epsilon, p.gamma));
    }
    if (!x.allFinite() || !std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError("SVR: non-finite input");
    }
    const std::vector<double> c(n, p.C);
    SvrFit out;
    out.dual = solve_svr_dual(x, y, c, p.epsilon, p.gamma, p.tolerance);
    out.model.gamma = p.gamma;
    out.model.bias = out.dual.bias;
    std::vector<Eigen::Index> sv;
    for (std::size_t i = 0; i < n; ++i) {
        const double b = out.dual.alpha[i] - out.dual.alpha_star[i];
        if (b != 0.0) {
            sv.push_back(static_cast<Eigen::Index>(i));
            out.model.coef.push_back(b);
        }
    }
    out.model.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    for (std::size_t s = 0; s < sv.size(); ++s) {
        out.model.support.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    }
    return out;
}

} // namespace lur::models
