#pragma once

// Reference implementations used as test oracles. Each one is written from the
// mathematical definition and shares no code with the library.

#include "lur/common.hpp"
#include "lur/geometry.hpp"
#include "lur/rng.hpp"
#include "lur/trees.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace lur::oracle {

// --- geometry ---------------------------------------------------------------

inline double sq_dist(const geo::Point &a, const geo::Point &b) {
    return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
}

// Length of [a, b] inside the open disk by dense sampling. Sign changes between
// samples are refined by bisection; the closest point to the center is always
// sampled so short chords are not stepped over.
inline double sampled_length(const geo::Point &a, const geo::Point &b, const geo::Point &c, double r,
                             int samples = 400) {
    const double len2 = sq_dist(a, b);
    const double len = std::sqrt(len2);
    auto at = [&](double t) { return geo::Point{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; };
    auto in = [&](double t) { return sq_dist(at(t), c) < r * r; };
    const double tc = std::clamp(((c.x - a.x) * (b.x - a.x) + (c.y - a.y) * (b.y - a.y)) / len2, 0.0, 1.0);
    std::vector<double> ts;
    for (int i = 0; i <= samples; ++i) ts.push_back(static_cast<double>(i) / samples);
    ts.push_back(tc);
    std::sort(ts.begin(), ts.end());
    double inside = 0.0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        double lo = ts[i], hi = ts[i + 1];
        const bool a_in = in(lo), b_in = in(hi);
        if (a_in && b_in) {
            inside += hi - lo;
        } else if (a_in != b_in) {
            for (int k = 0; k < 80; ++k) {
                const double mid = 0.5 * (lo + hi);
                (in(mid) == a_in ? lo : hi) = mid;
            }
            inside += a_in ? lo - ts[i] : ts[i + 1] - hi;
        }
    }
    return inside * len;
}

inline double sampled_length(const geo::Polyline &line, const geo::Point &c, double r) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i) s += sampled_length(line.vertices[i], line.vertices[i + 1], c, r);
    return s;
}

// --- Shapley values ---------------------------------------------------------

// phi_j = sum_S |S|!(p-|S|-1)!/p! (v(S+j) - v(S)), v(S) = mean_b f(x_S, b_rest).
inline std::vector<double> shapley(const std::function<double(const std::vector<double> &)> &f,
                                   const std::vector<double> &x, const Matrix &bg) {
    const int p = static_cast<int>(x.size());
    std::vector<double> v(1u << p, 0.0);
    for (unsigned s = 0; s < (1u << p); ++s) {
        double acc = 0;
        for (Eigen::Index r = 0; r < bg.rows(); ++r) {
            std::vector<double> z(static_cast<std::size_t>(p));
            for (int j = 0; j < p; ++j) z[j] = (s >> j) & 1 ? x[j] : bg(r, j);
            acc += f(z);
        }
        v[s] = acc / static_cast<double>(bg.rows());
    }
    std::vector<double> fact(static_cast<std::size_t>(p) + 1, 1.0);
    for (int i = 1; i <= p; ++i) fact[i] = fact[i - 1] * i;
    std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
    for (int j = 0; j < p; ++j) {
        for (unsigned s = 0; s < (1u << p); ++s) {
            if ((s >> j) & 1) continue;
            const int k = __builtin_popcount(s);
            phi[j] += fact[k] * fact[p - k - 1] / fact[p] * (v[s | (1u << j)] - v[s]);
        }
    }
    return phi;
}

// Random trees over a Cartesian-product background. Every split separates the
// remaining values of one feature, so each node's rows are again a product set
// and its cover (row count) is exact. On such fixtures path-dependent and
// interventional Shapley values coincide. Features with a single value can
// never be split and act as dummies.
struct ProductFixture {
    models::TreeEnsemble ensemble;
    Matrix background;
    std::vector<std::vector<double>> values; // per feature, ascending
};

inline int grow_product_tree(Rng &rng, models::RegressionTree &t, const std::vector<std::vector<double>> &sets,
                             int depth) {
    double cover = 1;
    for (const auto &s : sets) cover *= static_cast<double>(s.size());
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({});
    t.nodes[id].cover = cover;
    std::vector<int> splittable;
    for (int j = 0; j < static_cast<int>(sets.size()); ++j) {
        if (sets[j].size() >= 2) splittable.push_back(j);
    }
    if (depth == 0 || splittable.empty() || rng.uniform() < 0.15) {
        t.nodes[id].value = std::round(rng.uniform(-10, 10) * 4) / 4;
        return id;
    }
    const int f = splittable[rng.below(splittable.size())];
    const auto &vals = sets[f];
    const std::size_t k = 1 + rng.below(vals.size() - 1); // left keeps vals[0..k)
    auto left = sets, right = sets;
    left[f].assign(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k));
    right[f].assign(vals.begin() + static_cast<std::ptrdiff_t>(k), vals.end());
    const int l = grow_product_tree(rng, t, left, depth - 1);
    const int r = grow_product_tree(rng, t, right, depth - 1);
    t.nodes[id].feature = f;
    t.nodes[id].threshold = 0.5 * (vals[k - 1] + vals[k]);
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
}

inline ProductFixture make_product_fixture(Rng &rng, int max_features = 6, int n_trees = 1) {
    ProductFixture fx;
    int rows;
    do {
        const int p = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_features - 2)));
        fx.values.assign(static_cast<std::size_t>(p), {});
        rows = 1;
        for (int j = 0; j < p; ++j) {
            const int m = 1 + static_cast<int>(rng.below(3));
            double v = rng.uniform(-5, 5);
            for (int i = 0; i < m; ++i) {
                fx.values[j].push_back(v);
                v += rng.uniform(0.5, 3);
            }
            rows *= m;
        }
    } while (rows > 50 || rows < 4);
    const int p = static_cast<int>(fx.values.size());
    fx.background.resize(rows, p);
    for (int r = 0; r < rows; ++r) {
        int code = r;
        for (int j = 0; j < p; ++j) {
            const int m = static_cast<int>(fx.values[j].size());
            fx.background(r, j) = fx.values[j][code % m];
            code /= m;
        }
    }
    fx.ensemble.base_score = rng.uniform(40, 60);
    fx.ensemble.tree_weight = n_trees > 1 ? 1.0 / n_trees : 1.0;
    for (int t = 0; t < n_trees; ++t) {
        models::RegressionTree tree;
        grow_product_tree(rng, tree, fx.values, 2 + static_cast<int>(rng.below(4)));
        fx.ensemble.trees.push_back(std::move(tree));
    }
    return fx;
}

// Query point mixing background values and off-grid coordinates.
inline std::vector<double> product_query(Rng &rng, const ProductFixture &fx) {
    std::vector<double> x(fx.values.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto &vals = fx.values[j];
        x[j] = rng.uniform() < 0.5 ? vals[rng.below(vals.size())] : rng.uniform(vals.front() - 1, vals.back() + 1);
    }
    return x;
}

// --- statistics -------------------------------------------------------------

// Two-sided exact rank-sum p from the explicit list of every size-n1 subset of
// ranks 1..n: 2 min(P(W <= w), P(W >= w)), capped at 1.
inline double rank_sum_p_enumerated(int n1, int n2, double w) {
    const int n = n1 + n2;
    long total = 0, le = 0, ge = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != n1) continue;
        int s = 0;
        for (int i = 0; i < n; ++i)
            if ((mask >> i) & 1) s += i + 1;
        ++total;
        le += s <= w + 1e-9;
        ge += s >= w - 1e-9;
    }
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

// Tie-free samples only.
inline double rank_sum_p_enumerated(const std::vector<double> &a, const std::vector<double> &b) {
    std::vector<double> sorted = a;
    sorted.insert(sorted.end(), b.begin(), b.end());
    std::sort(sorted.begin(), sorted.end());
    double w = 0;
    for (double v : a) w += static_cast<double>(std::find(sorted.begin(), sorted.end(), v) - sorted.begin() + 1);
    return rank_sum_p_enumerated(static_cast<int>(a.size()), static_cast<int>(b.size()), w);
}

// adj_i = min over p_j >= p_i of m p_j / #{l : p_l <= p_j}, capped at 1.
inline std::vector<double> bh(const std::vector<double> &p) {
    const std::size_t m = p.size();
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (p[j] < p[i]) continue;
            const auto rank = static_cast<double>(std::count_if(p.begin(), p.end(), [&](double v) { return v <= p[j]; }));
            best = std::min(best, static_cast<double>(m) * p[j] / rank);
        }
        out[i] = best;
    }
    return out;
}

// Textbook double loop over explicit inverse-distance weights.
inline double morans_i(const std::vector<double> &v, const std::vector<geo::Point> &pts, double power, bool row_std) {
    const std::size_t n = v.size();
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            w[i][j] = 1.0 / std::pow(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y), power);
            row += w[i][j];
        }
        if (row_std)
            for (std::size_t j = 0; j < n; ++j) w[i][j] /= row;
    }
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double num = 0, den = 0, s0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        den += (v[i] - mean) * (v[i] - mean);
        for (std::size_t j = 0; j < n; ++j) {
            num += w[i][j] * (v[i] - mean) * (v[j] - mean);
            s0 += w[i][j];
        }
    }
    return static_cast<double>(n) / s0 * num / den;
}

// --- learners ---------------------------------------------------------------

// Largest violation of the subgradient conditions of
// (1/2n)||y - Xb - b0||^2 + lambda(alpha |b|_1 + (1-alpha)/2 |b|^2).
inline double enet_violation(const Matrix &x, const std::vector<double> &y, double alpha, double lambda,
                             double intercept, const std::vector<double> &coef) {
    const Eigen::Index n = x.rows();
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pred = intercept;
        for (Eigen::Index j = 0; j < x.cols(); ++j) pred += x(i, j) * coef[j];
        r(i) = y[i] - pred;
    }
    double worst = std::abs(r.sum() / static_cast<double>(n));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double g = x.col(j).dot(r) / static_cast<double>(n) - lambda * (1 - alpha) * coef[j];
        const double l1 = lambda * alpha;
        const double v = coef[j] != 0.0 ? std::abs(g - l1 * (coef[j] > 0 ? 1 : -1)) : std::max(0.0, std::abs(g) - l1);
        worst = std::max(worst, v);
    }
    return worst;
}

// Ridge (alpha = 0) by the centred normal equations. Returns intercept then coefficients.
inline Vector ridge(const Matrix &x, const std::vector<double> &yv, double lambda) {
    const Eigen::Index n = x.rows(), p = x.cols();
    const Eigen::RowVectorXd mx = x.colwise().mean();
    const Matrix xc = x.rowwise() - mx;
    const Vector y = Eigen::Map<const Vector>(yv.data(), n);
    const Vector yc = y.array() - y.mean();
    const Matrix a = xc.transpose() * xc / static_cast<double>(n) + lambda * Matrix::Identity(p, p);
    const Vector b = a.ldlt().solve(xc.transpose() * yc / static_cast<double>(n));
    Vector out(p + 1);
    out(0) = y.mean() - mx.dot(b);
    out.tail(p) = b;
    return out;
}

inline double rbf(const Matrix &x, Eigen::Index i, Eigen::Index j, double gamma) {
    return std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
}

// Largest violation of the epsilon-SVR optimality conditions given the bias.
// alpha pairs with y - f <= eps, alpha_star with f - y <= eps.
inline double svr_violation(const Matrix &x, const std::vector<double> &y, const std::vector<double> &alpha,
                            const std::vector<double> &alpha_star, double bias, double c, double eps, double gamma) {
    const Eigen::Index n = x.rows();
    double worst = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double f = bias;
        for (Eigen::Index j = 0; j < n; ++j) f += (alpha[j] - alpha_star[j]) * rbf(x, i, j, gamma);
        const double r = y[i] - f;
        if (alpha[i] < c) worst = std::max(worst, r - eps);
        if (alpha[i] > 0) worst = std::max(worst, eps - r);
        if (alpha_star[i] < c) worst = std::max(worst, -eps - r);
        if (alpha_star[i] > 0) worst = std::max(worst, r + eps);
        if (alpha[i] < 0 || alpha[i] > c || alpha_star[i] < 0 || alpha_star[i] > c) worst = std::numeric_limits<double>::infinity();
        if (alpha[i] > 0 && alpha_star[i] > 0) worst = std::numeric_limits<double>::infinity();
    }
    return worst;
}

// Exact dual optimum (minimization form 1/2 b'Kb + eps |b|_1 - y'b) by
// enumerating which constraint is active for every sample: 0 = both multipliers
// zero, 1 = alpha free, 2 = alpha at C, 3 = alpha* free, 4 = alpha* at C. A
// state whose linear system solves with feasible multipliers and consistent
// residuals satisfies the KKT conditions and is therefore optimal.
inline double svr_dual_optimum(const Matrix &x, const std::vector<double> &y, double c, double eps, double gamma) {
    const int n = static_cast<int>(x.rows());
    Matrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) k(i, j) = rbf(x, i, j, gamma);
    const Vector yv = Eigen::Map<const Vector>(y.data(), n);
    auto objective = [&](const Vector &beta) { return 0.5 * beta.dot(k * beta) + eps * beta.cwiseAbs().sum() - yv.dot(beta); };
    double best = std::numeric_limits<double>::infinity();
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 5;
    const double tol = 1e-9;
    for (int code = 0; code < total; ++code) {
        std::vector<int> state(static_cast<std::size_t>(n));
        for (int i = 0, v = code; i < n; ++i, v /= 5) state[i] = v % 5;
        std::vector<int> free_idx;
        Vector beta = Vector::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (state[i] == 1 || state[i] == 3) free_idx.push_back(i);
            if (state[i] == 2) beta(i) = c;
            if (state[i] == 4) beta(i) = -c;
        }
        const int m = static_cast<int>(free_idx.size());
        double b = 0.0;
        if (m == 0) {
            if (std::abs(beta.sum()) > tol) continue;
            // The bias is only bounded by the residual conditions.
            double lo = -1e300, hi = 1e300;
            for (int i = 0; i < n; ++i) {
                const double r0 = y[i] - k.row(i).dot(beta); // residual = r0 - b
                if (state[i] == 0) {
                    lo = std::max(lo, r0 - eps);
                    hi = std::min(hi, r0 + eps);
                }
                if (state[i] == 2) hi = std::min(hi, r0 - eps);
                if (state[i] == 4) lo = std::max(lo, r0 + eps);
            }
            if (lo > hi + tol) continue;
            best = std::min(best, objective(beta));
            continue;
        }
        // Unknowns: the free betas and the bias.
        Matrix a = Matrix::Zero(m + 1, m + 1);
        Vector rhs = Vector::Zero(m + 1);
        for (int r = 0; r < m; ++r) {
            const int i = free_idx[r];
            for (int s = 0; s < m; ++s) a(r, s) = k(i, free_idx[s]);
            a(r, m) = 1.0;
            rhs(r) = y[i] - (state[i] == 1 ? eps : -eps) - k.row(i).dot(beta);
        }
        for (int s = 0; s < m; ++s) a(m, s) = 1.0;
        rhs(m) = -beta.sum();
        Eigen::FullPivLU<Matrix> lu(a);
        if (!lu.isInvertible()) continue;
        const Vector sol = lu.solve(rhs);
        bool ok = true;
        for (int s = 0; s < m; ++s) {
            const int i = free_idx[s];
            beta(i) = sol(s);
            if (state[i] == 1 && !(sol(s) > -tol && sol(s) < c + tol)) ok = false;
            if (state[i] == 3 && !(sol(s) < tol && sol(s) > -c - tol)) ok = false;
        }
        b = sol(m);
        for (int i = 0; i < n && ok; ++i) {
            const double r = y[i] - k.row(i).dot(beta) - b;
            if (state[i] == 0 && std::abs(r) > eps + tol) ok = false;
            if (state[i] == 2 && r < eps - tol) ok = false;
            if (state[i] == 4 && r > -eps + tol) ok = false;
        }
        if (ok) best = std::min(best, objective(beta));
    }
    return best;
}

} // namespace lur::oracle
