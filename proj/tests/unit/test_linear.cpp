#include "lur/linear.hpp"
#include "lur/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace lur;
using namespace lur::models;

namespace {

struct Problem {
    Matrix x;
    std::vector<double> y;
};

Problem make_problem(Rng &rng, int n, int p, bool correlated) {
    Problem pr{Matrix(n, p), std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        const double shared = rng.normal();
        for (int j = 0; j < p; ++j) pr.x(i, j) = rng.normal() + (correlated ? 0.8 * shared : 0.0) + 0.5 * j;
        pr.y[i] = 3.0 + 2.0 * pr.x(i, 0) - 1.0 * pr.x(i, 1 % p) + 0.5 * rng.normal();
    }
    return pr;
}

} // namespace

TEST_CASE("elastic net satisfies the subgradient conditions on random problems") {
    Rng rng(10);
    for (int t = 0; t < 50; ++t) {
        const int p = 2 + static_cast<int>(rng.below(15));
        const auto pr = make_problem(rng, 30 + static_cast<int>(rng.below(80)), p, t % 2 == 0);
        const double alpha = t % 5 == 0 ? 1.0 : rng.uniform(0.0, 1.0);
        const double lambda = std::pow(10.0, rng.uniform(-3, 0));
        const auto r = fit_enet(pr.x, pr.y, alpha, lambda);
        CHECK(r.converged);
        CHECK(oracle::enet_violation(pr.x, pr.y, alpha, lambda, r.fit.intercept, r.fit.coef) <= 1e-5);
        CHECK(enet_kkt_violation(pr.x, pr.y, alpha, lambda, r.fit) <= 1e-5);
    }
}

TEST_CASE("ridge limit matches the closed form") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        const auto pr = make_problem(rng, 60, 6, true);
        const double lambda = rng.uniform(0.01, 2.0);
        const auto r = fit_enet(pr.x, pr.y, 0.0, lambda);
        const Vector b = oracle::ridge(pr.x, pr.y, lambda);
        CHECK(std::abs(r.fit.intercept - b(0)) <= 1e-8);
        for (int j = 0; j < 6; ++j) CHECK(std::abs(r.fit.coef[j] - b(j + 1)) <= 1e-8);
    }
}

TEST_CASE("a large penalty zeroes every coefficient") {
    Rng rng(12);
    const auto pr = make_problem(rng, 50, 4, false);
    const auto r = fit_enet(pr.x, pr.y, 1.0, 1e3);
    for (double c : r.fit.coef) CHECK(c == 0.0);
    double mean = 0;
    for (double v : pr.y) mean += v;
    CHECK(r.fit.intercept == doctest::Approx(mean / 50));
}

TEST_CASE("OLS matches the normal equations and flags rank deficiency") {
    Rng rng(13);
    auto pr = make_problem(rng, 40, 4, false);
    LinearFit f;
    double rss = 0;
    REQUIRE(fit_ols(pr.x, pr.y, {0, 2, 3}, f, &rss));
    Matrix a(40, 4);
    a.col(0).setOnes();
    a.col(1) = pr.x.col(0);
    a.col(2) = pr.x.col(2);
    a.col(3) = pr.x.col(3);
    const Vector y = Eigen::Map<const Vector>(pr.y.data(), 40);
    const Vector b = (a.transpose() * a).ldlt().solve(a.transpose() * y);
    CHECK(f.intercept == doctest::Approx(b(0)).epsilon(1e-10));
    CHECK(f.coef[0] == doctest::Approx(b(1)).epsilon(1e-10));
    CHECK(f.coef[1] == 0.0);
    CHECK(f.coef[3] == doctest::Approx(b(3)).epsilon(1e-10));
    CHECK(rss == doctest::Approx((y - a * b).squaredNorm()).epsilon(1e-10));

    pr.x.col(3) = 2.0 * pr.x.col(0);
    LinearFit untouched;
    CHECK_FALSE(fit_ols(pr.x, pr.y, {0, 3}, untouched));
    CHECK(untouched.coef.empty());
}

TEST_CASE("forward selection follows the smallest RSS and stops on adjusted R^2") {
    Rng rng(14);
    const int n = 80, p = 8;
    Matrix x(n, p);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
        y[i] = 4 * x(i, 5) + 2 * x(i, 1) - x(i, 6) + 0.3 * rng.normal();
    }
    const auto r = fit_lm_forward(x, y, 25);
    REQUIRE(r.selected.size() >= 3);
    CHECK(r.selected[0] == 5);
    CHECK(r.selected[1] == 1);
    CHECK(r.selected[2] == 6);
    CHECK(r.adj_r2_trace.front() == 0.0);
    // Replay the selection: each step is the RSS minimizer given the previous ones.
    std::vector<std::size_t> cols;
    double tss = 0, mean = 0;
    for (double v : y) mean += v;
    mean /= n;
    for (double v : y) tss += (v - mean) * (v - mean);
    for (std::size_t step = 0; step < r.selected.size(); ++step) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < p; ++j) {
            if (std::find(cols.begin(), cols.end(), j) != cols.end()) continue;
            auto trial = cols;
            trial.push_back(j);
            LinearFit f;
            double rss;
            if (fit_ols(x, y, trial, f, &rss) && rss < best) {
                best = rss;
                arg = j;
            }
        }
        CHECK(arg == r.selected[step]);
        cols.push_back(arg);
        const double k = static_cast<double>(cols.size());
        CHECK(r.adj_r2_trace[step + 1] == doctest::Approx(1 - (best / (n - k - 1)) / (tss / (n - 1))).epsilon(1e-10));
        CHECK(r.adj_r2_trace[step + 1] > r.adj_r2_trace[step]);
    }
    CHECK(fit_lm_forward(x, y, 2).selected.size() == 2);
}
