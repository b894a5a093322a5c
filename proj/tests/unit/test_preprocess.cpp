#include "lur/preprocess.hpp"
#include "lur/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace lur;
using namespace lur::preprocess;

namespace {

// Direct piecewise formula with std::pow.
double yj_ref(double y, double l) {
    if (y >= 0) return l == 0 ? std::log(y + 1) : (std::pow(y + 1, l) - 1) / l;
    return l == 2 ? -std::log(-y + 1) : -(std::pow(-y + 1, 2 - l) - 1) / (2 - l);
}

double loglik_ref(const std::vector<double> &v, double l) {
    const double n = static_cast<double>(v.size());
    double m = 0, ss = 0, jac = 0;
    for (double y : v) m += yj_ref(y, l);
    m /= n;
    for (double y : v) {
        ss += (yj_ref(y, l) - m) * (yj_ref(y, l) - m);
        jac += (y >= 0 ? 1 : -1) * std::log(std::abs(y) + 1);
    }
    return -0.5 * n * std::log(ss / n) + (l - 1) * jac;
}

double grid_argmax(const std::vector<double> &v) {
    double best = 0, best_ll = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 4000; ++k) {
        const double l = -5.0 + k * 0.0025;
        const double ll = loglik_ref(v, l);
        if (ll > best_ll) {
            best_ll = ll;
            best = l;
        }
    }
    return best;
}

double skewness(const std::vector<double> &v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double m2 = 0, m3 = 0;
    for (double x : v) {
        m2 += (x - m) * (x - m);
        m3 += (x - m) * (x - m) * (x - m);
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    return m3 / std::pow(m2, 1.5);
}

// R^2 of regressing column j on the others plus an intercept, via QR.
double vif_ols(const Matrix &x, Eigen::Index j) {
    const Eigen::Index n = x.rows(), p = x.cols();
    Matrix a(n, p);
    a.col(0).setOnes();
    for (Eigen::Index k = 0, c = 1; k < p; ++k) {
        if (k != j) a.col(c++) = x.col(k);
    }
    const Vector y = x.col(j);
    const Vector beta = a.colPivHouseholderQr().solve(y);
    const double rss = (y - a * beta).squaredNorm();
    const double tss = (y.array() - y.mean()).matrix().squaredNorm();
    return 1.0 / (rss / tss);
}

} // namespace

TEST_CASE("Yeo-Johnson fixed points") {
    CHECK(yeo_johnson(5, 1) == 5);
    CHECK(yeo_johnson(std::exp(1.0) - 1, 0) == doctest::Approx(1.0));
    CHECK(yeo_johnson(-1, 2) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double y = rng.uniform(-20, 20), l = rng.uniform(-5, 5);
        CHECK(yeo_johnson(y, l) == doctest::Approx(yj_ref(y, l)).epsilon(1e-10));
    }
}

TEST_CASE("Yeo-Johnson is continuous at the log branches") {
    for (double y : {-3.0, -0.5, 0.0, 0.5, 3.0, 40.0}) {
        for (double eps : {1e-8, -1e-8}) {
            if (y >= 0) CHECK(std::abs(yeo_johnson(y, eps) - std::log1p(y)) < 1e-6);
            if (y < 0) CHECK(std::abs(yeo_johnson(y, 2 + eps) + std::log1p(-y)) < 1e-6);
        }
    }
}

TEST_CASE("Yeo-Johnson is strictly increasing") {
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const double l = rng.uniform(-5, 5);
        double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
        if (a > b) std::swap(a, b);
        if (a == b) continue;
        CHECK(yeo_johnson(a, l) < yeo_johnson(b, l));
    }
}

TEST_CASE("fitted lambda maximizes the likelihood") {
    Rng rng(3);
    std::vector<double> normal(10000);
    for (double &v : normal) v = rng.normal();
    const double l = fit_lambda(normal);
    CHECK(l >= 0.8);
    CHECK(l <= 1.2);
    CHECK(std::abs(l - grid_argmax(normal)) < 0.005);
    CHECK(loglik_ref(normal, l) >= loglik_ref(normal, grid_argmax(normal)) - 1e-6);

    std::vector<double> skewed(2000);
    for (double &v : skewed) v = std::exp(rng.normal()) - 0.5;
    const double ls = fit_lambda(skewed);
    CHECK(ls < 1.0);
    std::vector<double> t;
    for (double v : skewed) t.push_back(yeo_johnson(v, ls));
    CHECK(std::abs(skewness(t)) < std::abs(skewness(skewed)));
    CHECK(std::abs(ls - grid_argmax(skewed)) < 0.005);

    std::vector<double> neg;
    for (double v : skewed) neg.push_back(-v);
    CHECK(fit_lambda(neg) > 1.0);
    CHECK(fit_lambda(neg) == doctest::Approx(2.0 - ls).epsilon(1e-4));

    CHECK_THROWS_AS(fit_lambda(std::vector<double>{1, 1, 2}), ValidationError);
}

TEST_CASE("fit_transform standardizes and apply reuses the fitted state") {
    Rng rng(4);
    Matrix x(300, 3);
    for (int i = 0; i < 300; ++i) {
        x(i, 0) = std::exp(rng.normal());
        x(i, 1) = rng.uniform(0, 100);
        x(i, 2) = rng.below(2) ? 1.0 : 0.0; // two values: identity lambda
    }
    const std::vector<std::string> names{"a", "b", "c"};
    const auto [t, z] = fit_transform(x, names);
    CHECK(t.lambdas[2] == 1.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(z.col(j).mean()) < 1e-12);
        const double sd = std::sqrt((z.col(j).array() - z.col(j).mean()).square().sum() / 299.0);
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(apply_transform(t, x, names) == z);
    // Reordered columns are matched by name.
    Matrix xr(300, 3);
    xr << x.col(2), x.col(0), x.col(1);
    CHECK(apply_transform(t, xr, {"c", "a", "b"}) == z);
    CHECK_THROWS_AS(apply_transform(t, x, {"a", "b", "d"}), ValidationError);

    // A single new row uses stored statistics only.
    std::vector<double> row{2.0, 50.0, 1.0}, out(3);
    t.apply_row(row, out);
    CHECK(out[1] == doctest::Approx((yeo_johnson(50.0, t.lambdas[1]) - t.means[1]) / t.sds[1]));
    CHECK(FittedTransform::from_json(t.to_json()) == t);

    Matrix cst = x;
    cst.col(1).setConstant(3.0);
    CHECK_THROWS_AS(fit_transform(cst, names), ValidationError);
}

TEST_CASE("VIF matches per-column OLS and screening removes collinear columns") {
    Rng rng(5);
    Matrix x(200, 3);
    for (int i = 0; i < 200; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        x(i, 2) = x(i, 0) + x(i, 1) + 0.05 * rng.normal();
    }
    const auto v = variance_inflation(x);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(v[j] - vif_ols(x, j)) <= 1e-6 * vif_ols(x, j));
    const auto kept = vif_screen(x, 10.0);
    CHECK(kept == std::vector<std::size_t>{0, 1}); // column 2 has the largest VIF

    // Orthogonal columns: all VIF 1.
    Matrix o(8, 3); // full 2^3 factorial design
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 3; ++j) o(i, j) = (i >> j) & 1 ? 1.0 : -1.0;
    }
    for (double f : variance_inflation(o)) CHECK(f == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(vif_screen(o).size() == 3);

    // An exact duplicate: one of the pair goes, the lowest index on ties.
    Matrix d(50, 3);
    for (int i = 0; i < 50; ++i) {
        d(i, 0) = rng.normal();
        d(i, 1) = rng.normal();
        d(i, 2) = d(i, 0);
    }
    const auto vd = variance_inflation(d);
    CHECK(std::isinf(vd[0]));
    CHECK(std::isinf(vd[2]));
    CHECK(vif_screen(d) == std::vector<std::size_t>{1, 2});
    CHECK_THROWS_AS(vif_screen(Matrix::Random(3, 3)), ValidationError);
}
