#include "lur/rng.hpp"
#include "lur/spatialstats.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace lur;
using namespace lur::spatial;

namespace {

std::vector<geo::Point> random_points(Rng &rng, std::size_t n) {
    std::vector<geo::Point> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({rng.uniform(0, 1000), rng.uniform(0, 1000)});
    return p;
}

} // namespace

TEST_CASE("Moran's I matches the double-loop definition") {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + rng.below(48);
        const auto pts = random_points(rng, n);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = pts[i].x * 0.01 * (t % 2) + rng.normal();
        const double power = t % 3 == 0 ? 2.0 : 1.0;
        const bool row_std = t % 4 != 0;
        const auto w = inverse_distance_weights(pts, power, row_std);
        CHECK(std::abs(morans_i(v, w) - oracle::morans_i(v, pts, power, row_std)) <= 1e-12);
    }
}

TEST_CASE("Moran's I on structured patterns") {
    std::vector<geo::Point> pts;
    std::vector<double> checker, gradient;
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            pts.push_back({i * 10.0, j * 10.0});
            checker.push_back((i + j) % 2 ? 1.0 : -1.0);
            gradient.push_back(i + j);
        }
    }
    const auto w = inverse_distance_weights(pts, 2.0);
    CHECK(morans_i(checker, w) < -0.2);
    CHECK(morans_i(gradient, w) > 0.5);
    std::vector<geo::Point> dup{{0, 0}, {1, 1}, {0, 0}};
    CHECK_THROWS_AS(inverse_distance_weights(dup), ValidationError);
}

TEST_CASE("permutation test: false-positive rate under the null") {
    Rng rng(2);
    int rejections = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const auto pts = random_points(rng, 40);
        std::vector<double> v(40);
        for (double &x : v) x = rng.normal();
        const auto w = inverse_distance_weights(pts);
        const auto r = permutation_test(v, w, 199, static_cast<std::uint64_t>(t), 1);
        rejections += r.p_two_sided < 0.05;
    }
    const double rate = static_cast<double>(rejections) / trials;
    CHECK(rate >= 0.02);
    CHECK(rate <= 0.09);
}

TEST_CASE("permutation test detects structure and is thread independent") {
    Rng rng(3);
    const auto pts = random_points(rng, 50);
    std::vector<double> v;
    for (const auto &p : pts) v.push_back(p.x / 100 + 0.3 * rng.normal());
    const auto w = inverse_distance_weights(pts);
    const auto a = permutation_test(v, w, 499, 11, 1);
    const auto b = permutation_test(v, w, 499, 11, 4);
    CHECK(a.observed == b.observed);
    CHECK(a.p_two_sided == b.p_two_sided);
    CHECK(a.permutation_mean == b.permutation_mean);
    CHECK(a.p_greater <= 1.0 / 500 + 1e-12);
    CHECK(a.p_two_sided < 0.01);
    CHECK(a.expected == doctest::Approx(-1.0 / 49));
    CHECK(a.n_perm == 499);
    CHECK(std::abs(a.permutation_mean - a.expected) < 0.05);
    CHECK(a.to_json().contains("p_two_sided"));
}
