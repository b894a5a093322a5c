#include "lur/mapping.hpp"
#include "lur/models.hpp"
#include "lur/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace lur;
using namespace lur::mapping;

namespace {

geo::Polygon square(double x0, double y0, double s) {
    return {{{{x0, y0}, {x0 + s, y0}, {x0 + s, y0 + s}, {x0, y0 + s}, {x0, y0}}}};
}

} // namespace

TEST_CASE("grid geometry and masking") {
    const auto g = make_grid(square(1000, 2000, 430), 100, "c");
    CHECK(g.rows() == 5);
    CHECK(g.cols() == 5);
    CHECK(g.unmasked() == 16); // the last row and column have centroids outside
    CHECK(g.centroid(0).x == 1050);
    CHECK(g.centroid(0).y == 2450);
    CHECK_THROWS_AS(make_grid(square(0, 0, 100), 0.0), ValidationError);
    CHECK_THROWS_AS(make_grid(geo::Polygon{{{{0, 0}, {1, 1}, {2, 2}, {0, 0}}}}, 10), ValidationError);
}

TEST_CASE("exposure table on a hand-built fixture") {
    // Two cities, 2 x 2 cells of 100 m. Predictions 45, 52, 58, 66 and 61, 48, masked, 71.
    auto a = make_grid(square(0, 0, 200), 100, "a");
    auto b = make_grid(square(1000, 0, 200), 100, "b");
    a.raster.values = {45, 52, 58, 66};
    b.raster.values = {61, 48, -9999, 71};
    b.masked[2] = 1;
    // Population on a 50 m raster: every fine cell holds 10 people, except for a
    // block of 100 in the north-west of city a and a gap between the cities.
    geo::Raster pop;
    pop.cell_size = 50;
    pop.n_cols = 26;
    pop.n_rows = 4;
    pop.values.assign(26 * 4, 10.0);
    pop.values[0] = 100.0;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 4; c < 20; ++c) pop.values[r * 26 + c] = 0.0;
    pop.values[1 * 26 + 6] = pop.nodata;

    const std::vector<double> thr{50, 60, 70};
    const auto t = exposure_table({a, b}, pop, thr);

    // Oracle: sum the fine cells per coarse cell directly.
    auto coarse_pop = [&](const NoiseGrid &g, std::size_t cell) {
        double s = 0;
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 26; ++c) {
                const double v = pop.values[r * 26 + c];
                if (v <= 0) continue;
                const double x = (c + 0.5) * 50, y = (4 - r - 0.5) * 50;
                const auto gc = g.centroid(cell);
                if (std::abs(x - gc.x) < 50 && std::abs(y - gc.y) < 50) s += v;
            }
        }
        return s;
    };
    double total = 0;
    std::vector<double> counts(3, 0.0);
    for (const auto *g : {&a, &b}) {
        double city_total = 0;
        std::vector<double> city_counts(3, 0.0);
        for (std::size_t c = 0; c < 4; ++c) {
            if (g->masked[c]) continue;
            const double p = coarse_pop(*g, c);
            city_total += p;
            for (std::size_t k = 0; k < 3; ++k)
                if (g->value(c) > thr[k]) city_counts[k] += p;
        }
        const auto &col = t.column(g->city);
        CHECK(col.population == city_total);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(col.counts[k] == city_counts[k]);
            CHECK(col.percents[k] == doctest::Approx(100 * city_counts[k] / city_total));
            counts[k] += city_counts[k];
        }
        total += city_total;
    }
    const auto &all = t.column("total");
    CHECK(all.population == total);
    CHECK(all.population == 100 + 3 * 10 + 3 * 40 + 3 * 40); // masked cell in b excluded
    for (std::size_t k = 0; k < 3; ++k) CHECK(all.counts[k] == counts[k]);
    for (std::size_t k = 1; k < 3; ++k) CHECK(all.counts[k] <= all.counts[k - 1]);
    CHECK(t.columns.front().name == "total");
    CHECK(t.to_csv().rfind("threshold,total_count", 0) == 0);
    CHECK(t.to_json()["columns"].size() == 3);

    CHECK_THROWS_AS(exposure_table({a}, pop, {60, 50}), ValidationError);
    geo::Raster empty = pop;
    std::fill(empty.values.begin(), empty.values.end(), 0.0);
    CHECK_THROWS_AS(exposure_table({a, b}, empty, thr), ValidationError);
}

TEST_CASE("exposure is monotone in the predictions") {
    Rng rng(4);
    auto g = make_grid(square(0, 0, 1000), 100, "x");
    for (double &v : g.raster.values) v = rng.uniform(40, 75);
    geo::Raster pop;
    pop.cell_size = 25;
    pop.n_cols = pop.n_rows = 40;
    for (int i = 0; i < 1600; ++i) pop.values.push_back(std::round(rng.uniform(0, 20)));
    const auto before = exposure_table({g}, pop).column("total");
    for (double &v : g.raster.values) v += rng.uniform(0, 3);
    const auto after = exposure_table({g}, pop).column("total");
    for (std::size_t k = 0; k < before.counts.size(); ++k) CHECK(after.counts[k] >= before.counts[k]);
    CHECK(after.population == before.population);
}

TEST_CASE("grid prediction uses the model at every unmasked centroid") {
    Rng rng(6);
    Matrix x(50, 2);
    std::vector<double> y(50);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = rng.uniform(0, 1000);
        x(i, 1) = rng.uniform(0, 1000);
        y[i] = 40 + 0.02 * x(i, 0) + 0.3 * rng.normal();
    }
    auto spec = models::ModelSpec::make(models::Family::LM);
    spec.policy = {.yeo_johnson = false, .standardize = false, .vif_screen = false};
    const auto m = models::fit_model(spec, x, {"X", "Y"}, y);
    const features::FeatureContext ctx({}, {});
    const geo::Polygon tri{{{{0, 0}, {1000, 0}, {0, 1000}, {0, 0}}}};
    auto g = make_grid(tri, 100, "tri");
    predict_grid(g, m, ctx, {}, 2);
    CHECK(g.failures.empty());
    for (std::size_t c = 0; c < g.size(); ++c) {
        if (g.masked[c]) {
            CHECK(g.value(c) == g.raster.nodata);
            continue;
        }
        const auto p = g.centroid(c);
        Matrix one(1, 2);
        one << p.x, p.y;
        CHECK(g.value(c) == m.predict(one, {"X", "Y"})[0]);
    }
    lur::testing::TempDir dir("grid");
    export_grid(g, "ascii", dir / "g.asc");
    const auto back = geo::load_raster(dir / "g.asc");
    CHECK(back.raster->values == g.raster.values);
    export_grid(g, "geojson", dir / "g.geojson");
    const auto cells = geo::load_vector_layer(dir / "g.geojson", geo::LayerKind::polygon, "city");
    CHECK(cells.size() == g.unmasked());
    CHECK_THROWS_AS(export_grid(g, "tiff", dir / "g.tif"), ValidationError);
}
