#include "lur/models.hpp"
#include "lur/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace lur;
using namespace lur::models;

namespace {

struct Data {
    Matrix x;
    std::vector<std::string> names;
    std::vector<double> y;
};

Data make_data(int n) {
    Rng rng(17);
    Data d{Matrix(n, 6), {"LMRoad100", "DGreen", "Build100", "Imp200", "flat", "X"}, std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(0, 400);
        d.x(i, 1) = std::exp(rng.uniform(0, 7));
        d.x(i, 2) = rng.below(60);
        d.x(i, 3) = rng.uniform();
        d.x(i, 4) = 1.0;
        d.x(i, 5) = rng.uniform(0, 3000);
        d.y[i] = 45 + 0.03 * d.x(i, 0) - 2 * std::log1p(d.x(i, 1)) / 7 + 0.05 * d.x(i, 2) + rng.normal();
    }
    return d;
}

} // namespace

TEST_CASE("hyperparameter expressions resolve against the feature count") {
    CHECK(HyperValue("sqrt(d)").resolve(16) == 4.0);
    CHECK(HyperValue("1/(2d)").resolve(4) == 0.125);
    CHECK(HyperValue("2/d").resolve(8) == 0.25);
    CHECK_THROWS_AS(HyperValue("d^2").resolve(3), ValidationError);
    const auto r = resolve_hyper(Family::RF, {{"mtry", "sqrt(d)"}}, 10);
    CHECK(r.at("mtry") == 3.0); // floor(sqrt(10))
    CHECK(r.at("n_trees") == 500.0);
    CHECK(resolve_hyper(Family::RF, {{"mtry", "d/3"}}, 2).at("mtry") == 1.0);
    CHECK_THROWS_AS(resolve_hyper(Family::GBT, {{"eta", 0.0}}, 5), ValidationError);
    CHECK_THROWS_AS(resolve_hyper(Family::GBT, {{"rounds", 10.5}}, 5), ValidationError);
    CHECK_THROWS_AS(resolve_hyper(Family::ENET, {{"alpha", 1.5}}, 5), ValidationError);
    CHECK_THROWS_AS(resolve_hyper(Family::SVR, {{"C", -1.0}}, 5), ValidationError);
    CHECK_THROWS_AS(resolve_hyper(Family::RF, {{"mtry", 9.0}}, 5), ValidationError);
    CHECK_THROWS_AS(resolve_hyper(Family::LM, {{"depth", 1.0}}, 5), ValidationError);
}

TEST_CASE("grid expansion order and size") {
    for (auto f : all_families()) {
        const auto axes = default_grid_axes(f);
        std::size_t expected = 1;
        for (const auto &[k, v] : axes) expected *= v.size();
        CHECK(expand_grid(axes).size() == expected);
    }
    CHECK(expand_grid(default_grid_axes(Family::GBT)).size() == 108);
    const auto g = expand_grid({{"a", {1.0, 2.0}}, {"b", {10.0, 20.0, 30.0}}});
    REQUIRE(g.size() == 6);
    CHECK(g[1].at("a") == HyperValue(1.0));
    CHECK(g[1].at("b") == HyperValue(20.0)); // last axis fastest
    CHECK(g[3].at("a") == HyperValue(2.0));
    CHECK_THROWS_AS(expand_grid({{"a", {}}}), ValidationError);
}

TEST_CASE("default preprocessing policies") {
    CHECK(default_policy(Family::LM).vif_screen);
    CHECK(default_policy(Family::SVR).standardize);
    CHECK_FALSE(default_policy(Family::ENET).vif_screen);
    CHECK_FALSE(default_policy(Family::GBT).yeo_johnson);
    CHECK_FALSE(default_policy(Family::RF).standardize);
}

TEST_CASE("every family saves and reloads to bit-identical predictions") {
    const auto d = make_data(90);
    lur::testing::TempDir dir("models");
    for (auto f : all_families()) {
        HyperMap h;
        if (f == Family::RF) h = {{"n_trees", 25.0}};
        if (f == Family::GBT) h = {{"rounds", 30.0}, {"subsample", 0.8}};
        const auto m = fit_model(ModelSpec::make(f, h, 5), d.x, d.names, d.y, 1);
        CHECK(m.n_train == 90);
        CHECK(std::find(m.diagnostics.dropped_constant.begin(), m.diagnostics.dropped_constant.end(), "flat") !=
              m.diagnostics.dropped_constant.end());
        const auto path = dir / (to_string(f) + ".json");
        m.save(path);
        const auto back = TrainedModel::load(path);
        CHECK(back.to_json() == m.to_json());
        const auto a = m.predict(d.x, d.names), b = back.predict(d.x, d.names);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
        // Columns are matched by name, so a permuted matrix predicts the same.
        Matrix xp(d.x.rows(), 6);
        std::vector<std::string> np;
        for (int j = 5; j >= 0; --j) {
            xp.col(5 - j) = d.x.col(j);
            np.push_back(d.names[static_cast<std::size_t>(j)]);
        }
        const auto c = back.predict(xp, np);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
        // A missing input column is an error.
        CHECK_THROWS_AS(back.predict(d.x.leftCols(5), {d.names.begin(), d.names.begin() + 5}), ValidationError);
        // In-sample fit is informative for every family.
        double mean = 0, ss = 0, res = 0;
        for (double v : d.y) mean += v / 90;
        for (std::size_t i = 0; i < a.size(); ++i) {
            ss += (d.y[i] - mean) * (d.y[i] - mean);
            res += (d.y[i] - a[i]) * (d.y[i] - a[i]);
        }
        CHECK_MESSAGE(res < ss, to_string(f));
    }
}

TEST_CASE("corrupted or foreign artifacts are rejected") {
    const auto d = make_data(40);
    const auto m = fit_model(ModelSpec::make(Family::LM), d.x, d.names, d.y);
    auto j = m.to_json();
    j["version"] = 99;
    CHECK_THROWS_AS(TrainedModel::from_json(j), ValidationError);
    j = m.to_json();
    j["format"] = "other";
    CHECK_THROWS_AS(TrainedModel::from_json(j), ValidationError);
    lur::testing::TempDir dir("models-bad");
    CHECK_THROWS_AS(TrainedModel::load(dir.write("m.json", "{not json")), ValidationError);
}

TEST_CASE("LM screening drops the collinear column before selection") {
    auto d = make_data(100);
    d.x.col(3) = (2.0 * d.x.col(0)).array() + 1.0; // exact duplicate of LMRoad100 up to scale
    const auto m = fit_model(ModelSpec::make(Family::LM), d.x, d.names, d.y);
    CHECK(m.diagnostics.dropped_vif.size() >= 1);
    CHECK_FALSE(m.diagnostics.selected.empty());
}
