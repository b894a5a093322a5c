#include "lur/rng.hpp"
#include "lur/validation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace lur;
using namespace lur::validation;

namespace {

struct Data {
    Matrix x;
    std::vector<std::string> names{"a", "b", "c", "d"};
    std::vector<double> y;
    std::vector<std::string> cities;
};

Data make_data(int n) {
    Rng rng(23);
    Data d{Matrix(n, 4), {"a", "b", "c", "d"}, std::vector<double>(n), {}};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) d.x(i, j) = rng.uniform(0, 10);
        d.y[i] = 50 + d.x(i, 0) + 0.5 * std::sin(d.x(i, 1)) * d.x(i, 2) + rng.normal();
        d.cities.push_back(i % 3 == 0 ? "alpha" : "beta");
    }
    return d;
}

std::vector<FamilyConfig> small_families() {
    using models::Family;
    auto lm = default_family_config(Family::LM);
    auto enet = default_family_config(Family::ENET);
    enet.grid = models::expand_grid({{"alpha", {0.5, 1.0}}, {"lambda", {0.01, 0.1}}});
    auto gbt = default_family_config(Family::GBT);
    gbt.grid = models::expand_grid({{"max_depth", {2.0}}, {"rounds", {20.0, 40.0}}, {"eta", {0.1}}});
    auto rf = default_family_config(Family::RF);
    rf.grid = {{{"n_trees", 20.0}, {"mtry", 2.0}}};
    return {lm, enet, gbt, rf};
}

} // namespace

TEST_CASE("rank-sum p-values match explicit enumeration for small samples") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n1 = 3 + rng.below(6), n2 = 3 + rng.below(6);
        std::vector<double> a(n1), b(n2);
        for (double &v : a) v = rng.normal(0.5 * (t % 3), 1.0);
        for (double &v : b) v = rng.normal();
        CHECK(wilcoxon_rank_sum(a, b) == doctest::Approx(oracle::rank_sum_p_enumerated(a, b)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(wilcoxon_rank_sum(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ValidationError);
}

TEST_CASE("exact rank-sum distribution for every sample size up to 8") {
    for (int n1 = 1; n1 <= 8; ++n1) {
        for (int n2 = 1; n2 <= 8; ++n2) {
            const int lo = n1 * (n1 + 1) / 2, hi = lo + n1 * n2;
            for (int w = lo; w <= hi; ++w) {
                CHECK(wilcoxon_exact(n1, n2, w) == doctest::Approx(oracle::rank_sum_p_enumerated(n1, n2, w)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("normal approximation with ties") {
    // 40 fold RMSEs per side with heavy ties; compare against a direct formula.
    std::vector<double> a, b;
    for (int i = 0; i < 40; ++i) {
        a.push_back(3.0 + 0.1 * (i % 5));
        b.push_back(3.2 + 0.1 * (i % 4));
    }
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    double w = 0, tie = 0;
    for (double v : a) {
        const double below = static_cast<double>(std::count_if(pooled.begin(), pooled.end(), [&](double u) { return u < v; }));
        const double same = static_cast<double>(std::count(pooled.begin(), pooled.end(), v));
        w += below + (same + 1) / 2;
    }
    for (double v : std::set<double>(pooled.begin(), pooled.end())) {
        const double t = static_cast<double>(std::count(pooled.begin(), pooled.end(), v));
        tie += t * t * t - t;
    }
    const double n = 80, mu = 40 * 81 / 2.0, var = 40.0 * 40 / 12 * (n + 1 - tie / (n * (n - 1)));
    const double z = (std::abs(w - mu) - 0.5) / std::sqrt(var);
    CHECK(wilcoxon_rank_sum(a, b) == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("Benjamini-Hochberg matches the definition on random vectors") {
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> p(1 + rng.below(12));
        for (double &v : p) v = rng.uniform() < 0.2 ? std::round(rng.uniform() * 10) / 10 : rng.uniform() * rng.uniform();
        const auto got = benjamini_hochberg(p);
        const auto want = oracle::bh(p);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(benjamini_hochberg(std::vector<double>{0.5, 1.5}), ValidationError);
}

TEST_CASE("metrics") {
    const std::vector<double> y{1, 2, 3, 4}, h{1.5, 1.5, 3.5, 3.5};
    CHECK(rmse(y, h) == 0.5);
    CHECK(mae(y, h) == 0.5);
    CHECK(r2_ss(y, h) == doctest::Approx(1 - 1.0 / 5.0));
    CHECK(r2(y, h) == doctest::Approx(0.8)); // corr = 4/sqrt(5*4)
    const std::vector<double> shifted{11, 12, 13, 14};
    CHECK(r2(y, shifted) == doctest::Approx(1.0));
    CHECK(r2_ss(y, shifted) < 0);
    CHECK_THROWS_AS(r2(y, std::vector<double>{2, 2, 2, 2}), ValidationError);
}

TEST_CASE("fold plans partition rows and never leak") {
    const auto plan = make_fold_plan(103, 42, 3, 10, 5);
    for (int r = 0; r < 3; ++r) {
        std::vector<int> seen(103, 0);
        for (int f = 0; f < 10; ++f) {
            const auto &test = plan.outer[r][f];
            CHECK((test.size() == 10 || test.size() == 11));
            for (auto i : test) ++seen[i];
            const auto train = plan.outer_train(r, f);
            CHECK(train.size() + test.size() == 103);
            for (auto i : test) CHECK_FALSE(std::binary_search(train.begin(), train.end(), i));
            std::vector<int> inner_seen(103, 0);
            for (int k = 0; k < 5; ++k) {
                for (auto i : plan.inner[r][f][k]) {
                    ++inner_seen[i];
                    CHECK(std::binary_search(train.begin(), train.end(), i));
                }
                const auto itrain = plan.inner_train(r, f, k);
                for (auto i : itrain) CHECK_FALSE(std::binary_search(test.begin(), test.end(), i));
            }
            for (auto i : train) CHECK(inner_seen[i] == 1);
        }
        for (int c : seen) CHECK(c == 1);
    }
    CHECK(make_fold_plan(103, 42, 3, 10, 5).outer == plan.outer);
    CHECK_FALSE(make_fold_plan(103, 43, 3, 10, 5).outer == plan.outer);
    CHECK_THROWS_AS(make_fold_plan(10, 1), ValidationError);
}

TEST_CASE("nested CV fits preprocessing and models on training rows only") {
    const auto d = make_data(80);
    const auto plan = make_fold_plan(80, 7, 1, 4, 3);
    const auto families = small_families();
    const auto rep = nested_cv(d.x, d.names, d.y, d.cities, families, plan, {.threads = 1});
    CHECK(rep.fold_results.size() == 16);
    for (const auto &fr : rep.fold_results) {
        const auto &fam = *std::find_if(families.begin(), families.end(), [&](auto &f) { return f.name() == fr.family; });
        const auto train = plan.outer_train(fr.repeat, fr.fold);
        Matrix xt(static_cast<Eigen::Index>(train.size()), 4);
        std::vector<double> yt;
        for (std::size_t i = 0; i < train.size(); ++i) {
            xt.row(static_cast<Eigen::Index>(i)) = d.x.row(static_cast<Eigen::Index>(train[i]));
            yt.push_back(d.y[train[i]]);
        }
        // The stored transform is exactly the one fitted on the outer-training rows.
        CHECK(fr.transform == models::prepare(fam.policy, xt, d.names).transform);
        CHECK(fr.test_rows == plan.outer[fr.repeat][fr.fold]);
        if (fam.family == models::Family::LM || fam.family == models::Family::ENET) {
            // Deterministic families: refitting on the training rows alone gives the same predictions.
            models::HyperMap h;
            for (const auto &[k, v] : fr.hyper) h[k] = v;
            auto spec = models::ModelSpec::make(fam.family, h);
            spec.policy = fam.policy;
            const auto m = models::fit_model(spec, xt, d.names, yt, 1);
            Matrix xs(static_cast<Eigen::Index>(fr.test_rows.size()), 4);
            for (std::size_t i = 0; i < fr.test_rows.size(); ++i)
                xs.row(static_cast<Eigen::Index>(i)) = d.x.row(static_cast<Eigen::Index>(fr.test_rows[i]));
            const auto p = m.predict(xs, d.names);
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == fr.predictions[i]);
        }
        if (fam.grid.size() > 1) CHECK(fr.inner_rmse.size() == fam.grid.size());
        std::vector<double> yy;
        for (auto i : fr.test_rows) yy.push_back(d.y[i]);
        CHECK(fr.rmse == doctest::Approx(rmse(yy, fr.predictions)).epsilon(1e-14));
    }
    CHECK(rep.summaries.size() == 4);
    CHECK(rep.comparison.pairs.size() == 6);
    CHECK(rep.oof_residuals.size() == 4);
    CHECK(rep.city_metrics.size() == 16 * 2);

    // Bit-identical for any thread count.
    const auto rep4 = nested_cv(d.x, d.names, d.y, d.cities, families, plan, {.threads = 4});
    REQUIRE(rep4.fold_results.size() == rep.fold_results.size());
    for (std::size_t k = 0; k < rep.fold_results.size(); ++k) {
        CHECK(rep4.fold_results[k].predictions == rep.fold_results[k].predictions);
        CHECK(rep4.fold_results[k].grid_index == rep.fold_results[k].grid_index);
    }
    CHECK(rep4.to_json() == rep.to_json());

    lur::testing::TempDir dir("cv");
    const auto files = rep.write(dir.path());
    CHECK(files.size() == 5);
    CHECK(std::filesystem::exists(dir / "report.json"));
}

TEST_CASE("identical configurations under different labels give identical metrics") {
    const auto d = make_data(60);
    const auto plan = make_fold_plan(60, 3, 1, 3, 3);
    auto a = default_family_config(models::Family::GBT);
    a.grid = {{{"rounds", 15.0}, {"subsample", 0.7}}};
    auto b = a;
    b.label = "GBT-copy";
    const auto rep = nested_cv(d.x, d.names, d.y, d.cities, {a, b}, plan);
    CHECK(rep.fold_rmse("GBT") == rep.fold_rmse("GBT-copy"));
    CHECK(rep.comparison.winner == "GBT"); // declaration order breaks the tie
}

TEST_CASE("tuning picks the grid point with the lowest held-out RMSE") {
    const auto d = make_data(80);
    auto fam = default_family_config(models::Family::ENET);
    fam.grid = models::expand_grid({{"alpha", {1.0}}, {"lambda", {0.001, 5.0}}});
    const auto plan = make_fold_plan(80, 5, 1, 5, 2);
    const auto t = tune(d.x, d.names, d.y, fam, plan.outer[0], 5, 1);
    REQUIRE(t.cv_rmse.size() == 2);
    CHECK(t.best == static_cast<std::size_t>(std::min_element(t.cv_rmse.begin(), t.cv_rmse.end()) - t.cv_rmse.begin()));
    CHECK(t.best == 0);
    CHECK(tune(d.x, d.names, d.y, fam, plan.outer[0], 5, 3).cv_rmse == t.cv_rmse);
}
