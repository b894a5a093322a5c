#include "lur/validation.hpp"

#include "lur/io_util.hpp"
#include "lur/parallel.hpp"
#include "lur/rng.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <deque>
#include <cmath>
#include <map>
#include <numeric>

namespace lur::validation {

namespace {

Indices complement(std::size_t n, const Indices &excluded) {
    std::vector<char> mark(n, 0);
    for (auto i : excluded) mark[i] = 1;
    Indices out;
    out.reserve(n - excluded.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!mark[i]) out.push_back(i);
    }
    return out;
}

std::vector<Indices> split(const Indices &rows, int k, Rng &rng) {
    Indices perm = rows;
    rng.shuffle(perm);
    std::vector<Indices> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < perm.size(); ++i) {
        folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
    }
    for (auto &f : folds) std::sort(f.begin(), f.end());
    return folds;
}

} // namespace

Indices FoldPlan::outer_train(int repeat, int fold) const {
    return complement(n, outer.at(static_cast<std::size_t>(repeat)).at(static_cast<std::size_t>(fold)));
}

Indices FoldPlan::inner_train(int repeat, int fold, int inner_fold) const {
    const Indices train = outer_train(repeat, fold);
    const auto &test = inner.at(static_cast<std::size_t>(repeat))
                           .at(static_cast<std::size_t>(fold))
                           .at(static_cast<std::size_t>(inner_fold));
    Indices out;
    std::set_difference(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(out));
    return out;
}

FoldPlan make_fold_plan(std::size_t n, std::uint64_t seed, int repeats, int folds, int inner_folds) {
    if (n < 20) {
        throw ValidationError(fmt::format("cross-validation needs at least 20 rows, got {}", n));
    }
    if (repeats < 1 || folds < 2 || inner_folds < 2) {
        throw ValidationError("cross-validation needs repeats >= 1 and at least 2 folds");
    }
    if (static_cast<std::size_t>(folds) > n) {
        throw ValidationError("more folds than rows");
    }
    FoldPlan plan;
    plan.seed = seed;
    plan.n = n;
    plan.repeats = repeats;
    plan.folds = folds;
    plan.inner_folds = inner_folds;
    Indices all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int r = 0; r < repeats; ++r) {
        Rng rng(derive_key(seed, {0x4f55544552ULL, static_cast<std::uint64_t>(r)}));
        plan.outer.push_back(split(all, folds, rng));
        std::vector<std::vector<Indices>> inner;
        for (int f = 0; f < folds; ++f) {
            const Indices train = complement(n, plan.outer.back()[static_cast<std::size_t>(f)]);
            if (train.size() < static_cast<std::size_t>(inner_folds)) {
                throw ValidationError("outer-training set smaller than the inner fold count");
            }
            Rng irng(derive_key(seed, {0x494e4e4552ULL, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f)}));
            inner.push_back(split(train, inner_folds, irng));
        }
        plan.inner.push_back(std::move(inner));
    }
    return plan;
}

FamilyConfig default_family_config(models::Family f) {
    FamilyConfig c;
    c.family = f;
    c.grid = models::expand_grid(models::default_grid_axes(f));
    c.policy = models::default_policy(f);
    return c;
}

namespace {

Matrix take_rows(const Matrix &x, const Indices &rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

std::vector<double> take(std::span<const double> y, const Indices &rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
    return out;
}

std::vector<double> predict_rows(const models::TrainedModel &m, const Matrix &x, const std::vector<std::string> &names) {
    return m.predict(x, names);
}

// Boosting draws each round from its own substream, so the first r trees of a
// longer fit are exactly the fit with r rounds. Grid points that differ only in
// "rounds" therefore share one fit and are scored on prefixes.
struct StageGroup {
    std::size_t fit = 0;                             // grid index with the most rounds
    std::vector<std::pair<std::size_t, int>> members; // (grid index, rounds or -1 for the full model)
};

std::vector<StageGroup> stage_groups(const FamilyConfig &cfg) {
    std::vector<StageGroup> out;
    if (cfg.family != models::Family::GBT) {
        for (std::size_t g = 0; g < cfg.grid.size(); ++g) out.push_back({g, {{g, -1}}});
        return out;
    }
    std::vector<models::HyperMap> keys;
    for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
        auto key = cfg.grid[g];
        const auto it = key.find("rounds");
        const bool numeric = it == key.end() || it->second.number.has_value();
        if (!numeric) {
            out.push_back({g, {{g, -1}}});
            keys.push_back(cfg.grid[g]); // never matches a stripped key
            continue;
        }
        const int rounds = it == key.end() ? static_cast<int>(*models::default_hyper(cfg.family).at("rounds").number)
                                           : static_cast<int>(*it->second.number);
        key.erase("rounds");
        std::size_t k = 0;
        while (k < keys.size() && !(keys[k] == key && out[k].members.front().second >= 0)) ++k;
        if (k == keys.size()) {
            keys.push_back(key);
            out.push_back({g, {}});
        }
        out[k].members.push_back({g, rounds});
    }
    for (auto &group : out) {
        if (group.members.front().second < 0) continue;
        group.fit = std::max_element(group.members.begin(), group.members.end(), [](const auto &a, const auto &b) {
                        return a.second < b.second;
                    })->first;
    }
    return out;
}

std::vector<double> predict_prefix(const models::TrainedModel &m, const Matrix &x, const std::vector<std::string> &names,
                                   int rounds) {
    auto copy = m;
    auto &trees = std::get<models::TreeEnsemble>(copy.params).trees;
    if (static_cast<std::size_t>(rounds) < trees.size()) trees.resize(static_cast<std::size_t>(rounds));
    return copy.predict(x, names);
}

// Preparations for one training partition, keyed by policy.
class PrepCache {
public:
    const models::Prepared &get(const models::PreprocessPolicy &policy, const Matrix &x,
                                const std::vector<std::string> &names) {
        for (auto &[p, prep] : entries_) {
            if (p == policy) return prep;
        }
        entries_.emplace_back(policy, models::prepare(policy, x, names));
        return entries_.back().second;
    }

private:
    std::deque<std::pair<models::PreprocessPolicy, models::Prepared>> entries_; // stable references
};

struct Partition {
    Matrix x_train;
    std::vector<double> y_train;
    Matrix x_test;
    std::vector<double> y_test;
    PrepCache cache;
};

Partition make_partition(const Matrix &x, std::span<const double> y, const Indices &train, const Indices &test) {
    return {take_rows(x, train), take(y, train), take_rows(x, test), take(y, test), {}};
}

} // namespace

CVReport nested_cv(const Matrix &x, const std::vector<std::string> &names, std::span<const double> y,
                   const std::vector<std::string> &cities, const std::vector<FamilyConfig> &families,
                   const FoldPlan &plan, const CvOptions &options) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n != plan.n || y.size() != n) {
        throw ValidationError(fmt::format("fold plan covers {} rows but the data has {}", plan.n, n));
    }
    if (!cities.empty() && cities.size() != n) {
        throw ValidationError("city labels do not match the row count");
    }
    if (families.empty()) {
        throw ValidationError("nested_cv: no model families given");
    }
    std::vector<std::string> labels;
    for (const auto &f : families) {
        if (f.grid.empty()) {
            throw ValidationError(fmt::format("hyperparameter grid for {} is empty", f.name()));
        }
        if (std::find(labels.begin(), labels.end(), f.name()) != labels.end()) {
            throw ValidationError(fmt::format("family label '{}' given twice", f.name()));
        }
        labels.push_back(f.name());
    }

    const auto n_outer = static_cast<std::size_t>(plan.repeats * plan.folds);
    // results[task][family]
    std::vector<std::vector<FoldResult>> results(n_outer);
    parallel_for(
        n_outer,
        [&](std::size_t task) {
            const int r = static_cast<int>(task) / plan.folds;
            const int f = static_cast<int>(task) % plan.folds;
            const Indices train = plan.outer_train(r, f);
            const Indices &test = plan.outer[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)];
            Partition outer = make_partition(x, y, train, test);
            std::vector<Partition> inner;
            const bool any_tuning =
                std::any_of(families.begin(), families.end(), [](const FamilyConfig &c) { return c.grid.size() > 1; });
            if (any_tuning) {
                for (int v = 0; v < plan.inner_folds; ++v) {
                    const auto &itest =
                        plan.inner[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)][static_cast<std::size_t>(v)];
                    inner.push_back(make_partition(x, y, plan.inner_train(r, f, v), itest));
                }
            }
            for (const auto &cfg : families) {
                FoldResult fr;
                fr.family = cfg.name();
                fr.repeat = r;
                fr.fold = f;
                if (cfg.grid.size() > 1) {
                    fr.inner_rmse.assign(cfg.grid.size(), 0.0);
                    for (int v = 0; v < plan.inner_folds; ++v) {
                        auto &part = inner[static_cast<std::size_t>(v)];
                        const auto &prep = part.cache.get(cfg.policy, part.x_train, names);
                        const std::uint64_t seed = derive_key(plan.seed, {static_cast<std::uint64_t>(r),
                                                                          static_cast<std::uint64_t>(f),
                                                                          static_cast<std::uint64_t>(v)});
                        for (const auto &group : stage_groups(cfg)) {
                            models::ModelSpec spec{cfg.family, cfg.grid[group.fit], cfg.policy, seed};
                            const auto m = models::fit_prepared(spec, prep, names, part.y_train, 1);
                            for (const auto &[g, rounds] : group.members) {
                                const auto pred = rounds < 0 ? predict_rows(m, part.x_test, names)
                                                             : predict_prefix(m, part.x_test, names, rounds);
                                fr.inner_rmse[g] += rmse(part.y_test, pred) / plan.inner_folds;
                            }
                        }
                    }
                    for (std::size_t g = 1; g < cfg.grid.size(); ++g) {
                        if (fr.inner_rmse[g] < fr.inner_rmse[fr.grid_index]) fr.grid_index = g;
                    }
                }
                const auto &prep = outer.cache.get(cfg.policy, outer.x_train, names);
                const std::uint64_t seed =
                    derive_key(plan.seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f),
                                           static_cast<std::uint64_t>(plan.inner_folds)});
                models::ModelSpec spec{cfg.family, cfg.grid[fr.grid_index], cfg.policy, seed};
                const auto m = models::fit_prepared(spec, prep, names, outer.y_train, 1);
                fr.hyper = m.hyper;
                fr.transform = m.transform;
                fr.predictions = predict_rows(m, outer.x_test, names);
                fr.test_rows = test;
                fr.rmse = rmse(outer.y_test, fr.predictions);
                fr.mae = mae(outer.y_test, fr.predictions);
                try {
                    fr.r2 = r2(outer.y_test, fr.predictions);
                } catch (const ValidationError &) {
                    fr.r2.reset(); // constant predictions: correlation undefined
                }
                fr.r2_ss = r2_ss(outer.y_test, fr.predictions);
                results[task].push_back(std::move(fr));
            }
        },
        options.threads);

    CVReport rep;
    rep.seed = plan.seed;
    rep.n = n;
    rep.repeats = plan.repeats;
    rep.folds = plan.folds;
    rep.inner_folds = plan.inner_folds;
    rep.families = labels;
    rep.oof_residuals.assign(labels.size(), std::vector<double>(n, 0.0));
    std::vector<std::vector<int>> counts(labels.size(), std::vector<int>(n, 0));
    for (std::size_t li = 0; li < labels.size(); ++li) {
        for (std::size_t task = 0; task < n_outer; ++task) {
            FoldResult fr = results[task][li];
            for (std::size_t k = 0; k < fr.test_rows.size(); ++k) {
                const auto row = fr.test_rows[k];
                rep.oof_residuals[li][row] += y[row] - fr.predictions[k];
                ++counts[li][row];
            }
            if (!cities.empty()) {
                std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_city;
                for (std::size_t k = 0; k < fr.test_rows.size(); ++k) {
                    auto &[obs, pred] = by_city[cities[fr.test_rows[k]]];
                    obs.push_back(y[fr.test_rows[k]]);
                    pred.push_back(fr.predictions[k]);
                }
                for (const auto &[city, v] : by_city) {
                    if (v.first.size() < 2) continue;
                    rep.city_metrics.push_back(
                        {fr.family, fr.repeat, fr.fold, city, v.first.size(), rmse(v.first, v.second), mae(v.first, v.second)});
                }
            }
            if (!options.keep_predictions) {
                fr.predictions.clear();
                fr.test_rows.clear();
            }
            rep.fold_results.push_back(std::move(fr));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (counts[li][i] > 0) rep.oof_residuals[li][i] /= counts[li][i];
        }
    }
    rep.summaries = summarize(rep);
    if (labels.size() >= 2) {
        rep.comparison = compare_models(rep);
    } else {
        rep.comparison.winner = labels.front();
    }
    return rep;
}

TuneResult tune(const Matrix &x, const std::vector<std::string> &names, std::span<const double> y,
                const FamilyConfig &family, const std::vector<Indices> &test_folds, std::uint64_t seed,
                unsigned threads) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (family.grid.empty()) {
        throw ValidationError(fmt::format("hyperparameter grid for {} is empty", family.name()));
    }
    if (test_folds.size() < 2) {
        throw ValidationError("tuning needs at least 2 folds");
    }
    TuneResult out;
    out.cv_rmse.assign(family.grid.size(), 0.0);
    if (family.grid.size() == 1) return out;
    std::vector<std::vector<double>> per_fold(test_folds.size(), std::vector<double>(family.grid.size(), 0.0));
    parallel_for(
        test_folds.size(),
        [&](std::size_t v) {
            Partition part = make_partition(x, y, complement(n, test_folds[v]), test_folds[v]);
            const auto &prep = part.cache.get(family.policy, part.x_train, names);
            const std::uint64_t fold_seed = derive_key(seed, {0x54554e45ULL, v});
            for (const auto &group : stage_groups(family)) {
                models::ModelSpec spec{family.family, family.grid[group.fit], family.policy, fold_seed};
                const auto m = models::fit_prepared(spec, prep, names, part.y_train, 1);
                for (const auto &[g, rounds] : group.members) {
                    const auto pred = rounds < 0 ? predict_rows(m, part.x_test, names)
                                                 : predict_prefix(m, part.x_test, names, rounds);
                    per_fold[v][g] = rmse(part.y_test, pred);
                }
            }
        },
        threads);
    for (const auto &f : per_fold) {
        for (std::size_t g = 0; g < f.size(); ++g) out.cv_rmse[g] += f[g] / static_cast<double>(test_folds.size());
    }
    for (std::size_t g = 1; g < out.cv_rmse.size(); ++g) {
        if (out.cv_rmse[g] < out.cv_rmse[out.best]) out.best = g;
    }
    return out;
}

std::vector<FamilySummary> summarize(const CVReport &report) {
    std::vector<FamilySummary> out;
    for (const auto &fam : report.families) {
        FamilySummary s;
        s.family = fam;
        std::vector<double> rm;
        double r2_sum = 0.0;
        std::size_t r2_n = 0;
        for (const auto &fr : report.fold_results) {
            if (fr.family != fam) continue;
            rm.push_back(fr.rmse);
            s.mean_mae += fr.mae;
            s.mean_r2_ss += fr.r2_ss;
            if (fr.r2) {
                r2_sum += *fr.r2;
                ++r2_n;
            } else {
                ++s.r2_missing;
            }
        }
        if (rm.empty()) {
            throw ValidationError(fmt::format("no fold results for family '{}'", fam));
        }
        const double k = static_cast<double>(rm.size());
        s.mean_rmse = std::accumulate(rm.begin(), rm.end(), 0.0) / k;
        s.mean_mae /= k;
        s.mean_r2_ss /= k;
        if (r2_n > 0) s.mean_r2 = r2_sum / static_cast<double>(r2_n);
        double ss = 0.0;
        for (double v : rm) ss += (v - s.mean_rmse) * (v - s.mean_rmse);
        s.sd_rmse = rm.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

const FamilySummary &CVReport::summary(const std::string &family) const {
    for (const auto &s : summaries) {
        if (s.family == family) return s;
    }
    throw ValidationError(fmt::format("no summary for family '{}'", family));
}

std::vector<double> CVReport::fold_rmse(const std::string &family) const {
    std::vector<double> out;
    for (const auto &fr : fold_results) {
        if (fr.family == family) out.push_back(fr.rmse);
    }
    return out;
}

Comparison compare_models(const CVReport &report, double alpha) {
    if (report.families.size() < 2) {
        throw ValidationError("compare_models needs at least two families");
    }
    const auto summaries = report.summaries.empty() ? summarize(report) : report.summaries;
    Comparison c;
    c.alpha = alpha;
    std::size_t best = 0;
    for (std::size_t i = 1; i < summaries.size(); ++i) {
        if (summaries[i].mean_rmse < summaries[best].mean_rmse) best = i;
    }
    c.winner = summaries[best].family;
    std::vector<double> raw;
    for (std::size_t i = 0; i < report.families.size(); ++i) {
        for (std::size_t j = i + 1; j < report.families.size(); ++j) {
            const auto a = report.fold_rmse(report.families[i]);
            const auto b = report.fold_rmse(report.families[j]);
            PairTest t;
            t.a = report.families[i];
            t.b = report.families[j];
            t.p_raw = wilcoxon_rank_sum(a, b);
            raw.push_back(t.p_raw);
            c.pairs.push_back(t);
        }
    }
    const auto adj = benjamini_hochberg(raw);
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
        c.pairs[k].p_adjusted = adj[k];
        c.pairs[k].significant = adj[k] < alpha;
    }
    return c;
}

namespace {

nlohmann::json opt_json(const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string hyper_text(const models::Resolved &h) {
    std::string s;
    for (const auto &[k, v] : h) {
        if (!s.empty()) s += ';';
        s += k + '=' + io::format_double(v);
    }
    return s;
}

} // namespace

nlohmann::json CVReport::to_json() const {
    nlohmann::json j;
    j["toolkit_version"] = kToolkitVersion;
    j["plan"] = {{"n", n}, {"repeats", repeats}, {"folds", folds}, {"inner_folds", inner_folds}, {"seed", seed}};
    j["conventions"] = {
        {"r2", "squared Pearson correlation between observed and predicted; r2_ss = 1 - SS_res/SS_tot"},
        {"significance_test", "two-tailed Wilcoxon rank-sum on per-fold RMSE vectors, Benjamini-Hochberg adjusted"},
        {"alpha", comparison.alpha},
        {"hyperparameter_ties", "first grid point in declared order"}};
    j["families"] = families;
    nlohmann::json summ = nlohmann::json::array();
    for (const auto &s : summaries) {
        summ.push_back({{"family", s.family},
                        {"mean_rmse", s.mean_rmse},
                        {"sd_rmse", s.sd_rmse},
                        {"mean_mae", s.mean_mae},
                        {"mean_r2", opt_json(s.mean_r2)},
                        {"r2_missing_folds", s.r2_missing},
                        {"mean_r2_ss", s.mean_r2_ss}});
    }
    j["summary"] = summ;
    nlohmann::json folds_j = nlohmann::json::array();
    for (const auto &fr : fold_results) {
        folds_j.push_back({{"family", fr.family},
                           {"repeat", fr.repeat},
                           {"fold", fr.fold},
                           {"rmse", fr.rmse},
                           {"mae", fr.mae},
                           {"r2", opt_json(fr.r2)},
                           {"r2_ss", fr.r2_ss},
                           {"grid_index", fr.grid_index},
                           {"hyperparameters", fr.hyper}});
    }
    j["folds"] = folds_j;
    nlohmann::json cities = nlohmann::json::array();
    for (const auto &c : city_metrics) {
        cities.push_back({{"family", c.family},
                          {"repeat", c.repeat},
                          {"fold", c.fold},
                          {"city", c.city},
                          {"n", c.n},
                          {"rmse", c.rmse},
                          {"mae", c.mae}});
    }
    j["city_metrics"] = cities;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto &p : comparison.pairs) {
        pairs.push_back({{"a", p.a}, {"b", p.b}, {"p_raw", p.p_raw}, {"p_adjusted", p.p_adjusted},
                         {"significant", p.significant}});
    }
    j["comparison"] = {{"winner", comparison.winner}, {"pairs", pairs}};
    j["residual_diagnostics"] = residual_diagnostics;
    return j;
}

std::vector<std::filesystem::path> CVReport::write(const std::filesystem::path &dir) const {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string &name, const std::string &text) {
        io::write_text(dir / name, text);
        written.push_back(dir / name);
    };
    put("report.json", to_json().dump(2) + "\n");

    std::string folds_csv = "family,repeat,fold,rmse,mae,r2,r2_ss,hyperparameters\n";
    std::string box_csv = "family,metric,value\n";
    for (const auto &fr : fold_results) {
        folds_csv += fmt::format("{},{},{},{},{},{},{},{}\n", io::csv_field(fr.family), fr.repeat, fr.fold,
                                 io::format_double(fr.rmse), io::format_double(fr.mae),
                                 fr.r2 ? io::format_double(*fr.r2) : "NA", io::format_double(fr.r2_ss),
                                 io::csv_field(hyper_text(fr.hyper)));
    }
    for (const char *metric : {"rmse", "mae", "r2"}) {
        for (const auto &fr : fold_results) {
            const std::string m = metric;
            std::string v;
            if (m == "rmse") v = io::format_double(fr.rmse);
            else if (m == "mae") v = io::format_double(fr.mae);
            else v = fr.r2 ? io::format_double(*fr.r2) : "NA";
            box_csv += fmt::format("{},{},{}\n", io::csv_field(fr.family), m, v);
        }
    }
    put("fold_metrics.csv", folds_csv);
    put("boxplot_data.csv", box_csv);

    std::string pairs_csv = "family_a,family_b,p_raw,p_adjusted,significant\n";
    for (const auto &p : comparison.pairs) {
        pairs_csv += fmt::format("{},{},{},{},{}\n", io::csv_field(p.a), io::csv_field(p.b),
                                 io::format_double(p.p_raw), io::format_double(p.p_adjusted),
                                 p.significant ? "true" : "false");
    }
    put("pairwise_tests.csv", pairs_csv);

    std::string city_csv = "family,repeat,fold,city,n,rmse,mae\n";
    for (const auto &c : city_metrics) {
        city_csv += fmt::format("{},{},{},{},{},{},{}\n", io::csv_field(c.family), c.repeat, c.fold,
                                io::csv_field(c.city), c.n, io::format_double(c.rmse), io::format_double(c.mae));
    }
    put("city_metrics.csv", city_csv);
    return written;
}

} // namespace lur::validation
