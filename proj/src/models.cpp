#include "lur/models.hpp"

#include "lur/io_util.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>

namespace lur::models {

std::string to_string(Family f) {
    switch (f) {
    case Family::LM: return "LM";
    case Family::ENET: return "ENET";
    case Family::SVR: return "SVR";
    case Family::RF: return "RF";
    case Family::GBT: return "GBT";
    }
    return "?";
}

Family parse_family(const std::string &s) {
    for (auto f : all_families()) {
        if (to_string(f) == s) return f;
    }
    throw ValidationError(fmt::format("unknown model family '{}' (expected LM, ENET, SVR, RF or GBT)", s));
}

const std::vector<Family> &all_families() {
    static const std::vector<Family> v{Family::LM, Family::ENET, Family::SVR, Family::RF, Family::GBT};
    return v;
}

// ---------------------------------------------------------------------------
// hyperparameters
// ---------------------------------------------------------------------------

double HyperValue::resolve(std::size_t d) const {
    if (number) return *number;
    const auto dd = static_cast<double>(d);
    std::string e;
    for (char c : expression) {
        if (c != ' ') e += c;
    }
    if (e == "d") return dd;
    if (e == "sqrt(d)") return std::sqrt(dd);
    if (e == "d/3") return dd / 3.0;
    if (e == "d/2") return dd / 2.0;
    if (e == "1/(2d)" || e == "1/(2*d)") return 1.0 / (2.0 * dd);
    if (e == "1/d") return 1.0 / dd;
    if (e == "2/d") return 2.0 / dd;
    throw ValidationError(fmt::format("unsupported hyperparameter expression '{}'", expression));
}

std::string HyperValue::str() const { return number ? io::format_double(*number) : expression; }

nlohmann::json HyperValue::to_json() const {
    if (number) return *number;
    return expression;
}

HyperValue HyperValue::from_json(const nlohmann::json &j) {
    if (j.is_number()) return HyperValue(j.get<double>());
    if (j.is_string()) {
        HyperValue v(j.get<std::string>());
        v.resolve(1); // reject unknown expressions early
        return v;
    }
    if (j.is_boolean()) return HyperValue(j.get<bool>() ? 1.0 : 0.0);
    throw ValidationError(fmt::format("hyperparameter value must be a number or expression, got {}", j.dump()));
}

nlohmann::json PreprocessPolicy::to_json() const {
    return {{"yeo_johnson", yeo_johnson},
            {"standardize", standardize},
            {"vif_screen", vif_screen},
            {"vif_threshold", vif_threshold}};
}

PreprocessPolicy PreprocessPolicy::from_json(const nlohmann::json &j) {
    PreprocessPolicy p;
    p.yeo_johnson = j.value("yeo_johnson", p.yeo_johnson);
    p.standardize = j.value("standardize", p.standardize);
    p.vif_screen = j.value("vif_screen", p.vif_screen);
    p.vif_threshold = j.value("vif_threshold", p.vif_threshold);
    if (!(p.vif_threshold >= 1.0)) {
        throw ValidationError("vif_threshold must be >= 1");
    }
    return p;
}

PreprocessPolicy default_policy(Family f) {
    switch (f) {
    case Family::LM: return {true, true, true, 10.0};
    case Family::ENET:
    case Family::SVR: return {true, true, false, 10.0};
    case Family::RF:
    case Family::GBT: return {false, false, false, 10.0};
    }
    return {};
}

ModelSpec ModelSpec::make(Family f, HyperMap hyper, std::uint64_t seed) {
    return {f, std::move(hyper), default_policy(f), seed};
}

HyperMap default_hyper(Family f) {
    switch (f) {
    case Family::LM: return {{"selection_limit", 25.0}};
    case Family::ENET: return {{"alpha", 0.5}, {"lambda", 0.01}};
    case Family::SVR: return {{"C", 1.0}, {"epsilon", 0.1}, {"gamma", "1/d"}, {"cap", static_cast<double>(kDefaultSvrCap)}};
    case Family::RF: return {{"n_trees", 500.0}, {"mtry", "sqrt(d)"}, {"min_node", 5.0}, {"bootstrap", 1.0}};
    case Family::GBT:
        return {{"eta", 0.1},        {"max_depth", 4.0},  {"rounds", 100.0},   {"subsample", 1.0},
                {"colsample", 1.0},  {"reg_lambda", 1.0}, {"reg_gamma", 0.0},  {"min_child_weight", 1.0}};
    }
    return {};
}

namespace {

struct Range {
    double lo;
    double hi;
    bool lo_open;
    bool integer;
};

const std::map<std::string, Range> &ranges(Family f) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    static const std::map<Family, std::map<std::string, Range>> table{
        {Family::LM, {{"selection_limit", {0, inf, false, true}}}},
        {Family::ENET, {{"alpha", {0, 1, false, false}}, {"lambda", {0, inf, false, false}}}},
        {Family::SVR,
         {{"C", {0, inf, true, false}},
          {"epsilon", {0, inf, false, false}},
          {"gamma", {0, inf, true, false}},
          {"cap", {1, inf, false, true}}}},
        {Family::RF,
         {{"n_trees", {1, inf, false, true}},
          {"mtry", {1, inf, false, true}},
          {"min_node", {1, inf, false, true}},
          {"bootstrap", {0, 1, false, true}}}},
        {Family::GBT,
         {{"eta", {0, 1, true, false}},
          {"max_depth", {1, inf, false, true}},
          {"rounds", {0, inf, false, true}},
          {"subsample", {0, 1, true, false}},
          {"colsample", {0, 1, true, false}},
          {"reg_lambda", {0, inf, false, false}},
          {"reg_gamma", {0, inf, false, false}},
          {"min_child_weight", {0, inf, true, false}}}},
    };
    return table.at(f);
}

} // namespace

Resolved resolve_hyper(Family f, const HyperMap &hyper, std::size_t d) {
    HyperMap merged = default_hyper(f);
    for (const auto &[k, v] : hyper) {
        if (!merged.contains(k)) {
            throw ValidationError(fmt::format("unknown hyperparameter '{}' for {}", k, to_string(f)));
        }
        merged[k] = v;
    }
    const auto &rs = ranges(f);
    Resolved out;
    for (const auto &[k, v] : merged) {
        const Range &r = rs.at(k);
        double x = v.resolve(d);
        if (r.integer) {
            if (v.number) {
                if (x != std::floor(x)) {
                    throw ValidationError(fmt::format("{} hyperparameter '{}' must be an integer, got {}", to_string(f),
                                                      k, v.str()));
                }
            } else {
                x = std::max(1.0, std::floor(x));
            }
        }
        const bool low_ok = r.lo_open ? x > r.lo : x >= r.lo;
        if (!std::isfinite(x) || !low_ok || x > r.hi) {
            throw ValidationError(
                fmt::format("{} hyperparameter '{}' = {} is out of range", to_string(f), k, v.str()));
        }
        out[k] = x;
    }
    if (f == Family::RF && d > 0 && out["mtry"] > static_cast<double>(d)) {
        throw ValidationError(fmt::format("RF mtry {} exceeds the {} available features", out["mtry"], d));
    }
    return out;
}

std::vector<HyperMap> expand_grid(const GridAxes &axes) {
    std::vector<HyperMap> out{HyperMap{}};
    for (const auto &[name, values] : axes) {
        if (values.empty()) {
            throw ValidationError(fmt::format("grid axis '{}' is empty", name));
        }
        std::vector<HyperMap> next;
        next.reserve(out.size() * values.size());
        for (const auto &partial : out) {
            for (const auto &v : values) {
                auto h = partial;
                h[name] = v;
                next.push_back(std::move(h));
            }
        }
        out = std::move(next);
    }
    return out;
}

GridAxes default_grid_axes(Family f) {
    switch (f) {
    case Family::LM: return {{"selection_limit", {25.0}}};
    case Family::ENET: {
        std::vector<HyperValue> lambdas;
        for (int k = 0; k < 7; ++k) {
            lambdas.emplace_back(std::pow(10.0, -4.0 + 5.0 * k / 6.0));
        }
        return {{"alpha", {0.0, 0.25, 0.5, 0.75, 1.0}}, {"lambda", lambdas}};
    }
    case Family::SVR:
        return {{"C", {0.1, 1.0, 10.0, 100.0}}, {"epsilon", {0.1, 0.5, 1.0}}, {"gamma", {"1/(2d)", "1/d", "2/d"}}};
    case Family::RF:
        return {{"n_trees", {500.0}}, {"mtry", {"sqrt(d)", "d/3", "d/2"}}, {"min_node", {3.0, 5.0, 10.0}}};
    case Family::GBT:
        return {{"eta", {0.05, 0.1, 0.3}},
                {"max_depth", {2.0, 4.0, 6.0}},
                {"rounds", {100.0, 300.0, 600.0}},
                {"subsample", {0.7, 1.0}},
                {"reg_lambda", {1.0, 5.0}}};
    }
    return {};
}

// ---------------------------------------------------------------------------
// preparation
// ---------------------------------------------------------------------------

Prepared prepare(const PreprocessPolicy &policy, const Matrix &x, const std::vector<std::string> &names) {
    if (static_cast<std::size_t>(x.cols()) != names.size()) {
        throw ValidationError("prepare: column names do not match the matrix");
    }
    if (x.rows() < 2) {
        throw ValidationError("prepare: need at least 2 training rows");
    }
    Prepared p;
    std::vector<Eigen::Index> keep;
    std::vector<std::string> kept_names;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Vector col = x.col(j);
        if (preprocess::is_constant({col.data(), static_cast<std::size_t>(col.size())})) {
            p.dropped_constant.push_back(names[static_cast<std::size_t>(j)]);
        } else {
            keep.push_back(j);
            kept_names.push_back(names[static_cast<std::size_t>(j)]);
        }
    }
    Matrix sub(x.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        sub.col(static_cast<Eigen::Index>(c)) = x.col(keep[c]);
    }
    auto [t, z] = preprocess::fit_transform(sub, kept_names, policy.standardize, policy.yeo_johnson);
    if (policy.vif_screen && z.cols() > 1) {
        if (z.rows() <= z.cols()) {
            throw ValidationError(fmt::format("VIF screening needs more training rows ({}) than predictors ({})",
                                              z.rows(), z.cols()));
        }
        const auto kept = preprocess::vif_screen(z, policy.vif_threshold);
        preprocess::FittedTransform screened;
        screened.standardize = t.standardize;
        Matrix zs(z.rows(), static_cast<Eigen::Index>(kept.size()));
        std::vector<char> retained(t.size(), 0);
        for (std::size_t c = 0; c < kept.size(); ++c) {
            const auto j = kept[c];
            retained[j] = 1;
            screened.columns.push_back(t.columns[j]);
            screened.lambdas.push_back(t.lambdas[j]);
            screened.means.push_back(t.means[j]);
            screened.sds.push_back(t.sds[j]);
            zs.col(static_cast<Eigen::Index>(c)) = z.col(static_cast<Eigen::Index>(j));
        }
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (!retained[j]) p.dropped_vif.push_back(t.columns[j]);
        }
        t = std::move(screened);
        z = std::move(zs);
    }
    p.transform = std::move(t);
    p.z = std::move(z);
    return p;
}

// ---------------------------------------------------------------------------
// fitting
// ---------------------------------------------------------------------------

TrainedModel fit_prepared(const ModelSpec &spec, const Prepared &prep, const std::vector<std::string> &feature_names,
                          std::span<const double> y, unsigned threads) {
    const Matrix &z = prep.z;
    const auto n = static_cast<std::size_t>(z.rows());
    const auto d = static_cast<std::size_t>(z.cols());
    if (y.size() != n || n == 0) {
        throw ValidationError(fmt::format("training matrix has {} rows but y has {}", n, y.size()));
    }
    if (!std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError("training target contains non-finite values");
    }
    if (d == 0 && spec.family != Family::LM) {
        throw ValidationError("no non-constant predictors left to train on");
    }
    TrainedModel m;
    m.family = spec.family;
    m.hyper = resolve_hyper(spec.family, spec.hyper, d);
    m.policy = spec.policy;
    m.seed = spec.seed;
    m.n_train = n;
    m.feature_names = feature_names;
    m.transform = prep.transform;
    m.diagnostics.dropped_constant = prep.dropped_constant;
    m.diagnostics.dropped_vif = prep.dropped_vif;
    const auto &h = m.hyper;
    auto as_int = [&](const char *k) { return static_cast<int>(h.at(k)); };

    switch (spec.family) {
    case Family::LM: {
        const auto limit = std::min({static_cast<std::size_t>(h.at("selection_limit")), d, n >= 2 ? n - 2 : 0});
        auto res = fit_lm_forward(z, y, limit);
        for (auto j : res.selected) m.diagnostics.selected.push_back(m.transform.columns[j]);
        m.diagnostics.adj_r2_trace = res.adj_r2_trace;
        m.params = LinearParams{std::move(res.fit)};
        break;
    }
    case Family::ENET: {
        auto res = fit_enet(z, y, h.at("alpha"), h.at("lambda"));
        m.diagnostics.sweeps = res.sweeps;
        m.diagnostics.kkt_gap = enet_kkt_violation(z, y, h.at("alpha"), h.at("lambda"), res.fit);
        m.params = LinearParams{std::move(res.fit)};
        break;
    }
    case Family::SVR: {
        SvrParams p;
        p.C = h.at("C");
        p.epsilon = h.at("epsilon");
        p.gamma = h.at("gamma");
        p.cap = static_cast<std::size_t>(h.at("cap"));
        auto res = fit_svr(z, y, p);
        m.diagnostics.kkt_gap = res.dual.kkt_gap;
        m.diagnostics.n_support = static_cast<std::size_t>(res.model.support.rows());
        m.params = std::move(res.model);
        break;
    }
    case Family::RF: {
        RfParams p;
        p.n_trees = as_int("n_trees");
        p.mtry = as_int("mtry");
        p.min_node = as_int("min_node");
        p.bootstrap = h.at("bootstrap") != 0.0;
        auto res = fit_random_forest(z, y, p, spec.seed, threads);
        m.diagnostics.oob_mse = res.oob_mse;
        m.params = std::move(res.ensemble);
        break;
    }
    case Family::GBT: {
        GbtParams p;
        p.eta = h.at("eta");
        p.max_depth = as_int("max_depth");
        p.rounds = as_int("rounds");
        p.subsample = h.at("subsample");
        p.colsample = h.at("colsample");
        p.reg_lambda = h.at("reg_lambda");
        p.reg_gamma = h.at("reg_gamma");
        p.min_child_weight = h.at("min_child_weight");
        auto res = fit_gradient_boosting(z, y, p, spec.seed);
        m.diagnostics.training_mse = std::move(res.training_mse);
        m.params = std::move(res.ensemble);
        break;
    }
    }
    return m;
}

TrainedModel fit_model(const ModelSpec &spec, const Matrix &x, const std::vector<std::string> &names,
                       std::span<const double> y, unsigned threads) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw ValidationError(fmt::format("X has {} rows but y has {}", x.rows(), y.size()));
    }
    if (!x.allFinite()) {
        throw ValidationError("training matrix contains non-finite values");
    }
    return fit_prepared(spec, prepare(spec.policy, x, names), names, y, threads);
}

// ---------------------------------------------------------------------------
// prediction
// ---------------------------------------------------------------------------

double TrainedModel::predict_transformed(std::span<const double> z) const {
    return std::visit([&](const auto &p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
            return p.fit.predict(z);
        } else {
            return p.predict(z);
        }
    }, params);
}

std::vector<double> TrainedModel::predict(const Matrix &x, const std::vector<std::string> &names) const {
    if (static_cast<std::size_t>(x.cols()) != names.size()) {
        throw ValidationError("predict: column names do not match the matrix");
    }
    for (const auto &f : feature_names) {
        if (std::find(names.begin(), names.end(), f) == names.end()) {
            throw ValidationError(fmt::format("predict: required column '{}' is missing", f));
        }
    }
    std::vector<Eigen::Index> pos;
    for (const auto &c : transform.columns) {
        pos.push_back(std::find(names.begin(), names.end(), c) - names.begin());
    }
    const auto rows = static_cast<std::size_t>(x.rows());
    std::vector<double> out(rows);
    std::vector<double> raw(pos.size());
    std::vector<double> z(pos.size());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < pos.size(); ++j) {
            raw[j] = x(static_cast<Eigen::Index>(i), pos[j]);
        }
        transform.apply_row(raw, z);
        out[i] = predict_transformed(z);
        if (!std::isfinite(out[i])) {
            throw ComputeError(fmt::format("non-finite prediction for row {}", i));
        }
    }
    return out;
}

const TreeEnsemble &TrainedModel::ensemble() const {
    if (const auto *e = std::get_if<TreeEnsemble>(&params)) {
        return *e;
    }
    throw ValidationError(fmt::format("{} is not a tree ensemble; tree_shap needs RF or GBT (use enumerate_shapley)",
                                      to_string(family)));
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

nlohmann::json Diagnostics::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (oob_mse) j["oob_mse"] = *oob_mse;
    if (!selected.empty()) j["selected"] = selected;
    if (!adj_r2_trace.empty()) j["adj_r2_trace"] = adj_r2_trace;
    if (!training_mse.empty()) j["training_mse"] = training_mse;
    if (kkt_gap) j["kkt_gap"] = *kkt_gap;
    if (sweeps) j["sweeps"] = *sweeps;
    if (n_support) j["n_support"] = *n_support;
    j["dropped_constant"] = dropped_constant;
    j["dropped_vif"] = dropped_vif;
    return j;
}

Diagnostics Diagnostics::from_json(const nlohmann::json &j) {
    Diagnostics d;
    if (j.contains("oob_mse")) d.oob_mse = j["oob_mse"].get<double>();
    if (j.contains("selected")) d.selected = j["selected"].get<std::vector<std::string>>();
    if (j.contains("adj_r2_trace")) d.adj_r2_trace = j["adj_r2_trace"].get<std::vector<double>>();
    if (j.contains("training_mse")) d.training_mse = j["training_mse"].get<std::vector<double>>();
    if (j.contains("kkt_gap")) d.kkt_gap = j["kkt_gap"].get<double>();
    if (j.contains("sweeps")) d.sweeps = j["sweeps"].get<int>();
    if (j.contains("n_support")) d.n_support = j["n_support"].get<std::size_t>();
    d.dropped_constant = j.value("dropped_constant", std::vector<std::string>{});
    d.dropped_vif = j.value("dropped_vif", std::vector<std::string>{});
    return d;
}

nlohmann::json TrainedModel::to_json() const {
    nlohmann::json j;
    j["format"] = "lur-model";
    j["version"] = kModelFormatVersion;
    j["toolkit_version"] = kToolkitVersion;
    j["family"] = to_string(family);
    j["hyperparameters"] = hyper;
    j["preprocessing"] = policy.to_json();
    j["seed"] = seed;
    j["n_train"] = n_train;
    j["feature_names"] = feature_names;
    j["transform"] = transform.to_json();
    j["diagnostics"] = diagnostics.to_json();
    nlohmann::json p;
    std::visit([&](const auto &v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
            p = {{"kind", "linear"}, {"intercept", v.fit.intercept}, {"coef", v.fit.coef}};
        } else if constexpr (std::is_same_v<T, SvrModel>) {
            nlohmann::json sv = nlohmann::json::array();
            for (Eigen::Index r = 0; r < v.support.rows(); ++r) {
                sv.push_back(to_std(v.support.row(r).transpose()));
            }
            p = {{"kind", "svr"}, {"gamma", v.gamma}, {"bias", v.bias}, {"support", sv}, {"coef", v.coef}};
        } else {
            nlohmann::json trees = nlohmann::json::array();
            for (const auto &t : v.trees) trees.push_back(t.to_json());
            p = {{"kind", "trees"}, {"base_score", v.base_score}, {"tree_weight", v.tree_weight}, {"trees", trees}};
        }
    }, params);
    j["params"] = std::move(p);
    return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json &j) {
    try {
        if (j.at("format").get<std::string>() != "lur-model") {
            throw ValidationError("not a model artifact");
        }
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw ValidationError(fmt::format("unsupported model artifact version {}", version));
        }
        TrainedModel m;
        m.family = parse_family(j.at("family").get<std::string>());
        m.hyper = j.at("hyperparameters").get<Resolved>();
        m.policy = PreprocessPolicy::from_json(j.at("preprocessing"));
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.transform = preprocess::FittedTransform::from_json(j.at("transform"));
        m.diagnostics = Diagnostics::from_json(j.at("diagnostics"));
        const auto &p = j.at("params");
        const auto kind = p.at("kind").get<std::string>();
        const auto d = m.transform.size();
        if (kind == "linear") {
            LinearParams lp;
            lp.fit.intercept = p.at("intercept").get<double>();
            lp.fit.coef = p.at("coef").get<std::vector<double>>();
            if (lp.fit.coef.size() != d) throw ValidationError("coefficient count does not match the transform");
            m.params = std::move(lp);
        } else if (kind == "svr") {
            SvrModel s;
            s.gamma = p.at("gamma").get<double>();
            s.bias = p.at("bias").get<double>();
            s.coef = p.at("coef").get<std::vector<double>>();
            const auto &sv = p.at("support");
            if (sv.size() != s.coef.size()) throw ValidationError("support vector count mismatch");
            s.support.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(d));
            for (std::size_t r = 0; r < sv.size(); ++r) {
                const auto row = sv[r].get<std::vector<double>>();
                if (row.size() != d) throw ValidationError("support vector width mismatch");
                for (std::size_t c = 0; c < d; ++c) {
                    s.support(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
                }
            }
            m.params = std::move(s);
        } else if (kind == "trees") {
            TreeEnsemble e;
            e.base_score = p.at("base_score").get<double>();
            e.tree_weight = p.at("tree_weight").get<double>();
            for (const auto &t : p.at("trees")) {
                e.trees.push_back(RegressionTree::from_json(t));
                e.trees.back().validate(d);
            }
            m.params = std::move(e);
        } else {
            throw ValidationError(fmt::format("unknown parameter block '{}'", kind));
        }
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(fmt::format("malformed model artifact: {}", e.what()));
    }
}

void TrainedModel::save(const std::filesystem::path &path) const { io::write_text(path, to_json().dump()); }

TrainedModel TrainedModel::load(const std::filesystem::path &path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
    }
    return from_json(j);
}

} // namespace lur::models
