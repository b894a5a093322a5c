#include "lur/pipeline.hpp"

#include "lur/explain.hpp"
#include "lur/io_util.hpp"
#include "lur/mapping.hpp"
#include "lur/parallel.hpp"
#include "lur/rng.hpp"
#include "lur/spatialstats.hpp"
#include "lur/synth.hpp"
#include "lur/validation.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cstdlib>
#include <set>

namespace lur::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads a field, turning nlohmann type errors into ValidationError with the key path.
template <class T> T get(const json &j, const std::string &key, const std::string &where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ValidationError(fmt::format("config: {}{} is missing or has the wrong type", where, key));
    }
}

template <class T> T get_or(const json &j, const std::string &key, T fallback, const std::string &where) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, where);
}

void check_keys(const json &j, const std::set<std::string> &allowed, const std::string &where) {
    if (!j.is_object()) {
        throw ValidationError(fmt::format("config: {} must be an object", where.empty() ? "top level" : where));
    }
    for (const auto &[k, v] : j.items()) {
        if (!allowed.count(k)) {
            throw ValidationError(fmt::format("config: unknown key '{}{}'", where, k));
        }
    }
}

json axes_to_json(const models::GridAxes &axes) {
    json out = json::object();
    for (const auto &[name, values] : axes) {
        json arr = json::array();
        for (const auto &v : values) arr.push_back(v.to_json());
        out[name] = arr;
    }
    return out;
}

models::GridAxes axes_from_json(const json &j, const std::string &where) {
    if (!j.is_object()) throw ValidationError(fmt::format("config: {}grid must be an object", where));
    models::GridAxes axes;
    for (const auto &[name, values] : j.items()) {
        if (!values.is_array() || values.empty()) {
            throw ValidationError(fmt::format("config: {}grid.{} must be a non-empty array", where, name));
        }
        for (const auto &v : values) axes[name].push_back(models::HyperValue::from_json(v));
    }
    return axes;
}

validation::FamilyConfig family_config(const FamilyEntry &e) {
    validation::FamilyConfig c;
    c.family = e.family;
    c.label = e.label;
    c.policy = e.policy.value_or(models::default_policy(e.family));
    c.grid = models::expand_grid(e.grid.value_or(models::default_grid_axes(e.family)));
    return c;
}

std::string relative_to(const fs::path &p, const fs::path &root) { return fs::relative(p, root).generic_string(); }

// Hashes every output file and writes the manifest.
Manifest finish(const RunConfig &cfg, const std::string &command, const std::map<std::string, std::string> &inputs,
                const std::vector<fs::path> &outputs) {
    Manifest m;
    m.command = command;
    m.version = kToolkitVersion;
    m.config_hash = cfg.hash();
    m.inputs = inputs;
    for (const auto &p : outputs) m.outputs[relative_to(p, cfg.out_dir())] = io::sha256_file(p);
    io::write_text(manifest_path(cfg, command), m.to_json().dump(2) + "\n");
    return m;
}

// Raw input hashes keyed by the path as written in the config.
std::map<std::string, std::string> raw_hashes(const RunConfig &cfg, const std::vector<std::string> &paths) {
    std::map<std::string, std::string> out;
    for (const auto &p : paths) out["input:" + p] = io::sha256_file(cfg.resolve(p));
    return out;
}

void add_upstream(std::map<std::string, std::string> &inputs, const Manifest &up) {
    for (const auto &[path, hash] : up.outputs) inputs["output:" + path] = hash;
}

std::vector<std::string> layer_paths(const RunConfig &cfg) {
    std::vector<std::string> out;
    for (const auto &l : cfg.layers) out.push_back(l.path);
    return out;
}

fs::path command_dir(const RunConfig &cfg, const std::string &command) {
    const auto d = cfg.out_dir() / command;
    fs::create_directories(d);
    return d;
}

std::map<std::string, const geo::GeoLayer *> layer_map(const LoadedInputs &in) {
    std::map<std::string, const geo::GeoLayer *> out;
    for (const auto &[name, layer] : in.layers) out[name] = &layer;
    return out;
}

std::string model_file(const std::string &label) { return fmt::format("model_{}.json", label); }

const std::set<std::string> &vocabulary_for(const std::string &layer) {
    static const std::set<std::string> none;
    if (layer == "roads") return geo::road_classes();
    if (layer == "landuse") return geo::urban_atlas_codes();
    return none;
}

unsigned threads_of(const RunOptions &opts) { return opts.threads; }

} // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json &j, const fs::path &base_dir) {
    check_keys(j, {"inputs", "predictors", "distance_ceiling", "families", "cv", "seed", "explain", "mapping", "moran",
                   "output_dir"},
               "");
    RunConfig c;
    c.base_dir = base_dir;
    const auto &in = j.contains("inputs") ? j.at("inputs") : throw ValidationError("config: inputs is required");
    check_keys(in, {"sites", "layers", "boundary", "population"}, "inputs.");
    c.sites = get<std::string>(in, "sites", "inputs.");
    if (in.contains("layers")) {
        check_keys(in.at("layers"), {"roads", "landuse", "buildings", "imperviousness"}, "inputs.layers.");
        for (const auto &[name, l] : in.at("layers").items()) {
            const std::string where = "inputs.layers." + name + ".";
            check_keys(l, {"path", "kind", "class_field", "imperviousness"}, where);
            LayerInput li;
            li.name = name;
            li.path = get<std::string>(l, "path", where);
            li.kind = geo::parse_layer_kind(get<std::string>(l, "kind", where));
            li.class_field = get_or<std::string>(l, "class_field", "", where);
            li.imperviousness = get_or<bool>(l, "imperviousness", false, where);
            c.layers.push_back(std::move(li));
        }
    }
    if (in.contains("boundary")) {
        const auto &b = in.at("boundary");
        check_keys(b, {"path", "city_field"}, "inputs.boundary.");
        c.boundary = get<std::string>(b, "path", "inputs.boundary.");
        c.city_field = get_or<std::string>(b, "city_field", "city", "inputs.boundary.");
    }
    c.population = get_or<std::string>(in, "population", "", "inputs.");

    if (j.contains("predictors")) {
        const auto &p = j.at("predictors");
        if (p.is_string()) {
            if (p.get<std::string>() != "default") {
                throw ValidationError("config: predictors must be \"default\" or a list of predictor specs");
            }
        } else if (p.is_array()) {
            c.predictors = features::specs_from_json(p.dump());
        } else {
            throw ValidationError("config: predictors must be \"default\" or a list of predictor specs");
        }
    }
    c.distance_ceiling = get_or<double>(j, "distance_ceiling", c.distance_ceiling, "");

    if (j.contains("families")) {
        if (!j.at("families").is_array()) throw ValidationError("config: families must be an array");
        for (const auto &f : j.at("families")) {
            const std::string where = "families[].";
            check_keys(f, {"family", "label", "grid", "policy"}, where);
            FamilyEntry e;
            e.family = models::parse_family(get<std::string>(f, "family", where));
            e.label = get_or<std::string>(f, "label", "", where);
            if (f.contains("grid")) e.grid = axes_from_json(f.at("grid"), where);
            if (f.contains("policy")) e.policy = models::PreprocessPolicy::from_json(f.at("policy"));
            c.families.push_back(std::move(e));
        }
    }
    c.seed = get<std::uint64_t>(j, "seed", "");
    c.cv_seed = c.seed;
    if (j.contains("cv")) {
        const auto &cv = j.at("cv");
        check_keys(cv, {"repeats", "folds", "inner_folds", "seed"}, "cv.");
        c.repeats = get_or<int>(cv, "repeats", c.repeats, "cv.");
        c.folds = get_or<int>(cv, "folds", c.folds, "cv.");
        c.inner_folds = get_or<int>(cv, "inner_folds", c.inner_folds, "cv.");
        c.cv_seed = get_or<std::uint64_t>(cv, "seed", c.seed, "cv.");
    }
    if (j.contains("explain")) {
        const auto &e = j.at("explain");
        check_keys(e, {"family", "top_k", "dependence"}, "explain.");
        c.explain_family = get_or<std::string>(e, "family", c.explain_family, "explain.");
        c.top_k = get_or<std::size_t>(e, "top_k", c.top_k, "explain.");
        c.dependence = get_or<std::vector<std::string>>(e, "dependence", {}, "explain.");
    }
    if (j.contains("mapping")) {
        const auto &m = j.at("mapping");
        check_keys(m, {"family", "cell_size", "thresholds", "format"}, "mapping.");
        c.map_family = get_or<std::string>(m, "family", c.map_family, "mapping.");
        c.cell_size = get_or<double>(m, "cell_size", c.cell_size, "mapping.");
        c.thresholds = get_or<std::vector<double>>(m, "thresholds", c.thresholds, "mapping.");
        c.grid_format = get_or<std::string>(m, "format", c.grid_format, "mapping.");
    }
    if (j.contains("moran")) {
        const auto &m = j.at("moran");
        check_keys(m, {"power", "row_standardize", "n_perm"}, "moran.");
        c.moran_power = get_or<double>(m, "power", c.moran_power, "moran.");
        c.moran_row_standardize = get_or<bool>(m, "row_standardize", c.moran_row_standardize, "moran.");
        c.moran_n_perm = get_or<int>(m, "n_perm", c.moran_n_perm, "moran.");
    }
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "");
    return c;
}

RunConfig RunConfig::load(const fs::path &path) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::parse_error &e) {
        throw ValidationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
    }
    return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
    json layers_j = json::object();
    for (const auto &l : layers) {
        layers_j[l.name] = {{"path", l.path},
                            {"kind", geo::to_string(l.kind)},
                            {"class_field", l.class_field},
                            {"imperviousness", l.imperviousness}};
    }
    json inputs{{"sites", sites}, {"layers", layers_j}};
    if (!boundary.empty()) inputs["boundary"] = {{"path", boundary}, {"city_field", city_field}};
    if (!population.empty()) inputs["population"] = population;
    json fams = json::array();
    for (const auto &f : families) {
        json e{{"family", models::to_string(f.family)}};
        if (!f.label.empty()) e["label"] = f.label;
        if (f.grid) e["grid"] = axes_to_json(*f.grid);
        if (f.policy) e["policy"] = f.policy->to_json();
        fams.push_back(e);
    }
    return {{"inputs", inputs},
            {"predictors", predictors ? json::parse(features::specs_to_json(*predictors)) : json("default")},
            {"distance_ceiling", distance_ceiling},
            {"families", fams},
            {"cv", {{"repeats", repeats}, {"folds", folds}, {"inner_folds", inner_folds}, {"seed", cv_seed}}},
            {"seed", seed},
            {"explain", {{"family", explain_family}, {"top_k", top_k}, {"dependence", dependence}}},
            {"mapping",
             {{"family", map_family}, {"cell_size", cell_size}, {"thresholds", thresholds}, {"format", grid_format}}},
            {"moran", {{"power", moran_power}, {"row_standardize", moran_row_standardize}, {"n_perm", moran_n_perm}}},
            {"output_dir", output_dir}};
}

std::string RunConfig::hash() const { return io::sha256_hex(to_json().dump()); }

fs::path RunConfig::resolve(const std::string &path) const {
    const fs::path p(path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::vector<features::PredictorSpec> RunConfig::predictor_specs() const {
    return predictors ? *predictors : features::default_specs();
}

const FamilyEntry &RunConfig::family(const std::string &label) const {
    for (const auto &f : families) {
        if (f.name() == label) return f;
    }
    throw ValidationError(fmt::format("config: no model family labelled '{}'", label));
}

void RunConfig::validate() const {
    auto must_exist = [&](const std::string &what, const std::string &p) {
        if (p.empty()) throw ValidationError(fmt::format("config: {} path is empty", what));
        if (!fs::exists(resolve(p))) {
            throw ValidationError(fmt::format("config: {} '{}' not found", what, resolve(p).string()));
        }
    };
    must_exist("sites", sites);
    std::set<std::string> names;
    for (const auto &l : layers) {
        must_exist("layer " + l.name, l.path);
        names.insert(l.name);
    }
    if (!boundary.empty()) must_exist("boundary", boundary);
    if (!population.empty()) must_exist("population", population);
    for (const auto &s : predictor_specs()) {
        if (s.kind != features::PredictorKind::coordinate && !names.count(s.layer)) {
            throw ValidationError(fmt::format("config: predictor {} needs layer '{}', which is not configured", s.name,
                                              s.layer));
        }
    }
    std::set<std::string> labels;
    for (const auto &f : families) {
        if (!labels.insert(f.name()).second) {
            throw ValidationError(fmt::format("config: family label '{}' given twice", f.name()));
        }
        if (f.grid) {
            for (const auto &g : models::expand_grid(*f.grid)) (void)models::resolve_hyper(f.family, g, 1);
        }
    }
    if (repeats < 1 || folds < 2 || inner_folds < 2) {
        throw ValidationError("config: cv needs repeats >= 1, folds >= 2 and inner_folds >= 2");
    }
    if (!(cell_size > 0.0)) throw ValidationError("config: mapping.cell_size must be positive");
    if (grid_format != "ascii" && grid_format != "geojson") {
        throw ValidationError("config: mapping.format must be ascii or geojson");
    }
    for (std::size_t t = 1; t < thresholds.size(); ++t) {
        if (!(thresholds[t] > thresholds[t - 1])) {
            throw ValidationError("config: mapping.thresholds must be strictly increasing");
        }
    }
    if (!(moran_power > 0.0) || moran_n_perm < 1) {
        throw ValidationError("config: moran.power must be positive and moran.n_perm at least 1");
    }
    if (!(distance_ceiling > 0.0)) throw ValidationError("config: distance_ceiling must be positive");
}

void apply_overrides(RunConfig &cfg, const RunOptions &opts) {
    if (const char *env = std::getenv("LUR_OUT_DIR"); env && *env) cfg.output_dir = env;
    if (opts.out_dir) cfg.output_dir = *opts.out_dir;
}

// ---------------------------------------------------------------------------
// manifests
// ---------------------------------------------------------------------------

json Manifest::to_json() const {
    return {{"command", command}, {"version", version}, {"config_hash", config_hash}, {"inputs", inputs},
            {"outputs", outputs}};
}

Manifest Manifest::from_json(const json &j) {
    Manifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    } catch (const json::exception &e) {
        throw ValidationError(fmt::format("malformed manifest: {}", e.what()));
    }
    return m;
}

fs::path manifest_path(const RunConfig &cfg, const std::string &command) {
    return cfg.out_dir() / (command + ".manifest.json");
}

Manifest read_manifest(const RunConfig &cfg, const std::string &command) {
    const auto path = manifest_path(cfg, command);
    if (!fs::exists(path)) {
        throw ValidationError(fmt::format("no {} manifest at {}; run `lur {}` first", command, path.string(), command));
    }
    try {
        return Manifest::from_json(json::parse(io::read_text(path)));
    } catch (const json::parse_error &e) {
        throw ValidationError(fmt::format("{}: invalid manifest: {}", path.string(), e.what()));
    }
}

Manifest verify_upstream(const RunConfig &cfg, const std::string &command) {
    const auto m = read_manifest(cfg, command);
    const auto rerun = fmt::format("; re-run `lur {}`", command);
    if (m.config_hash != cfg.hash()) {
        throw ValidationError(fmt::format("{} outputs were produced with a different configuration{}", command, rerun));
    }
    for (const auto &[path, hash] : m.outputs) {
        const auto p = cfg.out_dir() / path;
        if (!fs::exists(p)) throw ValidationError(fmt::format("{} output {} is missing{}", command, path, rerun));
        if (io::sha256_file(p) != hash) {
            throw ValidationError(fmt::format("hash mismatch for {} output {}{}", command, path, rerun));
        }
    }
    for (const auto &[key, hash] : m.inputs) {
        fs::path p;
        if (key.rfind("input:", 0) == 0) {
            p = cfg.resolve(key.substr(6));
        } else if (key.rfind("output:", 0) == 0) {
            p = cfg.out_dir() / key.substr(7);
        } else {
            throw ValidationError(fmt::format("{} manifest has an unrecognised input '{}'", command, key));
        }
        if (!fs::exists(p) || io::sha256_file(p) != hash) {
            throw ValidationError(fmt::format("input {} of {} changed since it ran{}", p.string(), command, rerun));
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// inputs
// ---------------------------------------------------------------------------

LoadedInputs load_inputs(const RunConfig &cfg, bool with_sites) {
    LoadedInputs in;
    if (with_sites) {
        in.sites = geo::load_sites(cfg.resolve(cfg.sites));
        if (in.sites.sites.empty()) {
            throw ValidationError(fmt::format("{}: no usable sites", cfg.sites));
        }
    }
    std::vector<const geo::GeoLayer *> all;
    for (const auto &l : cfg.layers) {
        const auto path = cfg.resolve(l.path);
        geo::GeoLayer layer = l.kind == geo::LayerKind::raster
                                  ? geo::load_raster(path, {l.imperviousness})
                                  : geo::load_vector_layer(path, l.kind, l.class_field, vocabulary_for(l.name));
        in.layers.emplace(l.name, std::move(layer));
    }
    for (const auto &[name, layer] : in.layers) all.push_back(&layer);
    geo::check_single_crs(all);
    return in;
}

FeatureTable read_feature_table(const RunConfig &cfg) {
    const auto dir = cfg.out_dir() / "features";
    FeatureTable t;
    t.matrix = features::read_csv(dir / "predictors.csv");
    const auto rows = io::read_csv(dir / "targets.csv");
    if (rows.empty() || rows[0] != std::vector<std::string>{"site_id", "city", "x", "y", "laeq"}) {
        throw ValidationError("targets.csv: unexpected header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() == 1 && rows[i][0].empty()) continue;
        if (rows[i].size() != 5) throw ValidationError(fmt::format("targets.csv: row {} is malformed", i));
        const auto x = io::parse_double(rows[i][2]), y = io::parse_double(rows[i][3]), l = io::parse_double(rows[i][4]);
        if (!x || !y || !l) throw ValidationError(fmt::format("targets.csv: row {} is not numeric", i));
        if (rows[i][0] != t.matrix.row_ids.at(t.laeq.size())) {
            throw ValidationError("targets.csv and predictors.csv disagree on row order");
        }
        t.cities.push_back(rows[i][1]);
        t.locations.push_back({*x, *y});
        t.laeq.push_back(*l);
    }
    if (t.laeq.size() != t.matrix.rows()) {
        throw ValidationError("targets.csv and predictors.csv have different row counts");
    }
    return t;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

Manifest cmd_features(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    const auto in = load_inputs(cfg);
    const auto specs = cfg.predictor_specs();
    auto paths = layer_paths(cfg);
    paths.push_back(cfg.sites);
    const auto inputs = raw_hashes(cfg, paths);

    const features::FeatureContext ctx(layer_map(in), specs, cfg.distance_ceiling);
    std::string key_text = features::fingerprint(specs, cfg.distance_ceiling);
    for (const auto &[p, h] : inputs) key_text += "|" + p + "=" + h;
    const auto key = io::sha256_hex(key_text);
    const auto cache = cfg.out_dir() / "cache" / fmt::format("predictors-{}.bin", key.substr(0, 16));

    features::PredictorMatrix m;
    if (fs::exists(cache)) {
        m = features::read_binary(cache);
    } else {
        std::vector<features::Location> locs;
        for (const auto &s : in.sites.sites) locs.push_back({s.site_id, s.location()});
        m = features::build_predictor_matrix(locs, specs, ctx, threads_of(opts));
        fs::create_directories(cache.parent_path());
        features::write_binary(cache, m);
    }

    const auto dir = command_dir(cfg, "features");
    features::write_csv(dir / "predictors.csv", m);
    std::string targets = "site_id,city,x,y,laeq\n";
    for (const auto &s : in.sites.sites) {
        targets += fmt::format("{},{},{},{},{}\n", io::csv_field(s.site_id), io::csv_field(s.city), io::format_double(s.x),
                               io::format_double(s.y), io::format_double(s.mean_laeq));
    }
    io::write_text(dir / "targets.csv", targets);
    json rejected = json::array();
    for (const auto &r : in.sites.rejected) rejected.push_back({{"row", r.row_number}, {"reason", r.reason}});
    json units = json::object();
    for (std::size_t j = 0; j < m.cols(); ++j) units[m.column_names[j]] = m.units.empty() ? "" : m.units[j];
    const json meta{{"rows", m.rows()},
                    {"columns", m.column_names},
                    {"units", units},
                    {"censored_distances", ctx.censored()},
                    {"distance_ceiling", cfg.distance_ceiling},
                    {"rejected_sites", rejected},
                    {"years", in.sites.years},
                    {"cache_key", key}};
    io::write_text(dir / "features.json", meta.dump(2) + "\n");
    return finish(cfg, "features", inputs,
                  {dir / "predictors.csv", dir / "targets.csv", dir / "features.json"});
}

Manifest cmd_train(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    if (cfg.families.empty()) throw ValidationError("config: no model families to train");
    const auto up = verify_upstream(cfg, "features");
    const auto t = read_feature_table(cfg);
    const auto &names = t.matrix.column_names;
    const auto folds = validation::make_fold_plan(t.laeq.size(), cfg.seed, 1, cfg.folds, 2).outer.front();
    const auto dir = command_dir(cfg, "train");
    std::vector<fs::path> outputs;
    json selection = json::array();
    for (const auto &entry : cfg.families) {
        const auto fc = family_config(entry);
        const auto tuned = validation::tune(t.matrix.values, names, t.laeq, fc, folds, cfg.seed, threads_of(opts));
        const models::ModelSpec spec{fc.family, fc.grid[tuned.best], fc.policy, cfg.seed};
        const auto model = models::fit_model(spec, t.matrix.values, names, t.laeq, threads_of(opts));
        const auto path = dir / model_file(entry.name());
        model.save(path);
        outputs.push_back(path);
        json hyper = json::object();
        for (const auto &[k, v] : fc.grid[tuned.best]) hyper[k] = v.to_json();
        selection.push_back({{"label", entry.name()},
                             {"family", models::to_string(fc.family)},
                             {"grid_size", fc.grid.size()},
                             {"selected_index", tuned.best},
                             {"selected", hyper},
                             {"resolved", model.hyper},
                             {"cv_rmse", tuned.cv_rmse},
                             {"diagnostics", model.diagnostics.to_json()}});
    }
    io::write_text(dir / "selection.json", selection.dump(2) + "\n");
    outputs.push_back(dir / "selection.json");
    std::map<std::string, std::string> inputs;
    add_upstream(inputs, up);
    return finish(cfg, "train", inputs, outputs);
}

Manifest cmd_evaluate(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    if (cfg.families.empty()) throw ValidationError("config: no model families to evaluate");
    const auto up = verify_upstream(cfg, "features");
    const auto t = read_feature_table(cfg);
    std::vector<validation::FamilyConfig> fams;
    for (const auto &e : cfg.families) fams.push_back(family_config(e));
    const auto plan = validation::make_fold_plan(t.laeq.size(), cfg.cv_seed, cfg.repeats, cfg.folds, cfg.inner_folds);
    validation::CvOptions cv_opts;
    cv_opts.threads = threads_of(opts);
    auto report = validation::nested_cv(t.matrix.values, t.matrix.column_names, t.laeq, t.cities, fams, plan, cv_opts);

    const auto w = spatial::inverse_distance_weights(t.locations, cfg.moran_power, cfg.moran_row_standardize);
    json moran = json::object();
    for (std::size_t k = 0; k < report.families.size(); ++k) {
        const auto res = spatial::permutation_test(report.oof_residuals[k], w, cfg.moran_n_perm,
                                                   derive_key(cfg.seed, {0x5245534944ULL}), threads_of(opts));
        moran[report.families[k]] = res.to_json();
    }
    report.residual_diagnostics = {{"morans_i", moran},
                                   {"weights", {{"power", cfg.moran_power}, {"row_standardized", cfg.moran_row_standardize}}},
                                   {"residual", "mean out-of-fold residual per site across repeats"}};
    const auto dir = command_dir(cfg, "evaluate");
    const auto outputs = report.write(dir);
    std::map<std::string, std::string> inputs;
    add_upstream(inputs, up);
    return finish(cfg, "evaluate", inputs, outputs);
}

Manifest cmd_explain(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    const auto up_f = verify_upstream(cfg, "features");
    const auto up_t = verify_upstream(cfg, "train");
    const auto &entry = cfg.family(cfg.explain_family);
    const auto model = models::TrainedModel::load(cfg.out_dir() / "train" / model_file(entry.name()));
    if (!model.is_tree()) {
        throw ValidationError(fmt::format("explain needs a tree model (RF or GBT); '{}' is {}", entry.name(),
                                          models::to_string(model.family)));
    }
    const auto t = read_feature_table(cfg);
    const auto shap = explain::tree_shap(model, t.matrix.values, t.matrix.column_names, t.matrix.row_ids, t.cities,
                                         threads_of(opts));
    const auto dir = command_dir(cfg, "explain");
    const auto outputs = explain::write_outputs(dir, shap, cfg.dependence, cfg.top_k);
    std::map<std::string, std::string> inputs;
    add_upstream(inputs, up_f);
    add_upstream(inputs, up_t);
    return finish(cfg, "explain", inputs, outputs);
}

Manifest cmd_predict_grid(const RunConfig &cfg, const RunOptions &opts) {
    cfg.validate();
    if (cfg.boundary.empty()) throw ValidationError("config: predict-grid needs inputs.boundary");
    const auto up = verify_upstream(cfg, "train");
    const auto &entry = cfg.family(cfg.map_family);
    const auto model = models::TrainedModel::load(cfg.out_dir() / "train" / model_file(entry.name()));
    const auto in = load_inputs(cfg, false);
    const auto boundaries =
        geo::load_vector_layer(cfg.resolve(cfg.boundary), geo::LayerKind::polygon, cfg.city_field);
    if (boundaries.features.empty()) throw ValidationError("boundary file holds no polygons");
    const auto specs = cfg.predictor_specs();
    const features::FeatureContext ctx(layer_map(in), specs, cfg.distance_ceiling);

    const auto dir = command_dir(cfg, "grid");
    std::vector<fs::path> outputs;
    json summary = json::array();
    std::map<std::string, int> seen;
    for (const auto &f : boundaries.features) {
        std::string name = f.class_tag.empty() ? "city" : f.class_tag;
        if (seen[name]++ > 0) name += fmt::format("_{}", seen[name]);
        auto grid = mapping::make_grid(std::get<geo::Polygon>(f.geometry), cfg.cell_size, name);
        mapping::predict_grid(grid, model, ctx, specs, threads_of(opts));
        const auto asc = dir / (name + ".asc");
        mapping::export_grid(grid, "ascii", asc);
        outputs.push_back(asc);
        if (cfg.grid_format == "geojson") {
            const auto gj = dir / (name + ".geojson");
            mapping::export_grid(grid, "geojson", gj);
            outputs.push_back(gj);
        }
        double lo = 1e300, hi = -1e300, sum = 0.0;
        std::size_t k = 0;
        for (std::size_t c = 0; c < grid.size(); ++c) {
            if (grid.masked[c]) continue;
            lo = std::min(lo, grid.value(c));
            hi = std::max(hi, grid.value(c));
            sum += grid.value(c);
            ++k;
        }
        json failures = json::array();
        for (std::size_t i = 0; i < grid.failures.size() && i < 20; ++i) {
            failures.push_back({{"cell", grid.failures[i].cell}, {"reason", grid.failures[i].reason}});
        }
        summary.push_back({{"city", name},
                           {"file", name + ".asc"},
                           {"rows", grid.rows()},
                           {"cols", grid.cols()},
                           {"cell_size", cfg.cell_size},
                           {"unmasked", k},
                           {"failed_cells", grid.failures.size()},
                           {"failures", failures},
                           {"min", k ? lo : 0.0},
                           {"mean", k ? sum / static_cast<double>(k) : 0.0},
                           {"max", k ? hi : 0.0}});
    }
    io::write_text(dir / "summary.json", summary.dump(2) + "\n");
    outputs.push_back(dir / "summary.json");
    auto inputs = raw_hashes(cfg, [&] {
        auto p = layer_paths(cfg);
        p.push_back(cfg.boundary);
        return p;
    }());
    add_upstream(inputs, up);
    return finish(cfg, "predict-grid", inputs, outputs);
}

Manifest cmd_exposure(const RunConfig &cfg, const RunOptions &) {
    cfg.validate();
    if (cfg.population.empty()) throw ValidationError("config: exposure needs inputs.population");
    const auto up = verify_upstream(cfg, "predict-grid");
    const auto summary = json::parse(io::read_text(cfg.out_dir() / "grid" / "summary.json"));
    std::vector<mapping::NoiseGrid> grids;
    for (const auto &s : summary) {
        mapping::NoiseGrid g;
        g.city = s.at("city").get<std::string>();
        g.raster = *geo::load_raster(cfg.out_dir() / "grid" / s.at("file").get<std::string>()).raster;
        g.masked.resize(g.raster.values.size());
        for (std::size_t c = 0; c < g.masked.size(); ++c) g.masked[c] = g.raster.is_nodata(g.raster.values[c]) ? 1 : 0;
        grids.push_back(std::move(g));
    }
    const auto pop = geo::load_raster(cfg.resolve(cfg.population));
    const auto table = mapping::exposure_table(grids, *pop.raster, cfg.thresholds);
    const auto dir = command_dir(cfg, "exposure");
    io::write_text(dir / "exposure.json", table.to_json().dump(2) + "\n");
    io::write_text(dir / "exposure.csv", table.to_csv());
    auto inputs = raw_hashes(cfg, {cfg.population});
    add_upstream(inputs, up);
    return finish(cfg, "exposure", inputs, {dir / "exposure.json", dir / "exposure.csv"});
}

std::vector<std::string> cmd_synth(const fs::path &dir, const SynthRequest &req) {
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        throw ValidationError(fmt::format("{} exists and is not a directory", dir.string()));
    }
    if (fs::exists(dir) && !fs::is_empty(dir) && !req.force) {
        throw ValidationError(fmt::format("{} is not empty; pass --force to overwrite", dir.string()));
    }
    synth::SynthOptions o;
    o.seed = req.seed;
    o.n_sites = req.n_sites;
    o.cities = req.cities;
    return synth::write_dataset(dir, synth::generate(o));
}

} // namespace lur::pipeline
