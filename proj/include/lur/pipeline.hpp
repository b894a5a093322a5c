#pragma once

#include "lur/features.hpp"
#include "lur/geodata.hpp"
#include "lur/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lur::pipeline {

struct LayerInput {
    std::string name; // "roads", "landuse", "buildings" or "imperviousness" for the default predictors
    std::string path;
    geo::LayerKind kind = geo::LayerKind::polyline;
    std::string class_field;
    bool imperviousness = false;
};

struct FamilyEntry {
    models::Family family = models::Family::GBT;
    std::string label;                             // empty: family name
    std::optional<models::GridAxes> grid;          // empty: default grid
    std::optional<models::PreprocessPolicy> policy; // empty: family default

    std::string name() const { return label.empty() ? models::to_string(family) : label; }
};

/// Pipeline configuration. Paths are kept as written and resolved against the
/// directory of the config file; to_json(from_json(j)) reproduces every field.
struct RunConfig {
    std::filesystem::path base_dir; // not serialized

    std::string sites;
    std::vector<LayerInput> layers;
    std::string boundary;
    std::string city_field = "city";
    std::string population;

    std::optional<std::vector<features::PredictorSpec>> predictors; // empty: the default set
    double distance_ceiling = features::kDefaultDistanceCeiling;

    std::vector<FamilyEntry> families;
    int repeats = 4;
    int folds = 10;
    int inner_folds = 10;
    std::uint64_t cv_seed = 0;
    std::uint64_t seed = 0;

    std::string explain_family = "GBT";
    std::size_t top_k = 8;
    std::vector<std::string> dependence;

    std::string map_family = "GBT";
    double cell_size = 50.0;
    std::vector<double> thresholds{40, 45, 50, 55, 60, 65, 70};
    std::string grid_format = "ascii";

    double moran_power = 1.0;
    bool moran_row_standardize = true;
    int moran_n_perm = 999;

    std::string output_dir = "out";

    static RunConfig from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {});
    static RunConfig load(const std::filesystem::path &path);
    nlohmann::json to_json() const;
    /// SHA-256 of the canonical serialization.
    std::string hash() const;

    std::filesystem::path resolve(const std::string &path) const;
    std::filesystem::path out_dir() const { return resolve(output_dir); }
    std::vector<features::PredictorSpec> predictor_specs() const;
    const FamilyEntry &family(const std::string &label) const;

    /// Checks referenced files exist, families are distinct, seeds and sizes are sane.
    void validate() const;
};

struct RunOptions {
    unsigned threads = 0;
    std::optional<std::string> out_dir; // overrides the configured output directory
};

/// Applies --seed/--out style overrides and the LUR_OUT_DIR environment variable.
void apply_overrides(RunConfig &cfg, const RunOptions &opts);

/// Written next to each command's output directory as <command>.manifest.json.
struct Manifest {
    std::string command;
    std::string version;
    std::string config_hash;
    std::map<std::string, std::string> inputs;  // path -> sha256
    std::map<std::string, std::string> outputs; // path relative to the output root -> sha256

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json &j);
};

std::filesystem::path manifest_path(const RunConfig &cfg, const std::string &command);
Manifest read_manifest(const RunConfig &cfg, const std::string &command);

/// Checks an upstream command's manifest against the current config and the
/// files on disk. Throws ValidationError asking to re-run the command on any
/// mismatch.
Manifest verify_upstream(const RunConfig &cfg, const std::string &command);

struct LoadedInputs {
    geo::SiteCollection sites;
    std::map<std::string, geo::GeoLayer> layers;
    std::map<std::string, std::string> hashes; // resolved path -> sha256
};

LoadedInputs load_inputs(const RunConfig &cfg, bool with_sites = true);

/// Each command writes <out>/<command>/... plus <out>/<command>.manifest.json
/// and returns the manifest.
Manifest cmd_features(const RunConfig &cfg, const RunOptions &opts = {});
Manifest cmd_train(const RunConfig &cfg, const RunOptions &opts = {});
Manifest cmd_evaluate(const RunConfig &cfg, const RunOptions &opts = {});
Manifest cmd_explain(const RunConfig &cfg, const RunOptions &opts = {});
Manifest cmd_predict_grid(const RunConfig &cfg, const RunOptions &opts = {});
Manifest cmd_exposure(const RunConfig &cfg, const RunOptions &opts = {});

struct SynthRequest {
    std::uint64_t seed = 7;
    std::size_t n_sites = 232;
    int cities = 5;
    bool force = false;
};

/// Generates a synthetic dataset into `dir`. A non-empty directory is an error
/// unless `force` is set. Returns the written files.
std::vector<std::string> cmd_synth(const std::filesystem::path &dir, const SynthRequest &req);

/// Predictor matrix and response as written by cmd_features, rows in site order.
struct FeatureTable {
    features::PredictorMatrix matrix;
    std::vector<std::string> cities;
    std::vector<double> laeq;
    std::vector<geo::Point> locations;
};

FeatureTable read_feature_table(const RunConfig &cfg);

} // namespace lur::pipeline
