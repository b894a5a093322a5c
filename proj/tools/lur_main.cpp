#include "lur/common.hpp"
#include "lur/parallel.hpp"
#include "lur/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

using lur::pipeline::Manifest;
using lur::pipeline::RunConfig;
using lur::pipeline::RunOptions;

void print_manifest(const Manifest &m) {
    fmt::print("{}: wrote {} file(s) (config {})\n", m.command, m.outputs.size(), m.config_hash.substr(0, 12));
    for (const auto &[path, hash] : m.outputs) fmt::print("  {}  {}\n", hash.substr(0, 12), path);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Land-use regression noise modelling toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lur::kToolkitVersion));

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    bool force = false;

    auto add_common = [&](CLI::App *sub, bool needs_config) {
        auto *opt = sub->add_option("--config", config_path, "Run configuration (JSON)");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the configured seeds");
        sub->add_option("--threads", threads, "Worker threads (default: all cores)");
        sub->add_option("--out", out, "Output directory");
        sub->add_flag("--force", force, "Overwrite a non-empty output directory (synth)");
    };

    std::size_t n_sites = 232;
    int cities = 5;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic multi-city dataset");
    add_common(synth, false);
    synth->add_option("--sites", n_sites, "Number of monitoring sites")->check(CLI::PositiveNumber);
    synth->add_option("--cities", cities, "Number of cities")->check(CLI::PositiveNumber);

    const std::vector<std::pair<std::string, std::string>> commands{
        {"features", "Extract predictors at every monitoring site"},
        {"train", "Tune and fit one final model per family"},
        {"evaluate", "Nested cross-validation and model comparison"},
        {"explain", "TreeSHAP attributions for the configured tree model"},
        {"predict-grid", "Predict noise on a regular grid per city"},
        {"exposure", "Population exposure above each threshold"}};
    for (const auto &[name, help] : commands) add_common(app.add_subcommand(name, help), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!threads) {
            if (const char *env = std::getenv("LUR_THREADS"); env && *env) threads = static_cast<unsigned>(std::stoul(env));
        }
        if (threads) lur::set_default_threads(*threads);

        if (synth->parsed()) {
            std::string dir = out.value_or("");
            if (dir.empty()) {
                const char *env = std::getenv("LUR_OUT_DIR");
                if (!env || !*env) throw lur::ValidationError("synth needs --out (or LUR_OUT_DIR)");
                dir = env;
            }
            lur::pipeline::SynthRequest req;
            req.seed = seed.value_or(7);
            req.n_sites = n_sites;
            req.cities = cities;
            req.force = force;
            const auto files = lur::pipeline::cmd_synth(dir, req);
            fmt::print("synth: wrote {} files to {}\n", files.size(), dir);
            return 0;
        }

        RunConfig cfg = RunConfig::load(config_path);
        RunOptions opts;
        opts.threads = threads.value_or(0);
        opts.out_dir = out;
        lur::pipeline::apply_overrides(cfg, opts);
        if (seed) {
            cfg.seed = *seed;
            cfg.cv_seed = *seed;
        }
        const auto *sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        Manifest m;
        if (name == "features") m = lur::pipeline::cmd_features(cfg, opts);
        else if (name == "train") m = lur::pipeline::cmd_train(cfg, opts);
        else if (name == "evaluate") m = lur::pipeline::cmd_evaluate(cfg, opts);
        else if (name == "explain") m = lur::pipeline::cmd_explain(cfg, opts);
        else if (name == "predict-grid") m = lur::pipeline::cmd_predict_grid(cfg, opts);
        else if (name == "exposure") m = lur::pipeline::cmd_exposure(cfg, opts);
        print_manifest(m);
        return 0;
    } catch (const lur::ValidationError &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    } catch (const lur::ComputeError &e) {
        fmt::print(stderr, "computation failed: {}\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        fmt::print(stderr, "computation failed: {}\n", e.what());
        return 2;
    }
}
