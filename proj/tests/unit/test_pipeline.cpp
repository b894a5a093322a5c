#include "lur/io_util.hpp"
#include "lur/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace lur;
using lur::testing::TempDir;
using nlohmann::json;

namespace {

std::string cli() {
    const char *p = std::getenv("LUR_CLI_PATH");
    REQUIRE_MESSAGE(p != nullptr, "LUR_CLI_PATH must point at the lur executable");
    return p;
}

struct Run {
    int code;
    std::string err;
};

Run lur_cmd(const TempDir &dir, const std::string &args) {
    const auto err = dir / "stderr.txt";
    const std::string cmd = cli() + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_text(err)};
}

// Small but complete configuration on top of the generated one.
std::filesystem::path shrink_config(const std::filesystem::path &data) {
    json c = json::parse(io::read_text(data / "config.json"));
    c["families"] = json::array({
        {{"family", "LM"}},
        {{"family", "ENET"}, {"grid", {{"alpha", {1.0}}, {"lambda", {0.01, 0.1}}}}},
        {{"family", "RF"}, {"grid", {{"n_trees", {20}}, {"min_node", {5}}}}},
        {{"family", "GBT"}, {"grid", {{"rounds", {20, 40}}, {"max_depth", {2}}}}},
    });
    c["cv"] = {{"repeats", 1}, {"folds", 3}, {"inner_folds", 2}, {"seed", 5}};
    c["mapping"]["cell_size"] = 150.0;
    c["moran"]["n_perm"] = 49;
    c["explain"]["dependence"] = {"LMRoad100"};
    io::write_text(data / "small.json", c.dump(2));
    return data / "small.json";
}

} // namespace

TEST_CASE("end-to-end run through the command-line tool") {
    TempDir dir("pipeline");
    const auto data = dir / "data";
    REQUIRE(lur_cmd(dir, "synth --out " + data.string() + " --sites 150 --cities 2").code == 0);
    const auto cfg = shrink_config(data).string();
    const auto out = data / "out";

    for (const char *c : {"features", "train", "evaluate", "explain", "predict-grid", "exposure"}) {
        const auto r = lur_cmd(dir, std::string(c) + " --config " + cfg + " --threads 2");
        CHECK_MESSAGE(r.code == 0, (std::string(c) + ": " + r.err));
        CHECK(std::filesystem::exists(out / (std::string(c) + ".manifest.json")));
    }
    for (const char *f : {"features/predictors.csv", "features/targets.csv", "train/model_GBT.json",
                          "train/selection.json", "evaluate/report.json", "evaluate/fold_metrics.csv",
                          "explain/shap_values.csv", "explain/dependence_LMRoad100.csv", "grid/city1.asc",
                          "grid/city2.asc", "grid/summary.json", "exposure/exposure.json", "exposure/exposure.csv"}) {
        CHECK_MESSAGE(std::filesystem::exists(out / f), (std::string(f)));
    }
    const json report = json::parse(io::read_text(out / "evaluate" / "report.json"));
    CHECK(report.contains("comparison"));
    const json exposure = json::parse(io::read_text(out / "exposure" / "exposure.json"));
    for (const auto &col : exposure["columns"]) {
        const auto counts = col["counts"].get<std::vector<double>>();
        for (std::size_t k = 1; k < counts.size(); ++k) CHECK(counts[k] <= counts[k - 1]);
    }

    SUBCASE("reruns reproduce identical manifests") {
        const auto before = io::read_text(out / "train.manifest.json");
        const auto before_eval = io::read_text(out / "evaluate.manifest.json");
        REQUIRE(lur_cmd(dir, "features --config " + cfg + " --threads 1").code == 0);
        REQUIRE(lur_cmd(dir, "train --config " + cfg + " --threads 1").code == 0);
        REQUIRE(lur_cmd(dir, "evaluate --config " + cfg + " --threads 3").code == 0);
        CHECK(io::read_text(out / "train.manifest.json") == before);
        CHECK(io::read_text(out / "evaluate.manifest.json") == before_eval);
    }

    SUBCASE("a corrupted upstream file stops the next stage") {
        auto text = io::read_text(out / "features" / "predictors.csv");
        text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
        io::write_text(out / "features" / "predictors.csv", text);
        const auto r = lur_cmd(dir, "train --config " + cfg);
        CHECK(r.code == 1);
        CHECK(r.err.find("re-run `lur features`") != std::string::npos);
    }

    SUBCASE("a changed config invalidates downstream outputs") {
        json c = json::parse(io::read_text(cfg));
        c["seed"] = 99;
        io::write_text(cfg, c.dump());
        const auto r = lur_cmd(dir, "explain --config " + cfg);
        CHECK(r.code == 1);
        CHECK(r.err.find("re-run") != std::string::npos);
    }

    SUBCASE("missing upstream stage") {
        const auto r = lur_cmd(dir, "train --config " + cfg + " --out " + (dir / "fresh").string());
        CHECK(r.code == 1);
    }
}

TEST_CASE("argument and config errors exit with status 1") {
    TempDir dir("pipeline-errors");
    CHECK(lur_cmd(dir, "features --config " + (dir / "nope.json").string()).code == 1);
    CHECK(lur_cmd(dir, "frobnicate").code == 1);
    const auto bad = dir.write("bad.json", R"({"inputs": {"sites": "s.csv"}, "colour": 1})");
    const auto r = lur_cmd(dir, "features --config " + bad.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("colour") != std::string::npos);

    const auto data = dir / "d";
    REQUIRE(lur_cmd(dir, "synth --out " + data.string() + " --sites 10 --cities 1").code == 0);
    CHECK(lur_cmd(dir, "synth --out " + data.string() + " --sites 10 --cities 1").code == 1);
    CHECK(lur_cmd(dir, "synth --out " + data.string() + " --sites 10 --cities 1 --force").code == 0);
}

TEST_CASE("config serialization round-trips") {
    TempDir dir("config");
    REQUIRE(lur_cmd(dir, "synth --out " + (dir / "d").string() + " --sites 10 --cities 1").code == 0);
    const auto cfg = pipeline::RunConfig::load(dir / "d" / "config.json");
    const auto again = pipeline::RunConfig::from_json(cfg.to_json(), cfg.base_dir);
    CHECK(again.to_json() == cfg.to_json());
    CHECK(again.hash() == cfg.hash());
    CHECK(cfg.families.size() == 5);
    CHECK_NOTHROW(cfg.validate());
    auto other = cfg;
    other.cell_size = 75;
    CHECK(other.hash() != cfg.hash());
}
