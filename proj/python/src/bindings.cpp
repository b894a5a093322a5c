#include "lur/common.hpp"
#include "lur/explain.hpp"
#include "lur/geometry.hpp"
#include "lur/models.hpp"
#include "lur/pipeline.hpp"
#include "lur/preprocess.hpp"
#include "lur/spatialstats.hpp"
#include "lur/synth.hpp"
#include "lur/validation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace lur;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const nlohmann::json &j) { return j.dump(); }

models::HyperMap hyper_from(const py::dict &d) {
    models::HyperMap out;
    for (const auto &[k, v] : d) {
        const auto name = py::cast<std::string>(k);
        if (py::isinstance<py::str>(v)) {
            out[name] = models::HyperValue(py::cast<std::string>(v));
        } else {
            out[name] = models::HyperValue(py::cast<double>(v));
        }
    }
    return out;
}

std::vector<geo::Point> points_from(const Matrix &xy) {
    if (xy.cols() != 2) throw ValidationError("coordinates must be an (n, 2) array");
    std::vector<geo::Point> out;
    for (Eigen::Index i = 0; i < xy.rows(); ++i) out.push_back({xy(i, 0), xy(i, 1)});
    return out;
}

validation::FamilyConfig family_from(const py::dict &d) {
    auto fam = validation::default_family_config(models::parse_family(py::cast<std::string>(d["family"])));
    if (d.contains("label")) fam.label = py::cast<std::string>(d["label"]);
    if (d.contains("grid")) {
        models::GridAxes axes;
        for (const auto &[k, v] : py::cast<py::dict>(d["grid"])) {
            auto &axis = axes[py::cast<std::string>(k)];
            for (const auto &item : py::cast<py::list>(v)) {
                if (py::isinstance<py::str>(item)) {
                    axis.emplace_back(py::cast<std::string>(item));
                } else {
                    axis.emplace_back(py::cast<double>(item));
                }
            }
        }
        fam.grid = models::expand_grid(axes);
    }
    return fam;
}

using CommandFn = pipeline::Manifest (*)(const pipeline::RunConfig &, const pipeline::RunOptions &);

std::string run_command(CommandFn fn, const std::filesystem::path &config, unsigned threads,
                        std::optional<std::string> out_dir) {
    auto cfg = pipeline::RunConfig::load(config);
    pipeline::RunOptions opts{threads, std::move(out_dir)};
    pipeline::apply_overrides(cfg, opts);
    py::gil_scoped_release release;
    return dump(fn(cfg, opts).to_json());
}

} // namespace

PYBIND11_MODULE(_lur, m) {
    m.doc() = "Land-use regression noise modelling toolkit (compiled core).";
    m.attr("__version__") = kToolkitVersion;

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<ComputeError> compute_error(m, "ComputeError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError &e) {
            py::set_error(validation_error, e.what());
        } catch (const ComputeError &e) {
            py::set_error(compute_error, e.what());
        }
    });

    py::class_<models::TrainedModel>(m, "Model")
        .def_property_readonly("family", [](const models::TrainedModel &t) { return models::to_string(t.family); })
        .def_readonly("feature_names", &models::TrainedModel::feature_names)
        .def_readonly("hyper", &models::TrainedModel::hyper)
        .def_readonly("n_train", &models::TrainedModel::n_train)
        .def_property_readonly("active_features", [](const models::TrainedModel &t) { return t.transform.columns; })
        .def("predict", &models::TrainedModel::predict, py::arg("x"), py::arg("names"))
        .def("to_json", [](const models::TrainedModel &t) { return dump(t.to_json()); })
        .def("diagnostics_json", [](const models::TrainedModel &t) { return dump(t.diagnostics.to_json()); })
        .def("save", &models::TrainedModel::save, py::arg("path"))
        .def_static("load", &models::TrainedModel::load, py::arg("path"))
        .def_static("from_json",
                    [](const std::string &text) { return models::TrainedModel::from_json(nlohmann::json::parse(text)); });

    m.def(
        "fit_model",
        [](const std::string &family, const Matrix &x, const std::vector<std::string> &names, const std::vector<double> &y,
           const py::dict &hyper, std::uint64_t seed, unsigned threads) {
            auto spec = models::ModelSpec::make(models::parse_family(family), hyper_from(hyper), seed);
            py::gil_scoped_release release;
            return models::fit_model(spec, x, names, y, threads);
        },
        py::arg("family"), py::arg("x"), py::arg("names"), py::arg("y"), py::arg("hyper") = py::dict(),
        py::arg("seed") = 0, py::arg("threads") = 0);

    m.def(
        "tree_shap",
        [](const models::TrainedModel &model, const Matrix &x, const std::vector<std::string> &names, unsigned threads) {
            const auto s = explain::tree_shap(model, x, names, {}, {}, threads);
            return py::make_tuple(s.base_value, s.values, s.feature_names);
        },
        py::arg("model"), py::arg("x"), py::arg("names"), py::arg("threads") = 0,
        "Returns (base_value, values[rows, features], feature_names).");

    m.def(
        "nested_cv",
        [](const Matrix &x, const std::vector<std::string> &names, const std::vector<double> &y,
           const std::vector<std::string> &cities, const std::vector<py::dict> &families, int repeats, int folds,
           int inner_folds, std::uint64_t seed, unsigned threads) {
            std::vector<validation::FamilyConfig> fams;
            for (const auto &d : families) fams.push_back(family_from(d));
            const auto plan = validation::make_fold_plan(y.size(), seed, repeats, folds, inner_folds);
            py::gil_scoped_release release;
            return dump(validation::nested_cv(x, names, y, cities, fams, plan, {.threads = threads}).to_json());
        },
        py::arg("x"), py::arg("names"), py::arg("y"), py::arg("cities"), py::arg("families"), py::arg("repeats") = 4,
        py::arg("folds") = 10, py::arg("inner_folds") = 10, py::arg("seed") = 0, py::arg("threads") = 0);

    m.def("wilcoxon_rank_sum", [](const std::vector<double> &a, const std::vector<double> &b) {
        return validation::wilcoxon_rank_sum(a, b);
    });
    m.def("benjamini_hochberg", [](const std::vector<double> &p) { return validation::benjamini_hochberg(p); });
    m.def("r2", [](const std::vector<double> &y, const std::vector<double> &yhat) { return validation::r2(y, yhat); });
    m.def("rmse", [](const std::vector<double> &y, const std::vector<double> &yhat) { return validation::rmse(y, yhat); });

    m.def(
        "morans_i",
        [](const std::vector<double> &values, const Matrix &xy, double power, bool row_standardize) {
            const auto pts = points_from(xy);
            return spatial::morans_i(values, spatial::inverse_distance_weights(pts, power, row_standardize));
        },
        py::arg("values"), py::arg("xy"), py::arg("power") = 1.0, py::arg("row_standardize") = true);
    m.def(
        "moran_test",
        [](const std::vector<double> &values, const Matrix &xy, int n_perm, std::uint64_t seed, double power,
           bool row_standardize) {
            const auto pts = points_from(xy);
            const auto w = spatial::inverse_distance_weights(pts, power, row_standardize);
            return dump(spatial::permutation_test(values, w, n_perm, seed).to_json());
        },
        py::arg("values"), py::arg("xy"), py::arg("n_perm") = 999, py::arg("seed") = 0, py::arg("power") = 1.0,
        py::arg("row_standardize") = true);

    m.def("yeo_johnson", &preprocess::yeo_johnson, py::arg("y"), py::arg("lambda_"));
    m.def("fit_yeo_johnson_lambda", [](const std::vector<double> &v) { return preprocess::fit_lambda(v); });
    m.def("variance_inflation", &preprocess::variance_inflation, py::arg("x"));

    m.def(
        "segment_length_in_circle",
        [](std::pair<double, double> a, std::pair<double, double> b, std::pair<double, double> c, double r) {
            return geo::clipped_length({a.first, a.second}, {b.first, b.second}, {c.first, c.second}, r);
        },
        py::arg("a"), py::arg("b"), py::arg("center"), py::arg("radius"));

    m.def(
        "synth",
        [](const std::filesystem::path &dir, std::uint64_t seed, std::size_t n_sites, int cities, bool force) {
            py::gil_scoped_release release;
            return pipeline::cmd_synth(dir, {seed, n_sites, cities, force});
        },
        py::arg("out_dir"), py::arg("seed") = 7, py::arg("n_sites") = 232, py::arg("cities") = 5,
        py::arg("force") = false);

    const auto bind_cmd = [&](const char *name, CommandFn fn) {
        m.def(name, [fn](const std::filesystem::path &config, unsigned threads, std::optional<std::string> out) {
            return run_command(fn, config, threads, std::move(out));
        }, py::arg("config"), py::arg("threads") = 0, py::arg("out_dir") = py::none());
    };
    bind_cmd("features", &pipeline::cmd_features);
    bind_cmd("train", &pipeline::cmd_train);
    bind_cmd("evaluate", &pipeline::cmd_evaluate);
    bind_cmd("explain", &pipeline::cmd_explain);
    bind_cmd("predict_grid", &pipeline::cmd_predict_grid);
    bind_cmd("exposure", &pipeline::cmd_exposure);
}
