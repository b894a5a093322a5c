#include "lur/mapping.hpp"

#include "lur/io_util.hpp"
#include "lur/parallel.hpp"

#include <fmt/core.h>

#include <cmath>
#include <limits>

namespace lur::mapping {

std::size_t NoiseGrid::unmasked() const {
    std::size_t n = 0;
    for (char m : masked) n += m ? 0 : 1;
    return n;
}

NoiseGrid make_grid(const geo::Polygon &boundary, double cell, const std::string &city) {
    if (!(cell > 0.0) || !std::isfinite(cell)) {
        throw ValidationError(fmt::format("cell size must be positive, got {}", cell));
    }
    if (!(geo::area(boundary) > 0.0)) {
        throw ValidationError(fmt::format("boundary{} has zero area", city.empty() ? "" : " of " + city));
    }
    const geo::BBox box = geo::bounds(geo::Geometry{boundary});
    NoiseGrid g;
    g.city = city;
    auto &r = g.raster;
    r.x_ll = box.min_x;
    r.y_ll = box.min_y;
    r.cell_size = cell;
    r.n_cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((box.max_x - box.min_x) / cell)));
    r.n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((box.max_y - box.min_y) / cell)));
    r.nodata = -9999.0;
    const std::size_t n = r.n_rows * r.n_cols;
    r.values.assign(n, r.nodata);
    g.masked.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        g.masked[c] = geo::contains(boundary, g.centroid(c)) ? 0 : 1;
    }
    return g;
}

void predict_grid(NoiseGrid &grid, const models::TrainedModel &model, const features::FeatureContext &ctx,
                  const std::vector<features::PredictorSpec> &specs, unsigned threads) {
    const auto all = features::with_coordinates(specs);
    std::vector<std::string> names;
    for (const auto &s : all) names.push_back(s.name);
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (!grid.masked[c]) cells.push_back(c);
    }
    Matrix x(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(all.size()));
    std::vector<std::string> reasons(cells.size());
    parallel_for(
        cells.size(),
        [&](std::size_t k) {
            const geo::Point p = grid.centroid(cells[k]);
            for (std::size_t j = 0; j < all.size(); ++j) {
                try {
                    const double v = ctx.evaluate(all[j], p);
                    if (!std::isfinite(v)) {
                        reasons[k] = fmt::format("predictor '{}' is not finite", all[j].name);
                        return;
                    }
                    x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
                } catch (const std::exception &e) {
                    reasons[k] = fmt::format("predictor '{}': {}", all[j].name, e.what());
                    return;
                }
            }
        },
        threads);
    std::vector<Eigen::Index> ok;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (reasons[k].empty()) {
            ok.push_back(static_cast<Eigen::Index>(k));
        } else {
            grid.failures.push_back({cells[k], reasons[k]});
        }
    }
    if (static_cast<double>(grid.failures.size()) > 0.05 * static_cast<double>(cells.size())) {
        throw ComputeError(fmt::format("feature extraction failed for {} of {} cells{}; first: {}",
                                       grid.failures.size(), cells.size(),
                                       grid.city.empty() ? "" : " in " + grid.city, grid.failures.front().reason));
    }
    Matrix good(static_cast<Eigen::Index>(ok.size()), x.cols());
    for (std::size_t i = 0; i < ok.size(); ++i) good.row(static_cast<Eigen::Index>(i)) = x.row(ok[i]);
    const auto pred = model.predict(good, names);
    for (const auto &f : grid.failures) {
        grid.masked[f.cell] = 1;
        grid.raster.values[f.cell] = grid.raster.nodata;
    }
    for (std::size_t i = 0; i < ok.size(); ++i) {
        grid.raster.values[cells[static_cast<std::size_t>(ok[i])]] = pred[i];
    }
}

const ExposureColumn &ExposureTable::column(const std::string &name) const {
    for (const auto &c : columns) {
        if (c.name == name) return c;
    }
    throw ValidationError(fmt::format("exposure table has no column '{}'", name));
}

nlohmann::json ExposureTable::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto &c : columns) {
        cols.push_back({{"name", c.name}, {"population", c.population}, {"counts", c.counts}, {"percents", c.percents}});
    }
    return {{"thresholds", thresholds}, {"band_semantics", "population in cells predicted strictly above threshold"},
            {"columns", cols}};
}

std::string ExposureTable::to_csv() const {
    std::string out = "threshold";
    for (const auto &c : columns) out += "," + io::csv_field(c.name + "_count") + "," + io::csv_field(c.name + "_percent");
    out += "\n";
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        out += ">" + io::format_double(thresholds[t]);
        for (const auto &c : columns) {
            out += "," + io::format_double(c.counts[t]) + "," + io::format_double(c.percents[t]);
        }
        out += "\n";
    }
    return out;
}

ExposureTable exposure_table(const std::vector<NoiseGrid> &grids, const geo::Raster &population,
                             const std::vector<double> &thresholds) {
    if (grids.empty()) {
        throw ValidationError("exposure_table needs at least one grid");
    }
    for (std::size_t t = 1; t < thresholds.size(); ++t) {
        if (!(thresholds[t] > thresholds[t - 1])) {
            throw ValidationError("exposure thresholds must be strictly increasing");
        }
    }
    // Population per grid cell.
    std::vector<std::vector<double>> pop(grids.size());
    for (std::size_t g = 0; g < grids.size(); ++g) pop[g].assign(grids[g].size(), 0.0);
    for (std::size_t row = 0; row < population.n_rows; ++row) {
        for (std::size_t col = 0; col < population.n_cols; ++col) {
            const double v = population.at(row, col);
            if (population.is_nodata(v) || v == 0.0) continue;
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ValidationError(fmt::format("population raster cell ({}, {}) holds invalid value {}", row, col, v));
            }
            const geo::Point c = population.cell_center(row, col);
            for (std::size_t g = 0; g < grids.size(); ++g) {
                if (const auto cell = grids[g].raster.cell_of(c)) {
                    const std::size_t idx = cell->first * grids[g].cols() + cell->second;
                    if (!grids[g].masked[idx]) pop[g][idx] += v;
                    break;
                }
            }
        }
    }
    ExposureTable table;
    table.thresholds = thresholds;
    ExposureColumn total{"total", 0.0, std::vector<double>(thresholds.size(), 0.0), {}};
    std::vector<ExposureColumn> cities;
    for (std::size_t g = 0; g < grids.size(); ++g) {
        ExposureColumn col{grids[g].city.empty() ? fmt::format("grid{}", g) : grids[g].city, 0.0,
                           std::vector<double>(thresholds.size(), 0.0), {}};
        for (std::size_t c = 0; c < grids[g].size(); ++c) {
            if (grids[g].masked[c] || pop[g][c] == 0.0) continue;
            col.population += pop[g][c];
            for (std::size_t t = 0; t < thresholds.size(); ++t) {
                if (grids[g].value(c) > thresholds[t]) col.counts[t] += pop[g][c];
            }
        }
        total.population += col.population;
        for (std::size_t t = 0; t < thresholds.size(); ++t) total.counts[t] += col.counts[t];
        cities.push_back(std::move(col));
    }
    if (!(total.population > 0.0)) {
        throw ValidationError("no population falls on unmasked grid cells");
    }
    auto finish = [&](ExposureColumn &c) {
        c.percents.assign(thresholds.size(), 0.0);
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            c.percents[t] = c.population > 0.0 ? c.counts[t] / c.population * 100.0 : 0.0;
        }
    };
    finish(total);
    table.columns.push_back(std::move(total));
    for (auto &c : cities) {
        finish(c);
        table.columns.push_back(std::move(c));
    }
    return table;
}

std::string grid_to_geojson(const NoiseGrid &grid) {
    nlohmann::json features = nlohmann::json::array();
    const double h = grid.cell_size() / 2.0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (grid.masked[c]) continue;
        const geo::Point p = grid.centroid(c);
        nlohmann::json ring = nlohmann::json::array({{p.x - h, p.y - h}, {p.x + h, p.y - h}, {p.x + h, p.y + h},
                                                     {p.x - h, p.y + h}, {p.x - h, p.y - h}});
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}},
                            {"properties",
                             {{"city", grid.city},
                              {"row", c / grid.cols()},
                              {"col", c % grid.cols()},
                              {"laeq", grid.value(c)}}}});
    }
    return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump() + "\n";
}

void export_grid(const NoiseGrid &grid, const std::string &format, const std::filesystem::path &path) {
    if (format == "ascii") {
        geo::write_raster(path, grid.raster);
    } else if (format == "geojson") {
        io::write_text(path, grid_to_geojson(grid));
    } else {
        throw ValidationError(fmt::format("unknown grid export format '{}' (expected ascii or geojson)", format));
    }
}

} // namespace lur::mapping
