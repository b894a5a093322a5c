#pragma once

#include "lur/common.hpp"
#include "lur/features.hpp"
#include "lur/geodata.hpp"
#include "lur/models.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace lur::mapping {

inline constexpr double kDefaultCellSize = 50.0;

/// Regular grid over a city's bounding box. The embedded raster holds the
/// predictions (NODATA on masked cells); row 0 is the northernmost row.
struct NoiseGrid {
    std::string city;
    geo::Raster raster;
    std::vector<char> masked; // per cell, row-major

    struct Failure {
        std::size_t cell;
        std::string reason;
    };
    std::vector<Failure> failures; // cells masked because feature extraction failed

    std::size_t rows() const { return raster.n_rows; }
    std::size_t cols() const { return raster.n_cols; }
    std::size_t size() const { return masked.size(); }
    double cell_size() const { return raster.cell_size; }
    geo::Point centroid(std::size_t cell) const { return raster.cell_center(cell / cols(), cell % cols()); }
    std::size_t unmasked() const;
    double value(std::size_t cell) const { return raster.values[cell]; }
};

/// Covers the boundary's bounding box from its lower-left corner with
/// ceil(width / cell) x ceil(height / cell) cells; cells whose centroid is not
/// inside the boundary are masked. Throws ValidationError for a zero-area boundary.
NoiseGrid make_grid(const geo::Polygon &boundary, double cell = kDefaultCellSize, const std::string &city = "");

/// Extracts predictors at every unmasked centroid and predicts. A cell whose
/// extraction fails is masked with its reason recorded; more than 5% failed
/// cells throws ComputeError.
void predict_grid(NoiseGrid &grid, const models::TrainedModel &model, const features::FeatureContext &ctx,
                  const std::vector<features::PredictorSpec> &specs, unsigned threads = 0);

inline const std::vector<double> &default_thresholds() {
    static const std::vector<double> t{40, 45, 50, 55, 60, 65, 70};
    return t;
}

struct ExposureColumn {
    std::string name; // "total" or a city label
    double population = 0.0;
    std::vector<double> counts;   // per threshold, population with prediction > t
    std::vector<double> percents; // counts / population * 100
};

struct ExposureTable {
    std::vector<double> thresholds;
    std::vector<ExposureColumn> columns; // total first, then cities in grid order

    const ExposureColumn &column(const std::string &name) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Population raster cells are assigned to the grid cell containing their
/// centre (the nearest centroid on a regular grid); centres outside a grid's
/// extent or on masked cells are not gridded. Throws ValidationError when the
/// gridded population is zero.
ExposureTable exposure_table(const std::vector<NoiseGrid> &grids, const geo::Raster &population,
                             const std::vector<double> &thresholds = default_thresholds());

/// "ascii" (ESRI ASCII grid) or "geojson" (one polygon per unmasked cell).
void export_grid(const NoiseGrid &grid, const std::string &format, const std::filesystem::path &path);

std::string grid_to_geojson(const NoiseGrid &grid);

} // namespace lur::mapping
