#pragma once

#include "lur/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lur::geo {

/// One monitoring site. mean_laeq is the unweighted mean of the available years.
struct SiteMeasurement {
    std::string site_id;
    std::string city;
    double x = 0.0;
    double y = 0.0;
    std::map<int, double> yearly_laeq;
    double mean_laeq = 0.0;

    Point location() const { return {x, y}; }
};

inline constexpr double kMinLaeq = 20.0;
inline constexpr double kMaxLaeq = 120.0;

/// Validates the yearly values and fills mean_laeq. Throws ValidationError.
SiteMeasurement make_site(std::string site_id, std::string city, double x, double y,
                          std::map<int, double> yearly_laeq);

/// Arithmetic mean of yearly values, summed in ascending year order.
double mean_of_years(const std::map<int, double> &yearly_laeq);

struct RejectedRow {
    std::size_t row_number = 0; // 1-based data row, header excluded
    std::string reason;
};

struct SiteCollection {
    std::vector<SiteMeasurement> sites;
    std::vector<RejectedRow> rejected;
    std::vector<int> years;                  // all year columns in the header
    std::map<std::string, std::size_t> year_coverage; // site_id -> years present
};

/// Reads `site_id,city,x,y,laeq_<year>...`. Rows with a missing or non-numeric
/// coordinate are rejected with a diagnostic; duplicate ids, out-of-range
/// levels or a malformed header fail the whole load.
SiteCollection load_sites(const std::filesystem::path &path);
void write_sites(const std::filesystem::path &path, const std::vector<SiteMeasurement> &sites);

enum class LayerKind { polyline, polygon, point, raster };

LayerKind parse_layer_kind(const std::string &s);
std::string to_string(LayerKind k);

struct Feature {
    Geometry geometry;
    std::string class_tag;
};

/// Row-major ESRI-style grid: row 0 is the northernmost row.
struct Raster {
    double x_ll = 0.0; // lower-left corner
    double y_ll = 0.0;
    double cell_size = 1.0;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    double nodata = -9999.0;
    std::vector<double> values;

    double at(std::size_t row, std::size_t col) const { return values[row * n_cols + col]; }
    bool is_nodata(double v) const { return v == nodata; }
    Point cell_center(std::size_t row, std::size_t col) const {
        return {x_ll + (static_cast<double>(col) + 0.5) * cell_size,
                y_ll + (static_cast<double>(n_rows - row) - 0.5) * cell_size};
    }
    BBox extent() const {
        return {x_ll, y_ll, x_ll + static_cast<double>(n_cols) * cell_size,
                y_ll + static_cast<double>(n_rows) * cell_size};
    }
    /// Cell containing p, or nullopt outside the extent. Cells are half-open
    /// on their north and east edges.
    std::optional<std::pair<std::size_t, std::size_t>> cell_of(const Point &p) const;
};

/// Class-tagged vector geometry or a raster. Immutable after construction.
struct GeoLayer {
    LayerKind kind = LayerKind::point;
    std::vector<Feature> features;
    std::optional<Raster> raster;
    std::string crs; // declared CRS name, empty when undeclared

    std::size_t size() const { return features.size(); }
    std::set<std::string> class_tags() const;
};

/// Checks all vector invariants; throws ValidationError naming the first offence.
void validate(const GeoLayer &layer);

/// All non-empty CRS declarations must agree; no reprojection is performed.
void check_single_crs(const std::vector<const GeoLayer *> &layers);

/// Returns an empty string for a valid feature, otherwise the reason it is rejected.
std::string feature_problem(const Geometry &g, LayerKind kind);

const std::set<std::string> &road_classes();
const std::set<std::string> &urban_atlas_codes();

struct VectorLoadReport {
    std::size_t accepted = 0;
    std::size_t skipped_wrong_kind = 0;
    std::size_t skipped_invalid = 0;
    std::size_t skipped_unknown_class = 0;
};

/// Loads a GeoJSON FeatureCollection. Multi-geometries are split into one feature
/// per part. If `vocabulary` is non-empty, features with other tags are skipped.
/// For point layers without `class_field` the tag defaults to "point".
GeoLayer load_vector_layer(const std::filesystem::path &path, LayerKind kind, const std::string &class_field,
                           const std::set<std::string> &vocabulary = {}, VectorLoadReport *report = nullptr);

GeoLayer parse_vector_layer(const std::string &geojson_text, LayerKind kind, const std::string &class_field,
                            const std::set<std::string> &vocabulary = {}, VectorLoadReport *report = nullptr);

std::string to_geojson(const GeoLayer &layer, const std::string &class_field);
void write_vector_layer(const std::filesystem::path &path, const GeoLayer &layer, const std::string &class_field);

struct RasterOptions {
    bool imperviousness = false; // values must lie in [0, 1]
};

GeoLayer load_raster(const std::filesystem::path &path, RasterOptions opts = {});
GeoLayer parse_raster(const std::string &text, RasterOptions opts = {});
void write_raster(const std::filesystem::path &path, const Raster &raster);

/// Acceleration structure over one vector layer. Answers are identical to a
/// linear scan over the layer's features.
class SpatialIndex {
public:
    explicit SpatialIndex(const GeoLayer &layer);
    ~SpatialIndex();
    SpatialIndex(SpatialIndex &&) noexcept;
    SpatialIndex &operator=(SpatialIndex &&) noexcept;

    struct Hit {
        std::size_t feature = 0;
        double distance = 0.0;
    };

    /// Closest feature by exact distance; ties go to the lowest feature index.
    Hit nearest(const Point &p) const;

    /// Features at distance < radius, ascending index.
    std::vector<std::size_t> within_circle(const Point &p, double radius) const;

    /// Features whose geometry touches the closed box, ascending index.
    std::vector<std::size_t> within_box(const BBox &box) const;

    const GeoLayer &layer() const { return *layer_; }

private:
    struct Impl;
    const GeoLayer *layer_;
    std::unique_ptr<Impl> impl_;
};

/// Throws ValidationError for raster or empty layers.
SpatialIndex build_spatial_index(const GeoLayer &layer);

} // namespace lur::geo
