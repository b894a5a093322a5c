#pragma once

#include "lur/common.hpp"
#include "lur/geodata.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace lur::features {

enum class PredictorKind { distance, buffer_length, buffer_count, buffer_raster_mean, coordinate };

std::string to_string(PredictorKind k);
PredictorKind parse_predictor_kind(const std::string &s);

inline constexpr std::array<double, 6> kBufferRadii{50.0, 100.0, 200.0, 300.0, 500.0, 1000.0};
inline constexpr double kDefaultDistanceCeiling = 10000.0;

/// One candidate predictor. An empty class_filter matches every class.
/// Coordinate predictors are named "X" or "Y" and ignore layer/radius.
struct PredictorSpec {
    std::string name;
    PredictorKind kind = PredictorKind::distance;
    std::string layer;
    std::set<std::string> class_filter;
    double radius = 0.0;
};

/// Throws ValidationError on duplicate names, off-list radii or missing layer names.
void validate_specs(const std::vector<PredictorSpec> &specs);

/// The full candidate set over layers named "roads", "landuse", "buildings" and
/// "imperviousness": 14 distances and 52 buffer aggregates. LSRoad50 and
/// LSRoad200 are omitted. X and Y are added by build_predictor_matrix.
std::vector<PredictorSpec> default_specs();

std::string unit_of(PredictorKind k);

struct PredictorMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> column_names;
    std::vector<std::string> units;
    Matrix values; // rows x cols

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
    /// Throws ValidationError for an unknown column.
    std::size_t column_index(const std::string &name) const;
    /// Rows selected by index, same columns.
    PredictorMatrix select_rows(const std::vector<std::size_t> &rows) const;
    PredictorMatrix select_columns(const std::vector<std::string> &names) const;
};

/// Checks shape consistency, unique column names and finiteness.
void validate(const PredictorMatrix &m);

// Single-location primitives. These scan the layer linearly and exist both as
// public operations and as the reference the indexed context is tested against.

/// Throws ValidationError if no feature matches the filter.
double distance_to_nearest(const geo::Point &p, const geo::GeoLayer &layer, const std::set<std::string> &filter);
double length_within_buffer(const geo::Point &p, double radius, const geo::GeoLayer &layer,
                            const std::set<std::string> &filter);
std::size_t count_within_buffer(const geo::Point &p, double radius, const geo::GeoLayer &point_layer);
double raster_mean_within_buffer(const geo::Point &p, double radius, const geo::GeoLayer &raster);

struct Location {
    std::string id;
    geo::Point point;
};

/// Holds the named layers plus one spatial index per (layer, class filter) pair
/// referenced by the spec list. Immutable once built; evaluation is thread safe.
class FeatureContext {
public:
    FeatureContext(std::map<std::string, const geo::GeoLayer *> layers, const std::vector<PredictorSpec> &specs,
                   double distance_ceiling = kDefaultDistanceCeiling);
    ~FeatureContext();
    FeatureContext(FeatureContext &&) noexcept;

    double evaluate(const PredictorSpec &spec, const geo::Point &p) const;

    /// Distance predictors whose filter matched nothing and are therefore pinned
    /// to the ceiling.
    const std::vector<std::string> &censored() const { return censored_; }
    double distance_ceiling() const { return ceiling_; }

private:
    struct Subset;
    const Subset &subset(const PredictorSpec &spec) const;

    std::map<std::string, const geo::GeoLayer *> layers_;
    std::map<std::pair<std::string, std::set<std::string>>, std::unique_ptr<Subset>> subsets_;
    std::vector<std::string> censored_;
    double ceiling_;
};

/// The spec list with X and Y appended when not already declared.
std::vector<PredictorSpec> with_coordinates(const std::vector<PredictorSpec> &specs);

/// One column per spec in declared order, then X and Y (unless declared). Rows
/// follow `locations`. Errors carry the location id and predictor name.
PredictorMatrix build_predictor_matrix(const std::vector<Location> &locations,
                                       const std::vector<PredictorSpec> &specs, const FeatureContext &ctx,
                                       unsigned threads = 0);

void write_csv(const std::filesystem::path &path, const PredictorMatrix &m);
PredictorMatrix read_csv(const std::filesystem::path &path);

void write_binary(const std::filesystem::path &path, const PredictorMatrix &m);
PredictorMatrix read_binary(const std::filesystem::path &path);

/// Canonical text for a spec list, used in cache keys and manifests.
std::string fingerprint(const std::vector<PredictorSpec> &specs, double distance_ceiling);

std::vector<PredictorSpec> specs_from_json(const std::string &json_text);
std::string specs_to_json(const std::vector<PredictorSpec> &specs);

} // namespace lur::features
