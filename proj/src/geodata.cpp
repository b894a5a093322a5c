#include "lur/geodata.hpp"

#include "lur/common.hpp"
#include "lur/io_util.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace lur::geo {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// sites
// ---------------------------------------------------------------------------

double mean_of_years(const std::map<int, double> &yearly_laeq) {
    double sum = 0.0;
    for (const auto &[year, v] : yearly_laeq) {
        sum += v;
    }
    return sum / static_cast<double>(yearly_laeq.size());
}

SiteMeasurement make_site(std::string site_id, std::string city, double x, double y,
                          std::map<int, double> yearly_laeq) {
    if (site_id.empty()) {
        throw ValidationError("site_id must not be empty");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw ValidationError(fmt::format("site {}: non-finite coordinate", site_id));
    }
    if (yearly_laeq.empty()) {
        throw ValidationError(fmt::format("site {}: no yearly L_Aeq values", site_id));
    }
    for (const auto &[year, v] : yearly_laeq) {
        if (!std::isfinite(v) || v < kMinLaeq || v > kMaxLaeq) {
            throw ValidationError(fmt::format("site {}: L_Aeq {} for year {} outside [{}, {}] dB(A)", site_id, v,
                                              year, kMinLaeq, kMaxLaeq));
        }
    }
    SiteMeasurement s;
    s.site_id = std::move(site_id);
    s.city = std::move(city);
    s.x = x;
    s.y = y;
    s.mean_laeq = mean_of_years(yearly_laeq);
    s.yearly_laeq = std::move(yearly_laeq);
    return s;
}

SiteCollection load_sites(const std::filesystem::path &path) {
    const auto rows = io::read_csv(path);
    if (rows.empty()) {
        throw ValidationError(fmt::format("{}: empty sites file", path.string()));
    }
    const auto &header = rows.front();
    std::map<std::string, std::size_t> col;
    std::vector<std::pair<int, std::size_t>> year_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        col[header[i]] = i;
        if (header[i].rfind("laeq_", 0) == 0) {
            const auto year = io::parse_int(header[i].substr(5));
            if (!year) {
                throw ValidationError(fmt::format("{}: bad year column '{}'", path.string(), header[i]));
            }
            year_cols.emplace_back(*year, i);
        }
    }
    for (const char *required : {"site_id", "city", "x", "y"}) {
        if (!col.contains(required)) {
            throw ValidationError(fmt::format("{}: missing column '{}'", path.string(), required));
        }
    }
    if (year_cols.empty()) {
        throw ValidationError(fmt::format("{}: no laeq_<year> columns", path.string()));
    }

    SiteCollection out;
    for (const auto &[year, i] : year_cols) {
        out.years.push_back(year);
    }
    std::unordered_set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto &row = rows[r];
        if (row.size() == 1 && row[0].empty()) {
            continue; // blank line
        }
        auto field = [&](std::size_t i) -> std::string { return i < row.size() ? row[i] : std::string{}; };
        const std::string id = field(col["site_id"]);
        const auto x = io::parse_double(field(col["x"]));
        const auto y = io::parse_double(field(col["y"]));
        if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
            out.rejected.push_back({r, fmt::format("row {}: missing or non-numeric coordinate", r)});
            continue;
        }
        std::map<int, double> years;
        for (const auto &[year, i] : year_cols) {
            const std::string cell = field(i);
            if (cell.empty() || cell == "NA") {
                continue;
            }
            const auto v = io::parse_double(cell);
            if (!v) {
                throw ValidationError(fmt::format("{}: row {}: non-numeric L_Aeq '{}'", path.string(), r, cell));
            }
            years[year] = *v;
        }
        if (years.empty()) {
            out.rejected.push_back({r, fmt::format("row {}: no yearly values", r)});
            continue;
        }
        if (!seen.insert(id).second) {
            throw ValidationError(fmt::format("{}: duplicate site_id '{}' at row {}", path.string(), id, r));
        }
        try {
            out.year_coverage[id] = years.size();
            out.sites.push_back(make_site(id, field(col["city"]), *x, *y, std::move(years)));
        } catch (const ValidationError &e) {
            throw ValidationError(fmt::format("{}: row {}: {}", path.string(), r, e.what()));
        }
    }
    return out;
}

void write_sites(const std::filesystem::path &path, const std::vector<SiteMeasurement> &sites) {
    std::set<int> years;
    for (const auto &s : sites) {
        for (const auto &[y, v] : s.yearly_laeq) {
            years.insert(y);
        }
    }
    std::ofstream os(path);
    if (!os) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    os << "site_id,city,x,y";
    for (int y : years) {
        os << ",laeq_" << y;
    }
    os << '\n';
    for (const auto &s : sites) {
        os << io::csv_field(s.site_id) << ',' << io::csv_field(s.city) << ',' << io::format_double(s.x) << ',' << io::format_double(s.y);
        for (int y : years) {
            os << ',';
            if (auto it = s.yearly_laeq.find(y); it != s.yearly_laeq.end()) {
                os << io::format_double(it->second);
            }
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

LayerKind parse_layer_kind(const std::string &s) {
    if (s == "polyline") return LayerKind::polyline;
    if (s == "polygon") return LayerKind::polygon;
    if (s == "point") return LayerKind::point;
    if (s == "raster") return LayerKind::raster;
    throw ValidationError(fmt::format("unknown layer kind '{}'", s));
}

std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::polyline: return "polyline";
    case LayerKind::polygon: return "polygon";
    case LayerKind::point: return "point";
    case LayerKind::raster: return "raster";
    }
    return "?";
}

std::set<std::string> GeoLayer::class_tags() const {
    std::set<std::string> tags;
    for (const auto &f : features) {
        tags.insert(f.class_tag);
    }
    return tags;
}

const std::set<std::string> &road_classes() {
    static const std::set<std::string> v{"motorway", "primary", "secondary", "tertiary", "residential", "footway"};
    return v;
}

const std::set<std::string> &urban_atlas_codes() {
    static const std::set<std::string> v{"11100", "11210", "11220", "11230", "11240", "11300", "12100",
                                         "12210", "12220", "12230", "12300", "12400", "13100", "13300",
                                         "13400", "14100", "14200", "21000", "22000", "23000", "24000",
                                         "25000", "31000", "32000", "33000", "40000", "50000"};
    return v;
}

namespace {

bool finite(const Point &p) { return std::isfinite(p.x) && std::isfinite(p.y); }

} // namespace

std::string feature_problem(const Geometry &g, LayerKind kind) {
    switch (kind) {
    case LayerKind::point:
        if (!std::holds_alternative<Point>(g)) return "not a point";
        return finite(std::get<Point>(g)) ? "" : "non-finite coordinate";
    case LayerKind::polyline: {
        if (!std::holds_alternative<Polyline>(g)) return "not a polyline";
        const auto &v = std::get<Polyline>(g).vertices;
        if (v.size() < 2) return "polyline needs two vertices";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!finite(v[i])) return "non-finite coordinate";
            if (i > 0 && v[i] == v[i - 1]) return "zero-length segment";
        }
        return "";
    }
    case LayerKind::polygon: {
        if (!std::holds_alternative<Polygon>(g)) return "not a polygon";
        const auto &poly = std::get<Polygon>(g);
        if (poly.rings.empty()) return "polygon without rings";
        for (const auto &ring : poly.rings) {
            if (ring.size() < 4) return "ring needs four positions";
            if (!(ring.front() == ring.back())) return "ring not closed";
            for (const auto &p : ring) {
                if (!finite(p)) return "non-finite coordinate";
            }
        }
        if (!(area(poly) > 0.0)) return "zero-area polygon";
        return "";
    }
    case LayerKind::raster: return "vector geometry in raster layer";
    }
    return "unknown";
}

void validate(const GeoLayer &layer) {
    if (layer.kind == LayerKind::raster) {
        if (!layer.raster) {
            throw ValidationError("raster layer without grid");
        }
        const auto &r = *layer.raster;
        if (!(r.cell_size > 0.0) || !std::isfinite(r.cell_size)) {
            throw ValidationError("raster cell size must be > 0");
        }
        if (r.values.size() != r.n_rows * r.n_cols) {
            throw ValidationError("raster value count does not match n_rows * n_cols");
        }
        for (double v : r.values) {
            if (!r.is_nodata(v) && !std::isfinite(v)) {
                throw ValidationError("raster contains non-finite value");
            }
        }
        return;
    }
    for (std::size_t i = 0; i < layer.features.size(); ++i) {
        const auto problem = feature_problem(layer.features[i].geometry, layer.kind);
        if (!problem.empty()) {
            throw ValidationError(fmt::format("feature {}: {}", i, problem));
        }
    }
}

void check_single_crs(const std::vector<const GeoLayer *> &layers) {
    std::string seen;
    for (const auto *l : layers) {
        if (l->crs.empty()) {
            continue;
        }
        if (seen.empty()) {
            seen = l->crs;
        } else if (seen != l->crs) {
            throw ValidationError(fmt::format("mixed CRS declarations: '{}' and '{}'", seen, l->crs));
        }
    }
}

namespace {

Point read_position(const json &pos) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
        throw ValidationError("bad GeoJSON position");
    }
    return {pos[0].get<double>(), pos[1].get<double>()};
}

std::vector<Point> read_positions(const json &arr) {
    if (!arr.is_array()) {
        throw ValidationError("bad GeoJSON coordinate array");
    }
    std::vector<Point> pts;
    pts.reserve(arr.size());
    for (const auto &p : arr) {
        pts.push_back(read_position(p));
    }
    return pts;
}

Polygon read_polygon(const json &rings) {
    Polygon poly;
    for (const auto &r : rings) {
        poly.rings.push_back(read_positions(r));
    }
    return poly;
}

std::vector<Geometry> read_geometry(const json &g) {
    const std::string type = g.at("type").get<std::string>();
    const auto &c = g.at("coordinates");
    std::vector<Geometry> parts;
    if (type == "Point") {
        parts.emplace_back(read_position(c));
    } else if (type == "MultiPoint") {
        for (const auto &p : c) parts.emplace_back(read_position(p));
    } else if (type == "LineString") {
        parts.emplace_back(Polyline{read_positions(c)});
    } else if (type == "MultiLineString") {
        for (const auto &l : c) parts.emplace_back(Polyline{read_positions(l)});
    } else if (type == "Polygon") {
        parts.emplace_back(read_polygon(c));
    } else if (type == "MultiPolygon") {
        for (const auto &p : c) parts.emplace_back(read_polygon(p));
    } else {
        throw ValidationError(fmt::format("unsupported GeoJSON geometry '{}'", type));
    }
    return parts;
}

std::string tag_of(const json &props, const std::string &field) {
    if (field.empty() || props.is_null() || !props.contains(field)) {
        return {};
    }
    const auto &v = props.at(field);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return io::format_double(v.get<double>());
    return v.dump();
}

} // namespace

GeoLayer parse_vector_layer(const std::string &geojson_text, LayerKind kind, const std::string &class_field,
                            const std::set<std::string> &vocabulary, VectorLoadReport *report) {
    if (kind == LayerKind::raster) {
        throw ValidationError("raster kind requested from a GeoJSON file");
    }
    json doc;
    try {
        doc = json::parse(geojson_text);
    } catch (const json::parse_error &e) {
        throw ValidationError(fmt::format("invalid GeoJSON: {}", e.what()));
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
        throw ValidationError("GeoJSON must be a FeatureCollection");
    }
    VectorLoadReport rep;
    GeoLayer layer;
    layer.kind = kind;
    // Legacy named-CRS member; RFC 7946 dropped it but exporters still write it.
    if (doc.contains("crs") && doc["crs"].is_object()) {
        layer.crs = doc["crs"].value("properties", json::object()).value("name", "");
    }
    for (const auto &f : doc.at("features")) {
        if (!f.contains("geometry") || f.at("geometry").is_null()) {
            ++rep.skipped_invalid;
            continue;
        }
        const json props = f.value("properties", json::object());
        std::string tag = tag_of(props, class_field);
        if (tag.empty() && kind == LayerKind::point) {
            tag = "point";
        }
        if (!vocabulary.empty() && !vocabulary.contains(tag)) {
            ++rep.skipped_unknown_class;
            continue;
        }
        for (auto &part : read_geometry(f.at("geometry"))) {
            const auto problem = feature_problem(part, kind);
            if (problem.empty()) {
                layer.features.push_back({std::move(part), tag});
                ++rep.accepted;
            } else if (problem.rfind("not a", 0) == 0) {
                ++rep.skipped_wrong_kind;
            } else {
                ++rep.skipped_invalid;
            }
        }
    }
    if (report) {
        *report = rep;
    }
    if (layer.features.empty()) {
        throw ValidationError(fmt::format("no {} features accepted ({} wrong kind, {} invalid, {} unknown class)",
                                          to_string(kind), rep.skipped_wrong_kind, rep.skipped_invalid,
                                          rep.skipped_unknown_class));
    }
    return layer;
}

GeoLayer load_vector_layer(const std::filesystem::path &path, LayerKind kind, const std::string &class_field,
                           const std::set<std::string> &vocabulary, VectorLoadReport *report) {
    try {
        return parse_vector_layer(io::read_text(path), kind, class_field, vocabulary, report);
    } catch (const ValidationError &e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

namespace {

json position_json(const Point &p) { return json::array({p.x, p.y}); }

json geometry_json(const Geometry &g) {
    if (const auto *pt = std::get_if<Point>(&g)) {
        return {{"type", "Point"}, {"coordinates", position_json(*pt)}};
    }
    if (const auto *line = std::get_if<Polyline>(&g)) {
        json coords = json::array();
        for (const auto &v : line->vertices) coords.push_back(position_json(v));
        return {{"type", "LineString"}, {"coordinates", coords}};
    }
    json rings = json::array();
    for (const auto &ring : std::get<Polygon>(g).rings) {
        json coords = json::array();
        for (const auto &v : ring) coords.push_back(position_json(v));
        rings.push_back(coords);
    }
    return {{"type", "Polygon"}, {"coordinates", rings}};
}

} // namespace

std::string to_geojson(const GeoLayer &layer, const std::string &class_field) {
    json features = json::array();
    for (const auto &f : layer.features) {
        features.push_back({{"type", "Feature"},
                            {"properties", {{class_field, f.class_tag}}},
                            {"geometry", geometry_json(f.geometry)}});
    }
    return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

void write_vector_layer(const std::filesystem::path &path, const GeoLayer &layer, const std::string &class_field) {
    io::write_text(path, to_geojson(layer, class_field) + "\n");
}

// ---------------------------------------------------------------------------
// rasters
// ---------------------------------------------------------------------------

std::optional<std::pair<std::size_t, std::size_t>> Raster::cell_of(const Point &p) const {
    // Rows count down from the top edge: west and north edges closed, east and south open.
    const double cx = (p.x - x_ll) / cell_size;
    const double cy = (y_ll + static_cast<double>(n_rows) * cell_size - p.y) / cell_size;
    if (!(cx >= 0.0) || !(cy >= 0.0) || cx >= static_cast<double>(n_cols) || cy >= static_cast<double>(n_rows)) {
        return std::nullopt;
    }
    return std::make_pair(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx));
}

GeoLayer parse_raster(const std::string &text, RasterOptions opts) {
    std::istringstream is(text);
    std::map<std::string, double> header;
    std::string key;
    // Header lines are "keyword value"; the first numeric token starts the data.
    for (;;) {
        const auto pos = is.tellg();
        if (!(is >> key)) {
            break;
        }
        std::string lower = key;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower.empty() || !(std::isalpha(static_cast<unsigned char>(lower[0])))) {
            is.clear();
            is.seekg(pos);
            break;
        }
        double value = 0.0;
        std::string tok;
        if (!(is >> tok)) {
            throw ValidationError(fmt::format("raster header '{}' has no value", key));
        }
        const auto v = io::parse_double(tok);
        if (!v) {
            throw ValidationError(fmt::format("raster header '{}' has non-numeric value '{}'", key, tok));
        }
        value = *v;
        header[lower] = value;
    }
    for (const char *k : {"ncols", "nrows", "cellsize"}) {
        if (!header.contains(k)) {
            throw ValidationError(fmt::format("raster header missing '{}'", k));
        }
    }
    Raster r;
    r.n_cols = static_cast<std::size_t>(header["ncols"]);
    r.n_rows = static_cast<std::size_t>(header["nrows"]);
    r.cell_size = header["cellsize"];
    if (header["ncols"] != static_cast<double>(r.n_cols) || header["nrows"] != static_cast<double>(r.n_rows) ||
        r.n_cols == 0 || r.n_rows == 0) {
        throw ValidationError("raster ncols/nrows must be positive integers");
    }
    if (!(r.cell_size > 0.0)) {
        throw ValidationError("raster cellsize must be > 0");
    }
    if (header.contains("xllcorner") && header.contains("yllcorner")) {
        r.x_ll = header["xllcorner"];
        r.y_ll = header["yllcorner"];
    } else if (header.contains("xllcenter") && header.contains("yllcenter")) {
        r.x_ll = header["xllcenter"] - 0.5 * r.cell_size;
        r.y_ll = header["yllcenter"] - 0.5 * r.cell_size;
    } else {
        throw ValidationError("raster header missing xllcorner/yllcorner");
    }
    r.nodata = header.contains("nodata_value") ? header["nodata_value"] : -9999.0;
    r.values.reserve(r.n_cols * r.n_rows);
    std::string tok;
    while (is >> tok) {
        const auto v = io::parse_double(tok);
        if (!v) {
            throw ValidationError(fmt::format("raster value '{}' is not numeric", tok));
        }
        r.values.push_back(*v);
    }
    if (r.values.size() != r.n_cols * r.n_rows) {
        throw ValidationError(
            fmt::format("raster has {} values, header declares {} x {}", r.values.size(), r.n_rows, r.n_cols));
    }
    for (double v : r.values) {
        if (r.is_nodata(v)) {
            continue;
        }
        if (!std::isfinite(v)) {
            throw ValidationError("raster contains non-finite value");
        }
        if (opts.imperviousness && (v < 0.0 || v > 1.0)) {
            throw ValidationError(fmt::format("imperviousness value {} outside [0, 1]", v));
        }
    }
    GeoLayer layer;
    layer.kind = LayerKind::raster;
    layer.raster = std::move(r);
    return layer;
}

GeoLayer load_raster(const std::filesystem::path &path, RasterOptions opts) {
    try {
        return parse_raster(io::read_text(path), opts);
    } catch (const ValidationError &e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_raster(const std::filesystem::path &path, const Raster &r) {
    std::ofstream os(path);
    if (!os) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    os << "ncols " << r.n_cols << '\n'
       << "nrows " << r.n_rows << '\n'
       << "xllcorner " << io::format_double(r.x_ll) << '\n'
       << "yllcorner " << io::format_double(r.y_ll) << '\n'
       << "cellsize " << io::format_double(r.cell_size) << '\n'
       << "NODATA_value " << io::format_double(r.nodata) << '\n';
    for (std::size_t row = 0; row < r.n_rows; ++row) {
        for (std::size_t col = 0; col < r.n_cols; ++col) {
            if (col) os << ' ';
            os << io::format_double(r.at(row, col));
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// spatial index
// ---------------------------------------------------------------------------

using BoostPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using BoostBox = bg::model::box<BoostPoint>;
using Entry = std::pair<BoostBox, std::size_t>;

struct SpatialIndex::Impl {
    bgi::rtree<Entry, bgi::rstar<16>> tree;
};

SpatialIndex::SpatialIndex(const GeoLayer &layer) : layer_(&layer), impl_(std::make_unique<Impl>()) {
    if (layer.kind == LayerKind::raster) {
        throw ValidationError("cannot build a spatial index over a raster layer");
    }
    if (layer.features.empty()) {
        throw ValidationError("cannot build a spatial index over an empty layer");
    }
    std::vector<Entry> entries;
    entries.reserve(layer.features.size());
    for (std::size_t i = 0; i < layer.features.size(); ++i) {
        const BBox b = bounds(layer.features[i].geometry);
        entries.emplace_back(BoostBox(BoostPoint(b.min_x, b.min_y), BoostPoint(b.max_x, b.max_y)), i);
    }
    impl_->tree = bgi::rtree<Entry, bgi::rstar<16>>(entries.begin(), entries.end());
}

SpatialIndex::~SpatialIndex() = default;
SpatialIndex::SpatialIndex(SpatialIndex &&) noexcept = default;
SpatialIndex &SpatialIndex::operator=(SpatialIndex &&) noexcept = default;

SpatialIndex::Hit SpatialIndex::nearest(const Point &p) const {
    const BoostPoint q(p.x, p.y);
    Hit best{0, std::numeric_limits<double>::infinity()};
    bool found = false;
    // Boxes arrive in increasing box distance, a lower bound on the exact distance.
    for (auto it = impl_->tree.qbegin(bgi::nearest(q, static_cast<unsigned>(impl_->tree.size())));
         it != impl_->tree.qend(); ++it) {
        const double box_d = bg::distance(q, it->first);
        if (found && box_d > best.distance) {
            break;
        }
        const double d = distance(p, layer_->features[it->second].geometry);
        if (!found || d < best.distance || (d == best.distance && it->second < best.feature)) {
            best = {it->second, d};
            found = true;
        }
    }
    return best;
}

std::vector<std::size_t> SpatialIndex::within_circle(const Point &p, double radius) const {
    std::vector<std::size_t> out;
    if (!(radius > 0.0)) {
        return out;
    }
    const BoostBox query(BoostPoint(p.x - radius, p.y - radius), BoostPoint(p.x + radius, p.y + radius));
    std::vector<Entry> hits;
    impl_->tree.query(bgi::intersects(query), std::back_inserter(hits));
    for (const auto &[box, idx] : hits) {
        if (distance(p, layer_->features[idx].geometry) < radius) {
            out.push_back(idx);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> SpatialIndex::within_box(const BBox &box) const {
    const BoostBox query(BoostPoint(box.min_x, box.min_y), BoostPoint(box.max_x, box.max_y));
    std::vector<Entry> hits;
    impl_->tree.query(bgi::intersects(query), std::back_inserter(hits));
    std::vector<std::size_t> out;
    for (const auto &[b, idx] : hits) {
        if (intersects(layer_->features[idx].geometry, box)) {
            out.push_back(idx);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

SpatialIndex build_spatial_index(const GeoLayer &layer) { return SpatialIndex(layer); }

} // namespace lur::geo
