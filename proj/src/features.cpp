#include "lur/features.hpp"

#include "lur/io_util.hpp"
#include "lur/parallel.hpp"

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace lur::features {

using geo::GeoLayer;
using geo::LayerKind;
using geo::Point;
using json = nlohmann::json;

std::string to_string(PredictorKind k) {
    switch (k) {
    case PredictorKind::distance: return "distance";
    case PredictorKind::buffer_length: return "buffer_length";
    case PredictorKind::buffer_count: return "buffer_count";
    case PredictorKind::buffer_raster_mean: return "buffer_raster_mean";
    case PredictorKind::coordinate: return "coordinate";
    }
    return "?";
}

PredictorKind parse_predictor_kind(const std::string &s) {
    for (auto k : {PredictorKind::distance, PredictorKind::buffer_length, PredictorKind::buffer_count,
                   PredictorKind::buffer_raster_mean, PredictorKind::coordinate}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ValidationError(fmt::format("unknown predictor kind '{}'", s));
}

std::string unit_of(PredictorKind k) {
    switch (k) {
    case PredictorKind::distance:
    case PredictorKind::buffer_length: return "m";
    case PredictorKind::buffer_count: return "count";
    case PredictorKind::buffer_raster_mean: return "dimensionless";
    case PredictorKind::coordinate: return "coordinate-m";
    }
    return "";
}

namespace {

bool is_buffer(PredictorKind k) {
    return k == PredictorKind::buffer_length || k == PredictorKind::buffer_count ||
           k == PredictorKind::buffer_raster_mean;
}

bool matches(const std::set<std::string> &filter, const std::string &tag) {
    return filter.empty() || filter.contains(tag);
}

} // namespace

void validate_specs(const std::vector<PredictorSpec> &specs) {
    std::unordered_set<std::string> names;
    for (const auto &s : specs) {
        if (s.name.empty()) {
            throw ValidationError("predictor with empty name");
        }
        if (!names.insert(s.name).second) {
            throw ValidationError(fmt::format("duplicate predictor name '{}'", s.name));
        }
        if (s.kind == PredictorKind::coordinate) {
            if (s.name != "X" && s.name != "Y") {
                throw ValidationError(fmt::format("coordinate predictor must be named X or Y, got '{}'", s.name));
            }
            continue;
        }
        if (s.layer.empty()) {
            throw ValidationError(fmt::format("predictor '{}' has no layer", s.name));
        }
        if (is_buffer(s.kind)) {
            if (std::find(kBufferRadii.begin(), kBufferRadii.end(), s.radius) == kBufferRadii.end()) {
                throw ValidationError(fmt::format("predictor '{}': radius {} not in {{50, 100, 200, 300, 500, 1000}}",
                                                  s.name, s.radius));
            }
        }
    }
}

std::vector<PredictorSpec> default_specs() {
    const std::set<std::string> major{"motorway", "primary", "secondary"};
    std::vector<PredictorSpec> out;
    auto dist = [&](std::string name, std::string layer, std::set<std::string> filter) {
        out.push_back({std::move(name), PredictorKind::distance, std::move(layer), std::move(filter), 0.0});
    };
    auto lengths = [&](const std::string &stem, std::set<std::string> filter, std::vector<double> radii) {
        for (double r : radii) {
            out.push_back({fmt::format("{}{}", stem, static_cast<int>(r)), PredictorKind::buffer_length, "roads",
                           filter, r});
        }
    };
    const std::vector<double> all_radii(kBufferRadii.begin(), kBufferRadii.end());

    dist("DARoad", "roads", {});
    dist("DMRoad", "roads", major);
    dist("DMWay", "roads", {"motorway"});
    dist("DPRoad", "roads", {"primary"});
    dist("DSRoad", "roads", {"secondary"});
    dist("DTRoad", "roads", {"tertiary"});
    dist("DRRoad", "roads", {"residential"});
    dist("DFWay", "roads", {"footway"});

    lengths("LARoad", {}, {50, 100, 200});
    lengths("LMRoad", major, {50, 100, 200});
    lengths("LPRoad", {"primary"}, all_radii);
    lengths("LMWay", {"motorway"}, all_radii);
    // No LSRoad50 or LSRoad200 in the candidate set.
    lengths("LSRoad", {"secondary"}, {100, 300, 500, 1000});
    lengths("LTRoad", {"tertiary"}, all_radii);
    lengths("LRRoad", {"residential"}, all_radii);
    lengths("LFWay", {"footway"}, all_radii);

    dist("DAir", "landuse", {"12400"});
    dist("DRail", "landuse", {"12230"});
    dist("DGreen", "landuse", {"14100"});
    dist("DOGreen", "landuse", {"22000", "23000", "31000"});
    dist("DUrban", "landuse", {"11100"});
    dist("DOLU", "landuse", {"12100"});

    for (double r : kBufferRadii) {
        out.push_back({fmt::format("Imp{}", static_cast<int>(r)), PredictorKind::buffer_raster_mean,
                       "imperviousness", {}, r});
    }
    for (double r : kBufferRadii) {
        out.push_back({fmt::format("Build{}", static_cast<int>(r)), PredictorKind::buffer_count, "buildings", {}, r});
    }
    return out;
}

std::size_t PredictorMatrix::column_index(const std::string &name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i) {
        if (column_names[i] == name) {
            return i;
        }
    }
    throw ValidationError(fmt::format("missing predictor column '{}'", name));
}

PredictorMatrix PredictorMatrix::select_rows(const std::vector<std::size_t> &rows) const {
    PredictorMatrix out;
    out.column_names = column_names;
    out.units = units;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    out.row_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
        out.row_ids.push_back(row_ids[rows[i]]);
    }
    return out;
}

PredictorMatrix PredictorMatrix::select_columns(const std::vector<std::string> &names) const {
    PredictorMatrix out;
    out.row_ids = row_ids;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto src = column_index(names[j]);
        out.column_names.push_back(names[j]);
        out.units.push_back(src < units.size() ? units[src] : "");
        out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(src));
    }
    return out;
}

void validate(const PredictorMatrix &m) {
    if (m.row_ids.size() != m.rows() || m.column_names.size() != m.cols()) {
        throw ValidationError("predictor matrix shape does not match its labels");
    }
    std::unordered_set<std::string> seen;
    for (const auto &n : m.column_names) {
        if (!seen.insert(n).second) {
            throw ValidationError(fmt::format("duplicate predictor column '{}'", n));
        }
    }
    if (!m.values.allFinite()) {
        throw ValidationError("predictor matrix contains non-finite values");
    }
}

// ---------------------------------------------------------------------------
// linear-scan primitives
// ---------------------------------------------------------------------------

double distance_to_nearest(const Point &p, const GeoLayer &layer, const std::set<std::string> &filter) {
    if (layer.kind == LayerKind::raster) {
        throw ValidationError("distance_to_nearest needs a vector layer");
    }
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto &f : layer.features) {
        if (!matches(filter, f.class_tag)) {
            continue;
        }
        any = true;
        best = std::min(best, geo::distance(p, f.geometry));
    }
    if (!any) {
        throw ValidationError(fmt::format("no feature matches class filter {{{}}}", fmt::join(filter, ", ")));
    }
    return best;
}

double length_within_buffer(const Point &p, double radius, const GeoLayer &layer,
                            const std::set<std::string> &filter) {
    if (layer.kind != LayerKind::polyline) {
        throw ValidationError("length_within_buffer needs a polyline layer");
    }
    if (!(radius > 0.0)) {
        throw ValidationError("buffer radius must be > 0");
    }
    double total = 0.0;
    for (const auto &f : layer.features) {
        if (matches(filter, f.class_tag)) {
            total += geo::clipped_length(std::get<geo::Polyline>(f.geometry), p, radius);
        }
    }
    return total;
}

std::size_t count_within_buffer(const Point &p, double radius, const GeoLayer &point_layer) {
    if (point_layer.kind != LayerKind::point) {
        throw ValidationError("count_within_buffer needs a point layer");
    }
    std::size_t n = 0;
    for (const auto &f : point_layer.features) {
        if (geo::distance(p, std::get<Point>(f.geometry)) < radius) {
            ++n;
        }
    }
    return n;
}

double raster_mean_within_buffer(const Point &p, double radius, const GeoLayer &layer) {
    if (layer.kind != LayerKind::raster || !layer.raster) {
        throw ValidationError("raster_mean_within_buffer needs a raster layer");
    }
    const auto &r = *layer.raster;
    const auto ext = r.extent();
    if (!ext.intersects({p.x - radius, p.y - radius, p.x + radius, p.y + radius})) {
        throw ValidationError("buffer does not intersect the raster extent");
    }
    const double cs = r.cell_size;
    const auto clamp_index = [](double v, std::size_t n) -> std::size_t {
        if (v < 0.0) return 0;
        if (v >= static_cast<double>(n)) return n;
        return static_cast<std::size_t>(v);
    };
    // Column range of centers that could lie in the disk.
    const std::size_t c0 = clamp_index(std::floor((p.x - radius - r.x_ll) / cs), r.n_cols);
    const std::size_t c1 = clamp_index(std::ceil((p.x + radius - r.x_ll) / cs) + 1.0, r.n_cols);
    const double top = r.y_ll + static_cast<double>(r.n_rows) * cs;
    const std::size_t r0 = clamp_index(std::floor((top - (p.y + radius)) / cs), r.n_rows);
    const std::size_t r1 = clamp_index(std::ceil((top - (p.y - radius)) / cs) + 1.0, r.n_rows);
    const double r2 = radius * radius;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t row = r0; row < r1; ++row) {
        const double cy = r.y_ll + (static_cast<double>(r.n_rows - row) - 0.5) * cs;
        const double dy = cy - p.y;
        for (std::size_t col = c0; col < c1; ++col) {
            const double cx = r.x_ll + (static_cast<double>(col) + 0.5) * cs;
            const double dx = cx - p.x;
            if (dx * dx + dy * dy >= r2) {
                continue;
            }
            const double v = r.at(row, col);
            if (r.is_nodata(v)) {
                continue;
            }
            sum += v;
            ++n;
        }
    }
    if (n == 0) {
        throw ValidationError("no valid raster cells inside the buffer");
    }
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// indexed context
// ---------------------------------------------------------------------------

struct FeatureContext::Subset {
    const GeoLayer *source = nullptr;
    GeoLayer filtered;
    std::unique_ptr<geo::SpatialIndex> index; // null when the filter matched nothing
};

FeatureContext::FeatureContext(std::map<std::string, const GeoLayer *> layers, const std::vector<PredictorSpec> &specs,
                               double distance_ceiling)
    : layers_(std::move(layers)), ceiling_(distance_ceiling) {
    validate_specs(specs);
    for (const auto &spec : specs) {
        if (spec.kind == PredictorKind::coordinate) {
            continue;
        }
        auto it = layers_.find(spec.layer);
        if (it == layers_.end() || it->second == nullptr) {
            throw ValidationError(fmt::format("predictor '{}' references unknown layer '{}'", spec.name, spec.layer));
        }
        const GeoLayer &layer = *it->second;
        switch (spec.kind) {
        case PredictorKind::distance:
            if (layer.kind == LayerKind::raster) {
                throw ValidationError(fmt::format("predictor '{}': distance needs a vector layer", spec.name));
            }
            break;
        case PredictorKind::buffer_length:
            if (layer.kind != LayerKind::polyline) {
                throw ValidationError(fmt::format("predictor '{}': length needs a polyline layer", spec.name));
            }
            break;
        case PredictorKind::buffer_count:
            if (layer.kind != LayerKind::point) {
                throw ValidationError(fmt::format("predictor '{}': count needs a point layer", spec.name));
            }
            break;
        case PredictorKind::buffer_raster_mean:
            if (layer.kind != LayerKind::raster) {
                throw ValidationError(fmt::format("predictor '{}': raster mean needs a raster layer", spec.name));
            }
            continue;
        case PredictorKind::coordinate: continue;
        }
        const auto key = std::make_pair(spec.layer, spec.class_filter);
        if (!subsets_.contains(key)) {
            auto sub = std::make_unique<Subset>();
            sub->source = &layer;
            sub->filtered.kind = layer.kind;
            for (const auto &f : layer.features) {
                if (matches(spec.class_filter, f.class_tag)) {
                    sub->filtered.features.push_back(f);
                }
            }
            if (!sub->filtered.features.empty()) {
                sub->index = std::make_unique<geo::SpatialIndex>(sub->filtered);
            }
            subsets_.emplace(key, std::move(sub));
        }
        if (spec.kind == PredictorKind::distance && !subsets_.at(key)->index) {
            censored_.push_back(spec.name);
        }
    }
}

FeatureContext::~FeatureContext() = default;
FeatureContext::FeatureContext(FeatureContext &&) noexcept = default;

const FeatureContext::Subset &FeatureContext::subset(const PredictorSpec &spec) const {
    auto it = subsets_.find(std::make_pair(spec.layer, spec.class_filter));
    if (it == subsets_.end()) {
        throw ValidationError(fmt::format("predictor '{}' was not registered with this context", spec.name));
    }
    return *it->second;
}

double FeatureContext::evaluate(const PredictorSpec &spec, const Point &p) const {
    switch (spec.kind) {
    case PredictorKind::coordinate: return spec.name == "X" ? p.x : p.y;
    case PredictorKind::buffer_raster_mean: {
        auto it = layers_.find(spec.layer);
        if (it == layers_.end()) {
            throw ValidationError(fmt::format("unknown layer '{}'", spec.layer));
        }
        return raster_mean_within_buffer(p, spec.radius, *it->second);
    }
    case PredictorKind::distance: {
        const auto &sub = subset(spec);
        if (!sub.index) {
            return ceiling_;
        }
        return sub.index->nearest(p).distance;
    }
    case PredictorKind::buffer_length: {
        const auto &sub = subset(spec);
        if (!sub.index) {
            return 0.0;
        }
        double total = 0.0;
        for (auto idx : sub.index->within_circle(p, spec.radius)) {
            total += geo::clipped_length(std::get<geo::Polyline>(sub.filtered.features[idx].geometry), p,
                                         spec.radius);
        }
        return total;
    }
    case PredictorKind::buffer_count: {
        const auto &sub = subset(spec);
        if (!sub.index) {
            return 0.0;
        }
        return static_cast<double>(sub.index->within_circle(p, spec.radius).size());
    }
    }
    return 0.0;
}

std::vector<PredictorSpec> with_coordinates(const std::vector<PredictorSpec> &specs) {
    std::vector<PredictorSpec> all = specs;
    auto has = [&](const char *n) {
        return std::any_of(all.begin(), all.end(), [&](const PredictorSpec &s) { return s.name == n; });
    };
    if (!has("X")) all.push_back({"X", PredictorKind::coordinate, "", {}, 0.0});
    if (!has("Y")) all.push_back({"Y", PredictorKind::coordinate, "", {}, 0.0});
    validate_specs(all);
    return all;
}

PredictorMatrix build_predictor_matrix(const std::vector<Location> &locations,
                                       const std::vector<PredictorSpec> &specs, const FeatureContext &ctx,
                                       unsigned threads) {
    if (locations.empty()) {
        throw ValidationError("build_predictor_matrix needs at least one location");
    }
    const auto all = with_coordinates(specs);

    PredictorMatrix m;
    m.values.resize(static_cast<Eigen::Index>(locations.size()), static_cast<Eigen::Index>(all.size()));
    for (const auto &s : all) {
        m.column_names.push_back(s.name);
        m.units.push_back(unit_of(s.kind));
    }
    for (const auto &loc : locations) {
        m.row_ids.push_back(loc.id);
    }
    parallel_for(
        locations.size(),
        [&](std::size_t i) {
            const auto &loc = locations[i];
            for (std::size_t j = 0; j < all.size(); ++j) {
                try {
                    m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        ctx.evaluate(all[j], loc.point);
                } catch (const std::exception &e) {
                    throw ValidationError(
                        fmt::format("location '{}', predictor '{}': {}", loc.id, all[j].name, e.what()));
                }
            }
        },
        threads);
    return m;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

void write_csv(const std::filesystem::path &path, const PredictorMatrix &m) {
    std::ofstream os(path);
    if (!os) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    os << "row_id";
    for (const auto &n : m.column_names) {
        os << ',' << io::csv_field(n);
    }
    os << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << io::csv_field(m.row_ids[i]);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            os << ',' << io::format_double(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        os << '\n';
    }
}

PredictorMatrix read_csv(const std::filesystem::path &path) {
    auto rows = io::read_csv(path);
    while (!rows.empty() && rows.back().size() == 1 && rows.back()[0].empty()) {
        rows.pop_back();
    }
    if (rows.empty() || rows[0].empty() || rows[0][0] != "row_id") {
        throw ValidationError(fmt::format("{}: expected header starting with row_id", path.string()));
    }
    PredictorMatrix m;
    m.column_names.assign(rows[0].begin() + 1, rows[0].end());
    m.units.assign(m.column_names.size(), "");
    m.values.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(m.column_names.size()));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) {
            throw ValidationError(fmt::format("{}: row {} has {} fields, expected {}", path.string(), i,
                                              rows[i].size(), rows[0].size()));
        }
        m.row_ids.push_back(rows[i][0]);
        for (std::size_t j = 1; j < rows[i].size(); ++j) {
            const auto v = io::parse_double(rows[i][j]);
            if (!v) {
                throw ValidationError(fmt::format("{}: row {}: non-numeric value '{}'", path.string(), i, rows[i][j]));
            }
            m.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = *v;
        }
    }
    validate(m);
    return m;
}

namespace {

constexpr char kMagic[8] = {'L', 'U', 'R', 'P', 'M', 'A', 'T', '1'};

void put_u64(std::ostream &os, std::uint64_t v) { os.write(reinterpret_cast<const char *>(&v), sizeof v); }

std::uint64_t get_u64(std::istream &is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char *>(&v), sizeof v);
    return v;
}

void put_str(std::ostream &os, const std::string &s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream &is) {
    const auto n = get_u64(is);
    if (!is || n > (1u << 20)) {
        throw ValidationError("corrupt predictor cache");
    }
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

} // namespace

void write_binary(const std::filesystem::path &path, const PredictorMatrix &m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    os.write(kMagic, sizeof kMagic);
    put_u64(os, m.rows());
    put_u64(os, m.cols());
    for (const auto &s : m.row_ids) put_str(os, s);
    for (const auto &s : m.column_names) put_str(os, s);
    for (const auto &s : m.units) put_str(os, s);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            os.write(reinterpret_cast<const char *>(&v), sizeof v);
        }
    }
}

PredictorMatrix read_binary(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ValidationError(fmt::format("cannot read {}", path.string()));
    }
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw ValidationError(fmt::format("{}: not a predictor cache", path.string()));
    }
    PredictorMatrix m;
    const auto rows = get_u64(is);
    const auto cols = get_u64(is);
    if (!is || rows > (1u << 28) || cols > (1u << 16)) {
        throw ValidationError(fmt::format("{}: corrupt predictor cache", path.string()));
    }
    for (std::uint64_t i = 0; i < rows; ++i) m.row_ids.push_back(get_str(is));
    for (std::uint64_t i = 0; i < cols; ++i) m.column_names.push_back(get_str(is));
    for (std::uint64_t i = 0; i < cols; ++i) m.units.push_back(get_str(is));
    m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t j = 0; j < cols; ++j) {
            double v = 0.0;
            is.read(reinterpret_cast<char *>(&v), sizeof v);
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    if (!is) {
        throw ValidationError(fmt::format("{}: truncated predictor cache", path.string()));
    }
    validate(m);
    return m;
}

std::string specs_to_json(const std::vector<PredictorSpec> &specs) {
    json arr = json::array();
    for (const auto &s : specs) {
        arr.push_back({{"name", s.name},
                       {"kind", to_string(s.kind)},
                       {"layer", s.layer},
                       {"class_filter", s.class_filter},
                       {"radius", s.radius}});
    }
    return arr.dump();
}

std::vector<PredictorSpec> specs_from_json(const std::string &json_text) {
    const auto arr = json::parse(json_text);
    std::vector<PredictorSpec> out;
    for (const auto &j : arr) {
        PredictorSpec s;
        s.name = j.at("name").get<std::string>();
        s.kind = parse_predictor_kind(j.at("kind").get<std::string>());
        s.layer = j.value("layer", "");
        s.class_filter = j.value("class_filter", std::set<std::string>{});
        s.radius = j.value("radius", 0.0);
        out.push_back(std::move(s));
    }
    validate_specs(out);
    return out;
}

std::string fingerprint(const std::vector<PredictorSpec> &specs, double distance_ceiling) {
    return fmt::format("{}|ceiling={}", specs_to_json(specs), io::format_double(distance_ceiling));
}

} // namespace lur::features
