#include "lur/synth.hpp"

#include "lur/features.hpp"
#include "lur/io_util.hpp"
#include "lur/rng.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace lur::synth {

namespace {

double sat(double u) { return std::min(u, 1.0); }

constexpr int kFirstYear = 2018;
constexpr int kYears = 5;
constexpr double kYearNoiseSd = 0.5;

struct CityFrame {
    double x0 = 0.0; // lower-left corner of the city square
    double y0 = 0.0;
    double size = 0.0;
    geo::Point centre() const { return {x0 + size / 2.0, y0 + size / 2.0}; }
};

geo::Polyline line(geo::Point a, geo::Point b) { return geo::Polyline{{a, b}}; }

geo::Polygon rect(double x0, double y0, double x1, double y1) {
    return geo::Polygon{{geo::Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}}};
}

void add(geo::GeoLayer &layer, geo::Geometry g, std::string tag) {
    layer.features.push_back({std::move(g), std::move(tag)});
}

// Straight lines across the square at the given offsets from the centre,
// one vertical and one horizontal per offset.
void grid_lines(geo::GeoLayer &roads, const CityFrame &f, const std::vector<double> &offsets, double margin,
                const std::string &cls) {
    const auto c = f.centre();
    const double lo = margin, hi = f.size - margin;
    for (double o : offsets) {
        add(roads, line({c.x + o, f.y0 + lo}, {c.x + o, f.y0 + hi}), cls);
        add(roads, line({f.x0 + lo, c.y + o}, {f.x0 + hi, c.y + o}), cls);
    }
}

void build_roads(geo::GeoLayer &roads, const CityFrame &f, int index, Rng &rng) {
    const auto c = f.centre();
    const double half = f.size / 2.0;

    // Primary: dual-carriageway cross arterials through the centre plus an octagonal ring.
    grid_lines(roads, f, {-10.0, 10.0}, 100.0, "primary");
    const double ring = 900.0 + rng.uniform(-100.0, 100.0);
    for (int k = 0; k < 8; ++k) {
        const double a0 = (k + 0.5) * std::numbers::pi / 4.0, a1 = (k + 1.5) * std::numbers::pi / 4.0;
        add(roads, line({c.x + ring * std::cos(a0), c.y + ring * std::sin(a0)},
                        {c.x + ring * std::cos(a1), c.y + ring * std::sin(a1)}),
            "primary");
    }
    // Motorway bypass as a dual carriageway along one side of the city.
    const double off = half - 180.0 - rng.uniform(0.0, 60.0);
    if (index % 2 == 0) {
        add(roads, line({f.x0 + 20.0, c.y - off}, {f.x0 + f.size - 20.0, c.y - off}), "motorway");
        add(roads, line({f.x0 + 20.0, c.y - off + 25.0}, {f.x0 + f.size - 20.0, c.y - off + 25.0}), "motorway");
    } else {
        add(roads, line({c.x - off, f.y0 + 20.0}, {c.x - off, f.y0 + f.size - 20.0}), "motorway");
        add(roads, line({c.x - off + 25.0, f.y0 + 20.0}, {c.x - off + 25.0, f.y0 + f.size - 20.0}), "motorway");
    }

    const double sec = 600.0 + rng.uniform(0.0, 200.0);
    grid_lines(roads, f, {-sec, sec}, 150.0, "secondary");

    std::vector<double> tertiary;
    for (double o = 300.0; o < half - 200.0; o += 400.0) {
        if (std::abs(o - sec) > 60.0) {
            tertiary.push_back(o);
            tertiary.push_back(-o);
        }
    }
    grid_lines(roads, f, tertiary, 200.0, "tertiary");

    // Residential streets: dense blocks near the centre, sparser outside.
    // Each street is a short segment so the network thins out with distance.
    const double phase = rng.uniform(30.0, 70.0);
    auto taken = [&](double o) {
        if (std::abs(o) < 40.0 || std::abs(std::abs(o) - sec) < 40.0) return true;
        return std::any_of(tertiary.begin(), tertiary.end(), [&](double t) { return std::abs(t - o) < 40.0; });
    };
    for (double o = -half + 250.0 + phase; o < half - 250.0; o += 150.0) {
        if (taken(o)) continue;
        const double reach = std::abs(o) < 700.0 ? 900.0 : 500.0;
        for (double s = -reach; s < reach; s += 300.0) {
            if (std::abs(o) >= 700.0 && rng.uniform() < 0.4) continue;
            const double s1 = s + 300.0 - rng.uniform(0.0, 80.0);
            add(roads, line({c.x + o, c.y + s}, {c.x + o, c.y + s1}), "residential");
            if (std::abs(o) >= 700.0 && rng.uniform() < 0.5) continue;
            add(roads, line({c.x + s, c.y + o}, {c.x + s1, c.y + o}), "residential");
        }
    }
}

void build_landuse(geo::GeoLayer &lu, std::vector<geo::Polygon> &parks, const CityFrame &f, int index, Rng &rng) {
    const auto c = f.centre();
    add(lu, rect(c.x - 350.0, c.y - 350.0, c.x + 350.0, c.y + 350.0), "11100");
    const int n_parks = 3 + static_cast<int>(rng.below(3));
    for (int k = 0; k < n_parks; ++k) {
        const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double rad = rng.uniform(250.0, 1200.0);
        const double w = rng.uniform(120.0, 300.0), h = rng.uniform(120.0, 300.0);
        const double px = c.x + rad * std::cos(ang), py = c.y + rad * std::sin(ang);
        auto p = rect(px - w / 2.0, py - h / 2.0, px + w / 2.0, py + h / 2.0);
        parks.push_back(p);
        add(lu, std::move(p), "14100");
    }
    // Agricultural, pasture and forest patches in the corners.
    const char *outer[] = {"22000", "23000", "31000", "22000"};
    for (int k = 0; k < 4; ++k) {
        const double x = k % 2 == 0 ? f.x0 : f.x0 + f.size - 450.0;
        const double y = k < 2 ? f.y0 : f.y0 + f.size - 450.0;
        add(lu, rect(x, y, x + 450.0, y + 450.0), outer[k]);
    }
    const double ix = c.x + (index % 2 == 0 ? 700.0 : -1200.0);
    add(lu, rect(ix, c.y + 600.0, ix + 500.0, c.y + 900.0), "12100");
    const double ry = c.y - 500.0 - rng.uniform(0.0, 300.0);
    add(lu, rect(f.x0 + 100.0, ry, f.x0 + f.size - 100.0, ry + 30.0), "12230");
    if (index == 0) {
        add(lu, rect(f.x0 + f.size - 350.0, c.y - 300.0, f.x0 + f.size - 50.0, c.y + 300.0), "12400");
    }
}

geo::Polygon build_boundary(const CityFrame &f, Rng &rng) {
    const auto c = f.centre();
    geo::Ring ring;
    constexpr int kVertices = 24;
    for (int k = 0; k < kVertices; ++k) {
        const double a = 2.0 * std::numbers::pi * k / kVertices;
        const double r = 1350.0 + rng.uniform(-100.0, 100.0);
        ring.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    ring.push_back(ring.front());
    return geo::Polygon{{ring}};
}

bool in_any(const std::vector<geo::Polygon> &polys, const geo::Point &p) {
    return std::any_of(polys.begin(), polys.end(), [&](const geo::Polygon &q) { return geo::contains(q, p); });
}

// Point at fraction t along the polyline plus its unit direction.
std::pair<geo::Point, geo::Point> along(const geo::Polyline &l, double t) {
    const double total = geo::length(l);
    double target = t * total;
    for (std::size_t k = 0; k + 1 < l.vertices.size(); ++k) {
        const auto &a = l.vertices[k], &b = l.vertices[k + 1];
        const double seg = geo::distance(a, b);
        if (target <= seg || k + 2 == l.vertices.size()) {
            const double u = std::min(target / seg, 1.0);
            return {{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)}, {(b.x - a.x) / seg, (b.y - a.y) / seg}};
        }
        target -= seg;
    }
    return {l.vertices.front(), {1.0, 0.0}};
}

} // namespace

double ground_truth(double lmroad100, double laroad50, double dgreen, double build100) {
    return 45.0 + 12.0 * sat(lmroad100 / 400.0) + 6.0 * sat(laroad50 / 150.0) -
           4.0 * sat(std::max(0.0, 1.0 - dgreen / 500.0)) + 3.0 * sat(build100 / 40.0);
}

const std::vector<std::string> &ground_truth_inputs() {
    static const std::vector<std::string> v{"LMRoad100", "LARoad50", "DGreen", "Build100"};
    return v;
}

double SyntheticCity::signal_sd() const {
    if (truth.size() < 2) return 0.0;
    const double m = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss = 0.0;
    for (double t : truth) ss += (t - m) * (t - m);
    return std::sqrt(ss / static_cast<double>(truth.size() - 1));
}

SyntheticCity generate(const SynthOptions &opt) {
    if (opt.cities < 1) {
        throw ValidationError("synthetic dataset needs at least one city");
    }
    if (opt.n_sites < 1) {
        throw ValidationError("synthetic dataset needs at least one site");
    }
    if (!(opt.noise_sd >= 0.0) || !(opt.city_size >= 2000.0) || !(opt.city_gap >= 0.0) ||
        !(opt.impervious_cell > 0.0) || !(opt.population_cell > 0.0)) {
        throw ValidationError("invalid synthetic dataset options");
    }
    SyntheticCity out;
    out.options = opt;
    out.roads.kind = geo::LayerKind::polyline;
    out.landuse.kind = geo::LayerKind::polygon;
    out.buildings.kind = geo::LayerKind::point;
    out.boundaries.kind = geo::LayerKind::polygon;

    std::vector<CityFrame> frames;
    std::vector<geo::Polygon> bounds;
    std::vector<std::vector<geo::Polygon>> parks(static_cast<std::size_t>(opt.cities));
    for (int k = 0; k < opt.cities; ++k) {
        const auto ck = static_cast<std::uint64_t>(k);
        CityFrame f{k * (opt.city_size + opt.city_gap), 0.0, opt.city_size};
        frames.push_back(f);
        out.city_names.push_back(fmt::format("city{}", k + 1));
        Rng rr(derive_key(opt.seed, {0x524f414453, ck}));
        build_roads(out.roads, f, k, rr);
        Rng lr(derive_key(opt.seed, {0x4c414e44, ck}));
        build_landuse(out.landuse, parks[static_cast<std::size_t>(k)], f, k, lr);
        Rng br(derive_key(opt.seed, {0x424f554e44, ck}));
        bounds.push_back(build_boundary(f, br));
        add(out.boundaries, bounds.back(), out.city_names.back());
        // Footpaths through each park and a pedestrian loop in the centre.
        for (const auto &p : parks[static_cast<std::size_t>(k)]) {
            const auto b = geo::bounds(geo::Geometry{p});
            const double my = (b.min_y + b.max_y) / 2.0, mx = (b.min_x + b.max_x) / 2.0;
            add(out.roads, line({b.min_x + 10.0, my}, {b.max_x - 10.0, my}), "footway");
            add(out.roads, line({mx, b.min_y + 10.0}, {mx, b.max_y - 10.0}), "footway");
        }
        const auto c = f.centre();
        for (double o : {-150.0, 150.0}) {
            add(out.roads, line({c.x - 150.0, c.y + o}, {c.x + 150.0, c.y + o}), "footway");
            add(out.roads, line({c.x + o, c.y - 150.0}, {c.x + o, c.y + 150.0}), "footway");
        }
    }
    validate(out.roads);
    validate(out.landuse);
    validate(out.boundaries);

    // Buildings: density decays from the centre, none on carriageways or in parks.
    const auto road_index = geo::build_spatial_index(out.roads);
    for (int k = 0; k < opt.cities; ++k) {
        const auto &f = frames[static_cast<std::size_t>(k)];
        const auto c = f.centre();
        Rng rng(derive_key(opt.seed, {0x4255494c44, static_cast<std::uint64_t>(k)}));
        const int candidates = 40000;
        for (int i = 0; i < candidates; ++i) {
            const geo::Point p{f.x0 + rng.uniform(0.0, f.size), f.y0 + rng.uniform(0.0, f.size)};
            const double keep = std::exp(-geo::distance(p, c) / 700.0);
            if (rng.uniform() >= keep) continue;
            if (in_any(parks[static_cast<std::size_t>(k)], p)) continue;
            if (road_index.nearest(p).distance < 8.0) continue;
            add(out.buildings, p, "building");
        }
    }
    validate(out.buildings);

    // Pooled extent covering every city with a 100 m margin.
    const double x_min = -100.0, y_min = -100.0;
    const double x_max = frames.back().x0 + opt.city_size + 100.0, y_max = opt.city_size + 100.0;

    {
        geo::Raster imp;
        imp.cell_size = opt.impervious_cell;
        imp.x_ll = x_min;
        imp.y_ll = y_min;
        imp.n_cols = static_cast<std::size_t>(std::ceil((x_max - x_min) / imp.cell_size));
        imp.n_rows = static_cast<std::size_t>(std::ceil((y_max - y_min) / imp.cell_size));
        imp.values.assign(imp.n_rows * imp.n_cols, 0.0);
        Rng rng(derive_key(opt.seed, {0x494d50}));
        for (std::size_t row = 0; row < imp.n_rows; ++row) {
            for (std::size_t col = 0; col < imp.n_cols; ++col) {
                const auto p = imp.cell_center(row, col);
                double best = 1e300;
                std::size_t city = 0;
                for (std::size_t k = 0; k < frames.size(); ++k) {
                    const double d = geo::distance(p, frames[k].centre());
                    if (d < best) best = d, city = k;
                }
                double v = 0.85 * std::exp(-best / 900.0);
                if (road_index.nearest(p).distance < 15.0) v += 0.3;
                if (in_any(parks[city], p)) v = 0.05;
                v += rng.uniform(-0.05, 0.05);
                imp.values[row * imp.n_cols + col] = std::round(std::clamp(v, 0.0, 1.0) * 1000.0) / 1000.0;
            }
        }
        out.imperviousness.kind = geo::LayerKind::raster;
        out.imperviousness.raster = std::move(imp);
    }

    {
        geo::Raster &pop = out.population;
        pop.cell_size = opt.population_cell;
        pop.x_ll = x_min;
        pop.y_ll = y_min;
        pop.n_cols = static_cast<std::size_t>(std::ceil((x_max - x_min) / pop.cell_size));
        pop.n_rows = static_cast<std::size_t>(std::ceil((y_max - y_min) / pop.cell_size));
        pop.values.assign(pop.n_rows * pop.n_cols, 0.0);
        std::vector<double> count(pop.values.size(), 0.0);
        for (const auto &b : out.buildings.features) {
            if (const auto cell = pop.cell_of(std::get<geo::Point>(b.geometry))) {
                count[cell->first * pop.n_cols + cell->second] += 1.0;
            }
        }
        for (std::size_t row = 0; row < pop.n_rows; ++row) {
            for (std::size_t col = 0; col < pop.n_cols; ++col) {
                if (in_any(bounds, pop.cell_center(row, col))) {
                    pop.values[row * pop.n_cols + col] = 2.5 * count[row * pop.n_cols + col];
                }
            }
        }
    }

    // Site allocation: uneven shares across cities, remainder to the first.
    std::vector<std::size_t> per_city(frames.size(), 0);
    {
        std::vector<double> share{0.35, 0.2, 0.15, 0.15, 0.15};
        share.resize(frames.size(), 0.15);
        const double total = std::accumulate(share.begin(), share.end(), 0.0);
        std::size_t given = 0;
        for (std::size_t k = 1; k < frames.size(); ++k) {
            per_city[k] = static_cast<std::size_t>(std::floor(share[k] / total * static_cast<double>(opt.n_sites)));
            given += per_city[k];
        }
        per_city[0] = opt.n_sites - given;
    }

    std::vector<std::size_t> major, minor;
    std::vector<std::size_t> road_city(out.roads.size());
    for (std::size_t i = 0; i < out.roads.size(); ++i) {
        const auto &f = out.roads.features[i];
        const auto v = std::get<geo::Polyline>(f.geometry).vertices.front();
        road_city[i] = static_cast<std::size_t>(std::floor(v.x / (opt.city_size + opt.city_gap)));
        if (f.class_tag == "motorway" || f.class_tag == "primary" || f.class_tag == "secondary") {
            major.push_back(i);
        } else if (f.class_tag == "tertiary" || f.class_tag == "residential") {
            minor.push_back(i);
        }
    }

    std::map<std::string, const geo::GeoLayer *> layers{{"roads", &out.roads},
                                                       {"landuse", &out.landuse},
                                                       {"buildings", &out.buildings},
                                                       {"imperviousness", &out.imperviousness}};
    std::vector<features::PredictorSpec> truth_specs;
    for (const auto &s : features::default_specs()) {
        if (std::find(ground_truth_inputs().begin(), ground_truth_inputs().end(), s.name) !=
            ground_truth_inputs().end()) {
            truth_specs.push_back(s);
        }
    }
    const features::FeatureContext ctx(layers, truth_specs);

    std::size_t serial = 0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        Rng rng(derive_key(opt.seed, {0x5349544553, k}));
        std::vector<std::size_t> maj, mnr;
        for (auto i : major) if (road_city[i] == k) maj.push_back(i);
        for (auto i : minor) if (road_city[i] == k) mnr.push_back(i);
        const auto bb = geo::bounds(geo::Geometry{bounds[k]});
        std::vector<geo::Point> placed;
        int attempts = 0;
        while (placed.size() < per_city[k]) {
            if (++attempts > 200000) {
                throw ComputeError(fmt::format("could not place {} sites in {}", per_city[k], out.city_names[k]));
            }
            const double u = rng.uniform();
            geo::Point p;
            const auto &pk = parks[k];
            if (u < 0.65 && !maj.empty() && !mnr.empty()) {
                const auto &pool = u < 0.5 ? maj : mnr;
                const auto &l = std::get<geo::Polyline>(out.roads.features[pool[rng.below(pool.size())]].geometry);
                const auto [q, dir] = along(l, rng.uniform());
                const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double off = rng.uniform(5.0, 15.0) * side;
                p = {q.x - dir.y * off, q.y + dir.x * off};
            } else if (u < 0.8 && !pk.empty()) {
                const auto pb = geo::bounds(geo::Geometry{pk[rng.below(pk.size())]});
                p = {rng.uniform(pb.min_x, pb.max_x), rng.uniform(pb.min_y, pb.max_y)};
            } else {
                p = {rng.uniform(bb.min_x, bb.max_x), rng.uniform(bb.min_y, bb.max_y)};
            }
            // Stored coordinates are rounded to 1 cm; the truth is evaluated there.
            p = {std::round(p.x * 100.0) / 100.0, std::round(p.y * 100.0) / 100.0};
            if (!geo::contains(bounds[k], p)) continue;
            if (std::any_of(placed.begin(), placed.end(), [&](const geo::Point &q) { return geo::distance(p, q) < 30.0; }))
                continue;
            placed.push_back(p);
        }
        for (const auto &p : placed) {
            std::vector<double> v;
            for (const auto &s : truth_specs) v.push_back(ctx.evaluate(s, p));
            const auto get = [&](const std::string &name) {
                for (std::size_t j = 0; j < truth_specs.size(); ++j) {
                    if (truth_specs[j].name == name) return v[j];
                }
                return 0.0;
            };
            const double truth = ground_truth(get("LMRoad100"), get("LARoad50"), get("DGreen"), get("Build100"));
            const double eps = rng.normal(0.0, opt.noise_sd);
            std::vector<int> years;
            for (int y = 0; y < kYears; ++y) years.push_back(kFirstYear + y);
            if (rng.uniform() < 0.1) years.erase(years.begin() + static_cast<long>(rng.below(kYears)));
            std::vector<double> dev;
            for (std::size_t y = 0; y < years.size(); ++y) dev.push_back(rng.normal(0.0, kYearNoiseSd));
            const double md = std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(dev.size());
            std::map<int, double> yearly;
            for (std::size_t y = 0; y < years.size(); ++y) {
                const double level = std::clamp(truth + eps + dev[y] - md, geo::kMinLaeq, geo::kMaxLaeq);
                yearly[years[y]] = std::round(level * 100.0) / 100.0;
            }
            ++serial;
            out.sites.push_back(geo::make_site(fmt::format("S{:03}", serial), out.city_names[k], p.x, p.y, yearly));
            out.truth.push_back(truth);
            out.noise.push_back(eps);
        }
    }
    return out;
}

std::vector<std::string> write_dataset(const std::filesystem::path &dir, const SyntheticCity &city) {
    std::filesystem::create_directories(dir);
    geo::write_sites(dir / "sites.csv", city.sites);
    geo::write_vector_layer(dir / "roads.geojson", city.roads, kRoadClassField);
    geo::write_vector_layer(dir / "landuse.geojson", city.landuse, kLandUseField);
    geo::write_vector_layer(dir / "buildings.geojson", city.buildings, "kind");
    geo::write_vector_layer(dir / "boundaries.geojson", city.boundaries, kCityField);
    geo::write_raster(dir / "imperviousness.asc", *city.imperviousness.raster);
    geo::write_raster(dir / "population.asc", city.population);

    std::string truth = "site_id,city,truth,noise\n";
    for (std::size_t i = 0; i < city.sites.size(); ++i) {
        truth += fmt::format("{},{},{},{}\n", city.sites[i].site_id, city.sites[i].city,
                             io::format_double(city.truth[i]), io::format_double(city.noise[i]));
    }
    io::write_text(dir / "truth.csv", truth);

    const auto &o = city.options;
    nlohmann::json meta{{"seed", o.seed},
                        {"n_sites", o.n_sites},
                        {"cities", city.city_names},
                        {"noise_sd", o.noise_sd},
                        {"signal_sd", city.signal_sd()},
                        {"ground_truth",
                         "45 + 12 sat(LMRoad100/400) + 6 sat(LARoad50/150) - 4 sat(max(0, 1 - DGreen/500)) "
                         "+ 3 sat(Build100/40) + N(0, noise_sd^2), sat(u) = min(u, 1), clamped to [20, 120]"},
                        {"n_roads", city.roads.size()},
                        {"n_landuse", city.landuse.size()},
                        {"n_buildings", city.buildings.size()}};
    io::write_text(dir / "synth.json", meta.dump(2) + "\n");

    nlohmann::json families = nlohmann::json::array();
    for (const char *f : {"LM", "ENET", "SVR", "RF", "GBT"}) families.push_back({{"family", f}});
    nlohmann::json config{
        {"inputs",
         {{"sites", "sites.csv"},
          {"layers",
           {{"roads", {{"path", "roads.geojson"}, {"kind", "polyline"}, {"class_field", kRoadClassField}}},
            {"landuse", {{"path", "landuse.geojson"}, {"kind", "polygon"}, {"class_field", kLandUseField}}},
            {"buildings", {{"path", "buildings.geojson"}, {"kind", "point"}, {"class_field", ""}}},
            {"imperviousness", {{"path", "imperviousness.asc"}, {"kind", "raster"}, {"imperviousness", true}}}}},
          {"boundary", {{"path", "boundaries.geojson"}, {"city_field", kCityField}}},
          {"population", "population.asc"}}},
        {"predictors", "default"},
        {"distance_ceiling", features::kDefaultDistanceCeiling},
        {"families", families},
        {"cv", {{"repeats", 4}, {"folds", 10}, {"inner_folds", 10}, {"seed", o.seed}}},
        {"seed", o.seed},
        {"explain", {{"family", "GBT"}, {"top_k", 8}, {"dependence", {"LMRoad100", "LARoad50"}}}},
        {"mapping", {{"family", "GBT"}, {"cell_size", 50.0}, {"thresholds", {40, 45, 50, 55, 60, 65, 70}},
                     {"format", "ascii"}}},
        {"moran", {{"power", 1.0}, {"row_standardize", true}, {"n_perm", 999}}},
        {"output_dir", "out"}};
    io::write_text(dir / "config.json", config.dump(2) + "\n");

    std::vector<std::string> files{"boundaries.geojson", "buildings.geojson", "config.json", "imperviousness.asc",
                                   "landuse.geojson",    "population.asc",    "roads.geojson", "sites.csv",
                                   "synth.json",         "truth.csv"};
    return files;
}

} // namespace lur::synth
