#pragma once

#include "lur/geodata.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lur::synth {

struct SynthOptions {
    std::uint64_t seed = 7;
    std::size_t n_sites = 232;
    int cities = 5;
    double noise_sd = 3.0;
    double city_size = 3000.0; // square extent per city, m
    double city_gap = 1500.0;
    double impervious_cell = 20.0;
    double population_cell = 100.0;
};

/// Ground-truth noise surface, dB(A), without the measurement noise:
/// 45 + 12 sat(LMRoad100 / 400) + 6 sat(LARoad50 / 150)
///    - 4 sat(max(0, 1 - DGreen / 500)) + 3 sat(Build100 / 40), sat(u) = min(u, 1).
double ground_truth(double lmroad100, double laroad50, double dgreen, double build100);

/// Predictor names the ground truth reads.
const std::vector<std::string> &ground_truth_inputs();

struct SyntheticCity {
    SynthOptions options;
    std::vector<std::string> city_names;
    geo::GeoLayer roads;
    geo::GeoLayer landuse;
    geo::GeoLayer buildings;
    geo::GeoLayer imperviousness;
    geo::GeoLayer boundaries; // polygons tagged with the city name
    geo::Raster population;
    std::vector<geo::SiteMeasurement> sites;
    std::vector<double> truth; // noise-free ground truth per site
    std::vector<double> noise; // site-level measurement noise

    double signal_sd() const;
};

SyntheticCity generate(const SynthOptions &options);

inline constexpr const char *kRoadClassField = "class";
inline constexpr const char *kLandUseField = "code";
inline constexpr const char *kCityField = "city";

/// Writes every input file plus config.json and synth.json into `dir`.
/// Returns the written paths relative to `dir`, sorted.
std::vector<std::string> write_dataset(const std::filesystem::path &dir, const SyntheticCity &city);

} // namespace lur::synth
