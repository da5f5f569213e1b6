#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "goldendie/raster.hpp"

namespace goldendie {

using Rgb = std::array<double, 3>;

/// Ordered color palette. After fitting, centroids are arranged so that
/// consecutive entries are close in RGB (open-path traveling-salesman order),
/// which makes index distance a rough proxy for color distance.
struct Palette {
    std::vector<Rgb> centroids;
    double order_cost = 0.0; // total Euclidean length of the centroid path

    int size() const { return static_cast<int>(centroids.size()); }

    static Palette load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// FNV-1a hash of the serialized centroid list; stored in checkpoints so
    /// a model is never paired with a foreign palette.
    std::uint64_t hash() const;
};

/// Lloyd's k-means on a uniform random pixel sample, followed by
/// open-path ordering of the centroids. Deterministic for a fixed seed.
/// When wcss_trace is given it receives the within-cluster sum of squares
/// at each Lloyd iteration.
Palette fit_palette(const RasterImage& photo, int k = 64,
                    std::size_t sample_size = 1'000'000, std::uint64_t seed = 1,
                    std::vector<double>* wcss_trace = nullptr);

/// Orders centroids along an approximately shortest open path
/// (nearest-neighbor construction from every start, then 2-opt).
Palette order_palette(std::vector<Rgb> centroids);

/// Total Euclidean length of the open path visiting centroids in order.
double path_cost(const std::vector<Rgb>& centroids);

/// Nearest-centroid assignment; ties resolved to the lowest index.
QuantizedImage quantize(const RasterImage& photo, const Palette& palette);

/// Palette lookup of every index.
RasterImage reconstruct(const QuantizedImage& q, const Palette& palette);

} // namespace goldendie
