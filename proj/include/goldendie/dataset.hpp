#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goldendie/raster.hpp"

namespace goldendie {

/// On-disk description of one dataset: file references plus split policy.
/// Stored as JSON; all paths are resolved relative to the manifest location.
struct DatasetManifest {
    std::string name;
    std::string photo;
    std::vector<std::string> layers;
    std::optional<std::string> labels;                        // union mask
    std::vector<std::pair<std::string, std::string>> label_classes; // (class, path)
    std::optional<std::string> palette;
    std::uint64_t split_seed = 1;
    double split_fraction = 0.7;

    static DatasetManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// A loaded dataset: dimension-checked photo, CAD stack, and optional labels.
struct DatasetBundle {
    DatasetManifest manifest;
    std::filesystem::path root;
    RasterImage photo;
    CadStack cad;
    std::optional<DefectLabels> labels;
};

DatasetBundle load_dataset(const std::filesystem::path& manifest_path);

struct PatchSplit {
    std::vector<PatchRegion> train;
    std::vector<PatchRegion> val;
};

/// Tiles a height x width raster into patch_size squares (partial edge tiles
/// dropped), shuffles them with the given seed, and assigns round(fraction*n)
/// tiles to the training side.
PatchSplit split_patches(int height, int width, int patch_size, double fraction, std::uint64_t seed);

inline PatchSplit split_patches(const DatasetBundle& bundle, int patch_size) {
    return split_patches(bundle.photo.height, bundle.photo.width, patch_size,
                         bundle.manifest.split_fraction, bundle.manifest.split_seed);
}

} // namespace goldendie
