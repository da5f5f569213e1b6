#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "goldendie/raster.hpp"

namespace goldendie {

/// Per-pixel dissimilarity between a photo and its simulation.
struct ScoreMap {
    int height = 0;
    int width = 0;
    std::vector<double> score;
    std::string provenance;

    double& at(int y, int x) { return score[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return score[static_cast<std::size_t>(y) * width + x]; }
};

/// Channel-mean squared (metric "l2") or absolute ("l1") difference per pixel.
ScoreMap score_pixelwise(const RasterImage& photo, const RasterImage& simulation,
                         const std::string& metric = "l2");

/// Patch metric averaged over every window covering each pixel. Supported
/// metrics: "l2", "l1", "ssim_dissim" (1 - SSIM with an 8x8 inner window).
ScoreMap score_windowed(const RasterImage& photo, const RasterImage& simulation,
                        const std::string& metric, int window, int stride);

/// Pixels scoring strictly above the threshold become positive.
BinaryMask binarize(const ScoreMap& map, double threshold);

struct PRResult {
    std::vector<double> thresholds; // descending distinct scores
    std::vector<double> precision;
    std::vector<double> recall;
    double average_precision = 0.0;
};

/// Area under the precision-recall curve over a sweep of all distinct score
/// thresholds; tied scores are handled as a single block. Requires at least
/// one positive label pixel.
PRResult average_precision(const ScoreMap& map, const BinaryMask& labels);

struct ShiftProbe {
    int dx = 0, dy = 0;          // shift applied to the photo at the optimum
    double score_before = 0.0;   // whole-image l2 at (0,0)
    double score_after = 0.0;    // l2 over the overlap at the optimum
};

/// Exhaustive integer-shift search minimizing the mean per-pixel squared
/// difference between the shifted photo and the simulation (overlap region
/// only). Diagnostic for stitching misalignment.
ShiftProbe misalignment_probe(const RasterImage& photo, const RasterImage& simulation,
                              int max_shift);

/// 16-bit raster export; the linear score scale is recorded in a text
/// sidecar next to the raster ("<path>.scale.txt").
void save_scoremap(const std::filesystem::path& path, const ScoreMap& map);
ScoreMap load_scoremap(const std::filesystem::path& path);

/// Blue-to-red false-color rendering for reports.
RasterImage heatmap(const ScoreMap& map);

} // namespace goldendie
