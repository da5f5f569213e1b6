#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "goldendie/raster.hpp"
#include "goldendie/rng.hpp"

namespace goldendie {

/// Parameters of one synthetic wafer. Defect rates are densities per
/// megapixel; realized counts are Poisson draws.
struct SynthConfig {
    int size = 1024;       // square canvas, minimum 256
    std::uint64_t seed = 1;
    double rate_dust = 8.0;
    double rate_nitride = 8.0;
    double rate_resist = 8.0;
    double letter_defect_fraction = 0.2;
    double noise_sigma = 0.02;
    int misalignment_px = 0; // horizontal photo shift relative to the CAD stack
};

struct Rect {
    int x0 = 0, y0 = 0, w = 0, h = 0;
};

struct GlyphBox {
    Rect box;
    char ch = ' ';
    int scale = 1;
};

/// Layout of one generated wafer: filled rectangles per CAD layer plus the
/// text glyphs. Layer roles: 0 die frames, 1 traces, 2 pads, 3 text,
/// 4 nitride cover.
struct SynthScene {
    int size = 0;
    std::array<std::vector<Rect>, 5> layer_rects;
    std::vector<GlyphBox> glyphs; // rendered into layer 3
    std::vector<Rect> dies;       // substrate elsewhere
};

struct SceneReport {
    std::int64_t dust = 0;
    std::int64_t nitride = 0;
    std::int64_t resist = 0;
    int glyphs_total = 0;
    int glyphs_burned = 0;
    std::array<int, 5> shapes_per_layer{};
    std::string to_string() const;
};

struct SynthResult {
    RasterImage photo;
    CadStack cad;
    DefectLabels labels;
    SceneReport report;
};

/// Generates a full synthetic dataset: photo, 5-layer CAD stack and
/// pixel-perfect defect labels. Bitwise reproducible for a fixed seed; the
/// scene, the defect draws and the pixel noise use independent sub-streams,
/// so running with all rates at zero yields the defect-free golden render
/// of the same CAD stack under the same noise.
SynthResult generate(const SynthConfig& config);

SynthScene build_scene(int size, Rng& rng);
CadStack rasterize_cad(const SynthScene& scene);
RasterImage render_clean(const SynthScene& scene, const CadStack& cad);

// Defect injectors. Each draws `count` instances into the photo and raises
// exactly the pixels it changed in the label mask.
void inject_dust(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng);
void inject_nitride(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng);
void inject_resist(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng);

/// Corrupts round(fraction * glyph count) glyphs; the full bounding region of
/// every corrupted glyph is re-rendered (and therefore labeled). Returns the
/// number of corrupted glyphs.
int burn_letters(RasterImage& photo, BinaryMask& labels, const SynthScene& scene, double fraction,
                 Rng& rng);

} // namespace goldendie
