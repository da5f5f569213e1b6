#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "goldendie/errors.hpp"

namespace goldendie {

/// Axis-aligned rectangular region inside a raster, origin top-left.
struct PatchRegion {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
};

/// RGB photo with double-precision intensities in [0, 1].
/// Layout is row-major, interleaved channels: data[(y*width + x)*3 + c].
struct RasterImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RasterImage() = default;
    RasterImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    static RasterImage filled(int h, int w, double r, double g, double b);

    double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    bool same_shape(const RasterImage& o) const { return height == o.height && width == o.width; }
};

/// Stack of binary CAD layers; every stored value is -1 or +1.
/// Layout is plane-major: data[(layer*height + y)*width + x].
struct CadStack {
    int height = 0;
    int width = 0;
    int layer_count = 0;
    std::vector<std::int8_t> data;

    CadStack() = default;
    CadStack(int layers, int h, int w)
        : height(h), width(w), layer_count(layers),
          data(static_cast<std::size_t>(layers) * h * w, -1) {}

    std::int8_t& at(int layer, int y, int x) {
        return data[(static_cast<std::size_t>(layer) * height + y) * width + x];
    }
    std::int8_t at(int layer, int y, int x) const {
        return data[(static_cast<std::size_t>(layer) * height + y) * width + x];
    }

    /// Bit l of the result is set iff layer l is +1 at (y, x).
    std::uint64_t pattern_at(int y, int x) const {
        std::uint64_t p = 0;
        for (int l = 0; l < layer_count; ++l)
            if (at(l, y, x) > 0) p |= (1ULL << l);
        return p;
    }
};

/// Per-pixel palette indices of a color-quantized photo.
struct QuantizedImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    QuantizedImage() = default;
    QuantizedImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Binary mask in {-1, +1}.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::int8_t> v;

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), v(static_cast<std::size_t>(h) * w, -1) {}

    std::int8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    std::int8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }

    std::size_t positive_count() const;
};

/// Ground-truth defect annotation: a union mask plus optional per-class masks.
/// When per_class is non-empty, mask is the pixelwise maximum of all classes.
struct DefectLabels {
    BinaryMask mask;
    std::map<std::string, BinaryMask> per_class;

    int height() const { return mask.height; }
    int width() const { return mask.width; }
};

RasterImage extract_patch(const RasterImage& src, const PatchRegion& r);
CadStack extract_patch(const CadStack& src, const PatchRegion& r);
QuantizedImage extract_patch(const QuantizedImage& src, const PatchRegion& r);
BinaryMask extract_patch(const BinaryMask& src, const PatchRegion& r);

} // namespace goldendie
