#include "goldendie/raster.hpp"

#include <sstream>

namespace goldendie {

namespace {

void check_region(int height, int width, const PatchRegion& r) {
    if (r.w <= 0 || r.h <= 0 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > width || r.y0 + r.h > height) {
        std::ostringstream os;
        os << "patch region [" << r.x0 << "," << r.y0 << " " << r.w << "x" << r.h
           << "] out of bounds for raster " << width << "x" << height;
        throw ContractError(os.str());
    }
}

} // namespace

RasterImage RasterImage::filled(int h, int w, double r, double g, double b) {
    RasterImage img(h, w);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        img.data[i * 3 + 0] = r;
        img.data[i * 3 + 1] = g;
        img.data[i * 3 + 2] = b;
    }
    return img;
}

std::size_t BinaryMask::positive_count() const {
    std::size_t n = 0;
    for (auto x : v)
        if (x > 0) ++n;
    return n;
}

RasterImage extract_patch(const RasterImage& src, const PatchRegion& r) {
    check_region(src.height, src.width, r);
    RasterImage out(r.h, r.w);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = src.at(r.y0 + y, r.x0 + x, c);
    return out;
}

CadStack extract_patch(const CadStack& src, const PatchRegion& r) {
    check_region(src.height, src.width, r);
    CadStack out(src.layer_count, r.h, r.w);
    for (int l = 0; l < src.layer_count; ++l)
        for (int y = 0; y < r.h; ++y)
            for (int x = 0; x < r.w; ++x)
                out.at(l, y, x) = src.at(l, r.y0 + y, r.x0 + x);
    return out;
}

QuantizedImage extract_patch(const QuantizedImage& src, const PatchRegion& r) {
    check_region(src.height, src.width, r);
    QuantizedImage out(r.h, r.w);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            out.at(y, x) = src.at(r.y0 + y, r.x0 + x);
    return out;
}

BinaryMask extract_patch(const BinaryMask& src, const PatchRegion& r) {
    check_region(src.height, src.width, r);
    BinaryMask out(r.h, r.w);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            out.at(y, x) = src.at(r.y0 + y, r.x0 + x);
    return out;
}

} // namespace goldendie
