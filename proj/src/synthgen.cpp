#include "goldendie/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace goldendie {

namespace {

constexpr double kSubstrate[3] = {0.760, 0.745, 0.720};
constexpr double kFrame[3] = {0.355, 0.375, 0.420};
constexpr double kTrace[3] = {0.555, 0.615, 0.700};
constexpr double kPad[3] = {0.800, 0.680, 0.360};
constexpr double kText[3] = {0.285, 0.270, 0.300};
constexpr double kNitrideTint[3] = {0.430, 0.640, 0.600};
constexpr double kTintAlpha = 0.35;
constexpr double kEdgeDarken = 0.64; // border between components and substrate
constexpr int kEdgeRadius = 2;

// 5x7 glyph rows, MSB = leftmost column.
struct Glyph {
    char ch;
    std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
};

const Glyph& glyph_for(char ch) {
    for (const auto& g : kFont)
        if (g.ch == ch) return g;
    return kFont[0];
}

char random_glyph_char(Rng& rng) {
    const auto n = static_cast<std::int64_t>(std::size(kFont));
    return kFont[rng.uniform_int(0, n - 1)].ch;
}

Rect clip_rect(Rect r, int size) {
    const int x1 = std::min(r.x0 + r.w, size);
    const int y1 = std::min(r.y0 + r.h, size);
    r.x0 = std::max(r.x0, 0);
    r.y0 = std::max(r.y0, 0);
    r.w = std::max(0, x1 - r.x0);
    r.h = std::max(0, y1 - r.y0);
    return r;
}

void fill_rect(std::vector<std::uint8_t>& plane, int size, const Rect& r) {
    for (int y = r.y0; y < r.y0 + r.h; ++y)
        std::fill(plane.begin() + static_cast<std::size_t>(y) * size + r.x0,
                  plane.begin() + static_cast<std::size_t>(y) * size + r.x0 + r.w,
                  std::uint8_t{1});
}

void add_die(SynthScene& scene, const Rect& die, Rng& rng) {
    scene.dies.push_back(die);
    const int margin = 14;
    const int fw = 5; // frame ring width

    // layer 0: frame ring plus an alignment cross near the top-right corner
    scene.layer_rects[0].push_back({die.x0, die.y0, die.w, fw});
    scene.layer_rects[0].push_back({die.x0, die.y0 + die.h - fw, die.w, fw});
    scene.layer_rects[0].push_back({die.x0, die.y0 + fw, fw, die.h - 2 * fw});
    scene.layer_rects[0].push_back({die.x0 + die.w - fw, die.y0 + fw, fw, die.h - 2 * fw});
    const int cx = die.x0 + die.w - margin - 12;
    const int cy = die.y0 + margin + 6;
    scene.layer_rects[0].push_back({cx - 6, cy - 1, 13, 3});
    scene.layer_rects[0].push_back({cx - 1, cy - 6, 3, 13});

    // layer 3: die label, top-left; reserve its band before routing traces
    const int scale = static_cast<int>(rng.uniform_int(2, 3));
    const int len = static_cast<int>(rng.uniform_int(4, 7));
    int gx = die.x0 + margin;
    const int gy = die.y0 + margin;
    for (int i = 0; i < len; ++i) {
        GlyphBox g;
        g.ch = random_glyph_char(rng);
        g.scale = scale;
        g.box = {gx, gy, 5 * scale, 7 * scale};
        scene.glyphs.push_back(g);
        gx += 6 * scale;
    }
    const int text_bottom = gy + 7 * 3 + 8;

    // layer 1: traces, horizontal runs with optional jogs
    const int n_traces = static_cast<int>(rng.uniform_int(7, 12));
    const int x_lo = die.x0 + margin;
    const int x_hi = die.x0 + die.w - margin;
    for (int t = 0; t < n_traces; ++t) {
        const int wt = static_cast<int>(rng.uniform_int(3, 5));
        const int y = static_cast<int>(rng.uniform_int(text_bottom, die.y0 + die.h - margin - 40));
        if (rng.uniform() < 0.5) {
            scene.layer_rects[1].push_back({x_lo, y, x_hi - x_lo, wt});
        } else {
            const int jog_x = static_cast<int>(rng.uniform_int(x_lo + 30, x_hi - 30));
            int dy = static_cast<int>(rng.uniform_int(12, 34));
            if (rng.uniform() < 0.5) dy = -dy;
            const int y2 = std::clamp(y + dy, text_bottom, die.y0 + die.h - margin - wt);
            scene.layer_rects[1].push_back({x_lo, y, jog_x - x_lo, wt});
            scene.layer_rects[1].push_back({jog_x, std::min(y, y2), wt, std::abs(y2 - y) + wt});
            scene.layer_rects[1].push_back({jog_x, y2, x_hi - jog_x, wt});
        }
    }

    // layer 2: bond pad row along the bottom edge
    const int n_pads = static_cast<int>(rng.uniform_int(3, 6));
    const int ps = static_cast<int>(rng.uniform_int(18, 30));
    const int slot = (die.w - 2 * margin) / n_pads;
    for (int p = 0; p < n_pads; ++p) {
        const int px = die.x0 + margin + p * slot + static_cast<int>(rng.uniform_int(0, std::max(1, slot - ps) - 1));
        scene.layer_rects[2].push_back({px, die.y0 + die.h - margin - ps, ps, ps});
    }

    // layer 4: nitride cover over the central region of some dies
    if (rng.uniform() < 0.6) {
        scene.layer_rects[4].push_back(
            {die.x0 + die.w / 6, die.y0 + die.h / 4, die.w * 2 / 3, die.h / 2});
    }
}

} // namespace

SynthScene build_scene(int size, Rng& rng) {
    SynthScene scene;
    scene.size = size;
    const int street = 14;
    const int die_w = static_cast<int>(rng.uniform_int(200, 280));
    const int die_h = static_cast<int>(rng.uniform_int(200, 280));
    for (int y0 = street; y0 + die_h <= size - street; y0 += die_h + street)
        for (int x0 = street; x0 + die_w <= size - street; x0 += die_w + street)
            add_die(scene, {x0, y0, die_w, die_h}, rng);
    return scene;
}

CadStack rasterize_cad(const SynthScene& scene) {
    const int size = scene.size;
    CadStack cad(5, size, size);
    for (int l = 0; l < 5; ++l) {
        std::vector<std::uint8_t> plane(static_cast<std::size_t>(size) * size, 0);
        for (const Rect& r : scene.layer_rects[l]) fill_rect(plane, size, clip_rect(r, size));
        if (l == 3) {
            for (const GlyphBox& g : scene.glyphs) {
                const Glyph& gl = glyph_for(g.ch);
                for (int ry = 0; ry < 7; ++ry)
                    for (int rx = 0; rx < 5; ++rx) {
                        if (!((gl.rows[ry] >> (4 - rx)) & 1)) continue;
                        fill_rect(plane, size,
                                  clip_rect({g.box.x0 + rx * g.scale, g.box.y0 + ry * g.scale,
                                             g.scale, g.scale},
                                            size));
                    }
            }
        }
        for (std::size_t i = 0; i < plane.size(); ++i)
            cad.data[static_cast<std::size_t>(l) * plane.size() + i] = plane[i] ? 1 : -1;
    }
    return cad;
}

RasterImage render_clean(const SynthScene& scene, const CadStack& cad) {
    const int size = scene.size;
    RasterImage img(size, size);

    // solid = any opaque component (frame, trace, pad, text); nitride is a tint
    std::vector<std::uint8_t> solid(static_cast<std::size_t>(size) * size, 0);
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (std::size_t i = 0; i < plane; ++i) {
        const bool s = cad.data[0 * plane + i] > 0 || cad.data[1 * plane + i] > 0 ||
                       cad.data[2 * plane + i] > 0 || cad.data[3 * plane + i] > 0;
        solid[i] = s ? 1 : 0;
    }

    // manufacturing halo: components darken a thin band of the surrounding
    // substrate that no CAD layer marks
    std::vector<std::uint8_t> near(plane, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            if (!solid[static_cast<std::size_t>(y) * size + x]) continue;
            for (int dy = -kEdgeRadius; dy <= kEdgeRadius; ++dy)
                for (int dx = -kEdgeRadius; dx <= kEdgeRadius; ++dx) {
                    if (dx * dx + dy * dy > kEdgeRadius * kEdgeRadius) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || nx < 0 || ny >= size || nx >= size) continue;
                    near[static_cast<std::size_t>(ny) * size + nx] = 1;
                }
        }

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * size + x;
            const double* base = kSubstrate;
            if (cad.data[3 * plane + i] > 0)
                base = kText;
            else if (cad.data[2 * plane + i] > 0)
                base = kPad;
            else if (cad.data[1 * plane + i] > 0)
                base = kTrace;
            else if (cad.data[0 * plane + i] > 0)
                base = kFrame;

            double rgb[3] = {base[0], base[1], base[2]};
            if (cad.data[4 * plane + i] > 0)
                for (int c = 0; c < 3; ++c)
                    rgb[c] = (1.0 - kTintAlpha) * rgb[c] + kTintAlpha * kNitrideTint[c];
            if (!solid[i] && near[i])
                for (int c = 0; c < 3; ++c) rgb[c] *= kEdgeDarken;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
        }
    }
    return img;
}

namespace {

// Sets a pixel and marks the label wherever the stored value actually moved.
void put_pixel(RasterImage& photo, BinaryMask& labels, int y, int x, const double rgb[3]) {
    if (y < 0 || x < 0 || y >= photo.height || x >= photo.width) return;
    bool changed = false;
    for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb[c], 0.0, 1.0);
        if (photo.at(y, x, c) != v) {
            photo.at(y, x, c) = v;
            changed = true;
        }
    }
    if (changed) labels.at(y, x) = 1;
}

void check_photo_labels(const RasterImage& photo, const BinaryMask& labels) {
    if (photo.height != labels.height || photo.width != labels.width)
        throw DimensionError("photo and label mask dimensions differ");
}

} // namespace

void inject_dust(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng) {
    check_photo_labels(photo, labels);
    if (count < 0) throw ContractError("negative dust count");
    for (std::int64_t i = 0; i < count; ++i) {
        const int cx = static_cast<int>(rng.uniform_int(0, photo.width - 1));
        const int cy = static_cast<int>(rng.uniform_int(0, photo.height - 1));
        const double base = rng.uniform(0.02, 0.12);
        const double r = rng.uniform(0.4, 2.1);
        double rgb[3] = {base, base * 0.95, base * 1.05};
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                if (dx * dx + dy * dy <= r * r) put_pixel(photo, labels, cy + dy, cx + dx, rgb);
    }
}

void inject_nitride(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng) {
    check_photo_labels(photo, labels);
    if (count < 0) throw ContractError("negative nitride count");
    for (std::int64_t i = 0; i < count; ++i) {
        const int cx = static_cast<int>(rng.uniform_int(0, photo.width - 1));
        const int cy = static_cast<int>(rng.uniform_int(0, photo.height - 1));
        const double radius = rng.uniform(4.0, 20.0);
        const double base = rng.uniform(0.86, 0.96);
        const double phase1 = rng.uniform(0.0, 6.28318);
        const double phase2 = rng.uniform(0.0, 6.28318);
        const int reach = static_cast<int>(std::ceil(radius * 1.4)) + 1;
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dx = -reach; dx <= reach; ++dx) {
                const double rr = std::sqrt(static_cast<double>(dx * dx + dy * dy));
                const double theta = std::atan2(static_cast<double>(dy), static_cast<double>(dx));
                const double boundary = radius * (1.0 + 0.25 * std::sin(3.0 * theta + phase1) +
                                                  0.12 * std::sin(5.0 * theta + phase2));
                if (rr > boundary) continue;
                const double shade = base - 0.05 * rr / (radius + 1e-9);
                double rgb[3] = {shade, shade * 0.99, shade * 0.97};
                const int y = cy + dy, x = cx + dx;
                if (y < 0 || x < 0 || y >= photo.height || x >= photo.width) continue;
                // blob interiors are labeled in full: nudge any pixel that
                // would coincide with the current value
                for (int c = 0; c < 3; ++c)
                    if (photo.at(y, x, c) == std::clamp(rgb[c], 0.0, 1.0)) rgb[c] -= 0.031;
                put_pixel(photo, labels, y, x, rgb);
            }
    }
}

void inject_resist(RasterImage& photo, BinaryMask& labels, std::int64_t count, Rng& rng) {
    check_photo_labels(photo, labels);
    if (count < 0) throw ContractError("negative resist count");
    for (std::int64_t i = 0; i < count; ++i) {
        double x = static_cast<double>(rng.uniform_int(0, photo.width - 1));
        double y = static_cast<double>(rng.uniform_int(0, photo.height - 1));
        const double base = rng.uniform(0.40, 0.62);
        const int steps = static_cast<int>(rng.uniform_int(6, 18));
        for (int s = 0; s < steps; ++s) {
            const double r = rng.uniform(1.0, 3.0);
            const double jitter = rng.uniform(-0.04, 0.04);
            double rgb[3] = {base + jitter, base * 0.92 + jitter, base * 0.88 + jitter};
            const int ir = static_cast<int>(std::ceil(r));
            for (int dy = -ir; dy <= ir; ++dy)
                for (int dx = -ir; dx <= ir; ++dx)
                    if (dx * dx + dy * dy <= r * r)
                        put_pixel(photo, labels, static_cast<int>(y) + dy, static_cast<int>(x) + dx,
                                  rgb);
            x += rng.uniform(-2.2, 2.2);
            y += rng.uniform(-2.2, 2.2);
        }
    }
}

int burn_letters(RasterImage& photo, BinaryMask& labels, const SynthScene& scene, double fraction,
                 Rng& rng) {
    check_photo_labels(photo, labels);
    if (fraction < 0.0 || fraction > 1.0) throw ContractError("letter fraction outside [0,1]");
    const int total = static_cast<int>(scene.glyphs.size());
    const int burn = static_cast<int>(std::llround(fraction * total));
    if (burn == 0) return 0;

    std::vector<int> order(total);
    for (int i = 0; i < total; ++i) order[i] = i;
    rng.shuffle(order);

    for (int b = 0; b < burn; ++b) {
        const GlyphBox& g = scene.glyphs[order[b]];
        const Rect r = clip_rect(g.box, scene.size);
        const double px = rng.uniform(0.0, 6.28318);
        const double py = rng.uniform(0.0, 6.28318);
        for (int y = r.y0; y < r.y0 + r.h; ++y)
            for (int x = r.x0; x < r.x0 + r.w; ++x) {
                // smooth dark mottle over the whole glyph box; every covered
                // pixel moves strictly darker
                const double f = 0.38 + 0.17 * std::sin(0.55 * x + px) * std::sin(0.62 * y + py);
                double rgb[3] = {photo.at(y, x, 0) * f, photo.at(y, x, 1) * f,
                                 photo.at(y, x, 2) * (f * 0.9)};
                put_pixel(photo, labels, y, x, rgb);
                labels.at(y, x) = 1;
            }
    }
    return burn;
}

namespace {

template <typename T>
void roll_rows_right(std::vector<T>& data, int height, int width, int stride, int shift) {
    // shift > 0 moves content toward +x, wrapping at the borders
    shift = ((shift % width) + width) % width;
    if (shift == 0) return;
    std::vector<T> row(static_cast<std::size_t>(width) * stride);
    for (int y = 0; y < height; ++y) {
        T* base = data.data() + static_cast<std::size_t>(y) * width * stride;
        std::copy(base, base + static_cast<std::size_t>(width) * stride, row.begin());
        for (int x = 0; x < width; ++x) {
            const int src = (x - shift + width) % width;
            for (int c = 0; c < stride; ++c)
                base[static_cast<std::size_t>(x) * stride + c] =
                    row[static_cast<std::size_t>(src) * stride + c];
        }
    }
}

} // namespace

SynthResult generate(const SynthConfig& config) {
    if (config.size < 256)
        throw ContractError("synthetic canvas must be at least 256 pixels, got " +
                            std::to_string(config.size));
    if (config.rate_dust < 0 || config.rate_nitride < 0 || config.rate_resist < 0)
        throw ContractError("defect rates must be non-negative");
    if (config.letter_defect_fraction < 0 || config.letter_defect_fraction > 1)
        throw ContractError("letter_defect_fraction outside [0,1]");

    const Rng root(config.seed);
    Rng scene_rng = root.fork(1);
    Rng defect_rng = root.fork(2);
    Rng noise_rng = root.fork(3);

    SynthResult out;
    SynthScene scene = build_scene(config.size, scene_rng);
    out.cad = rasterize_cad(scene);
    out.photo = render_clean(scene, out.cad);

    const double mpx = static_cast<double>(config.size) * config.size / 1e6;

    DefectLabels labels;
    labels.mask = BinaryMask(config.size, config.size);
    BinaryMask dust(config.size, config.size), nitride(config.size, config.size),
        resist(config.size, config.size), letters(config.size, config.size);

    out.report.dust = defect_rng.poisson(config.rate_dust * mpx);
    inject_dust(out.photo, dust, out.report.dust, defect_rng);
    out.report.nitride = defect_rng.poisson(config.rate_nitride * mpx);
    inject_nitride(out.photo, nitride, out.report.nitride, defect_rng);
    out.report.resist = defect_rng.poisson(config.rate_resist * mpx);
    inject_resist(out.photo, resist, out.report.resist, defect_rng);
    out.report.glyphs_total = static_cast<int>(scene.glyphs.size());
    out.report.glyphs_burned =
        burn_letters(out.photo, letters, scene, config.letter_defect_fraction, defect_rng);

    for (std::size_t i = 0; i < labels.mask.v.size(); ++i)
        labels.mask.v[i] = std::max(std::max(dust.v[i], nitride.v[i]),
                                    std::max(resist.v[i], letters.v[i]));
    labels.per_class.emplace("dust", std::move(dust));
    labels.per_class.emplace("nitride", std::move(nitride));
    labels.per_class.emplace("resist", std::move(resist));
    labels.per_class.emplace("letters", std::move(letters));

    if (config.noise_sigma > 0.0) {
        for (double& v : out.photo.data)
            v = std::clamp(v + noise_rng.gaussian(0.0, config.noise_sigma), 0.0, 1.0);
    }

    if (config.misalignment_px != 0) {
        roll_rows_right(out.photo.data, out.photo.height, out.photo.width, 3,
                        config.misalignment_px);
        roll_rows_right(labels.mask.v, labels.mask.height, labels.mask.width, 1,
                        config.misalignment_px);
        for (auto& [_, m] : labels.per_class)
            roll_rows_right(m.v, m.height, m.width, 1, config.misalignment_px);
    }

    out.labels = std::move(labels);
    for (int l = 0; l < 5; ++l)
        out.report.shapes_per_layer[l] = static_cast<int>(scene.layer_rects[l].size()) +
                                         (l == 3 ? static_cast<int>(scene.glyphs.size()) : 0);
    return out;
}

std::string SceneReport::to_string() const {
    std::ostringstream os;
    os << "defects: dust=" << dust << " nitride=" << nitride << " resist=" << resist
       << " burned_glyphs=" << glyphs_burned << "/" << glyphs_total << "\n"
       << "shapes per layer:";
    for (int l = 0; l < 5; ++l) os << " L" << l << "=" << shapes_per_layer[l];
    os << "\n";
    return os.str();
}

} // namespace goldendie
