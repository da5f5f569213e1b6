#include "goldendie/defectmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "goldendie/metrics.hpp"
#include "goldendie/pnm.hpp"

namespace goldendie {

namespace {

void require_pair(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b)) throw DimensionError("photo and simulation dimensions differ");
}

double pixel_dissim(const RasterImage& a, const RasterImage& b, int y, int x, bool squared) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        acc += squared ? d * d : std::abs(d);
    }
    return acc / 3.0;
}

} // namespace

ScoreMap score_pixelwise(const RasterImage& photo, const RasterImage& simulation,
                         const std::string& metric) {
    require_pair(photo, simulation);
    const bool squared = metric == "l2";
    if (!squared && metric != "l1") throw ContractError("unknown pixelwise metric '" + metric + "'");
    ScoreMap map;
    map.height = photo.height;
    map.width = photo.width;
    map.provenance = metric;
    map.score.resize(photo.pixel_count());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < photo.height; ++y)
        for (int x = 0; x < photo.width; ++x)
            map.at(y, x) = pixel_dissim(photo, simulation, y, x, squared);
    return map;
}

ScoreMap score_windowed(const RasterImage& photo, const RasterImage& simulation,
                        const std::string& metric, int window, int stride) {
    require_pair(photo, simulation);
    if (window < 1 || window > photo.height || window > photo.width)
        throw ContractError("window exceeds image dimensions");
    if (stride < 1) throw ContractError("stride must be positive");

    std::vector<int> ys, xs;
    for (int y = 0; y + window <= photo.height; y += stride) ys.push_back(y);
    if (ys.empty() || ys.back() + window != photo.height) ys.push_back(photo.height - window);
    for (int x = 0; x + window <= photo.width; x += stride) xs.push_back(x);
    if (xs.empty() || xs.back() + window != photo.width) xs.push_back(photo.width - window);

    ScoreMap map;
    map.height = photo.height;
    map.width = photo.width;
    map.provenance = metric + "/w" + std::to_string(window) + "/s" + std::to_string(stride);
    map.score.assign(photo.pixel_count(), 0.0);
    std::vector<double> weight(photo.pixel_count(), 0.0);

    for (int y0 : ys) {
        for (int x0 : xs) {
            const PatchRegion r{x0, y0, window, window};
            const RasterImage pp = extract_patch(photo, r);
            const RasterImage sp = extract_patch(simulation, r);
            double d;
            if (metric == "l2")
                d = l2(sp, pp);
            else if (metric == "l1")
                d = l1(sp, pp);
            else if (metric == "ssim_dissim")
                d = 1.0 - ssim(sp, pp, std::min(8, window));
            else
                throw ContractError("unknown window metric '" + metric + "'");
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    map.at(y, x) += d;
                    weight[static_cast<std::size_t>(y) * photo.width + x] += 1.0;
                }
        }
    }
    for (std::size_t i = 0; i < map.score.size(); ++i) map.score[i] /= weight[i];
    return map;
}

BinaryMask binarize(const ScoreMap& map, double threshold) {
    if (threshold < 0.0) throw ContractError("threshold must be non-negative");
    BinaryMask mask(map.height, map.width);
    for (std::size_t i = 0; i < map.score.size(); ++i)
        if (map.score[i] > threshold) mask.v[i] = 1;
    return mask;
}

PRResult average_precision(const ScoreMap& map, const BinaryMask& labels) {
    if (map.height != labels.height || map.width != labels.width)
        throw DimensionError("score map and labels dimensions differ");
    std::size_t total_pos = labels.positive_count();
    if (total_pos == 0) throw ContractError("average precision undefined without positive labels");

    std::vector<std::size_t> idx(map.score.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return map.score[a] > map.score[b]; });

    PRResult pr;
    double tp = 0, fp = 0, prev_recall = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double s = map.score[idx[i]];
        std::size_t j = i;
        while (j < idx.size() && map.score[idx[j]] == s) {
            if (labels.v[idx[j]] > 0)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const double precision = tp / (tp + fp);
        const double recall = tp / static_cast<double>(total_pos);
        pr.thresholds.push_back(s);
        pr.precision.push_back(precision);
        pr.recall.push_back(recall);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    pr.average_precision = ap;
    return pr;
}

ShiftProbe misalignment_probe(const RasterImage& photo, const RasterImage& simulation,
                              int max_shift) {
    require_pair(photo, simulation);
    if (max_shift < 0) throw ContractError("max_shift must be non-negative");

    // mean squared channel difference between photo shifted by (dx, dy) and
    // the simulation, over the valid overlap
    auto shifted_l2 = [&](int dx, int dy) {
        const int y_lo = std::max(0, dy), y_hi = photo.height + std::min(0, dy);
        const int x_lo = std::max(0, dx), x_hi = photo.width + std::min(0, dx);
        if (y_lo >= y_hi || x_lo >= x_hi) return std::numeric_limits<double>::infinity();
        double acc = 0.0;
        for (int y = y_lo; y < y_hi; ++y)
            for (int x = x_lo; x < x_hi; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double d = photo.at(y - dy, x - dx, c) - simulation.at(y, x, c);
                    acc += d * d;
                }
        return acc / (3.0 * (y_hi - y_lo) * (x_hi - x_lo));
    };

    ShiftProbe probe;
    probe.score_before = shifted_l2(0, 0);
    probe.score_after = probe.score_before;
    for (int dy = -max_shift; dy <= max_shift; ++dy)
        for (int dx = -max_shift; dx <= max_shift; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const double s = shifted_l2(dx, dy);
            if (s < probe.score_after) {
                probe.score_after = s;
                probe.dx = dx;
                probe.dy = dy;
            }
        }
    return probe;
}

void save_scoremap(const std::filesystem::path& path, const ScoreMap& map) {
    double mx = 0.0;
    for (double s : map.score) mx = std::max(mx, s);
    const double scale = mx > 0.0 ? mx : 1.0;
    std::vector<std::uint16_t> raw(map.score.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<std::uint16_t>(std::lround(map.score[i] / scale * 65535.0));
    save_pgm16(path, map.height, map.width, raw);

    std::ofstream side(path.string() + ".scale.txt");
    if (!side) throw IoError("cannot write score map sidecar for " + path.string());
    side.precision(17);
    side << "scale " << scale << "\n"
         << "provenance " << (map.provenance.empty() ? "unknown" : map.provenance) << "\n";
}

ScoreMap load_scoremap(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".scale.txt");
    if (!side) throw IoError("missing score map sidecar for " + path.string());
    std::string key;
    double scale = 1.0;
    std::string provenance;
    while (side >> key) {
        if (key == "scale")
            side >> scale;
        else if (key == "provenance")
            side >> provenance;
    }
    ScoreMap map;
    auto raw = load_pgm16(path, map.height, map.width);
    map.provenance = provenance;
    map.score.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        map.score[i] = static_cast<double>(raw[i]) / 65535.0 * scale;
    return map;
}

RasterImage heatmap(const ScoreMap& map) {
    double mx = 0.0;
    for (double s : map.score) mx = std::max(mx, s);
    if (mx <= 0.0) mx = 1.0;
    RasterImage img(map.height, map.width);
    for (std::size_t i = 0; i < map.score.size(); ++i) {
        const double t = std::clamp(map.score[i] / mx, 0.0, 1.0);
        // dark blue -> cyan -> yellow -> red
        img.data[i * 3 + 0] = std::clamp(2.0 * t - 0.5, 0.0, 1.0);
        img.data[i * 3 + 1] = std::clamp(t < 0.5 ? 2.0 * t : 2.0 - 2.0 * t + 0.4, 0.0, 1.0);
        img.data[i * 3 + 2] = std::clamp(1.0 - 2.0 * t, 0.0, 1.0);
    }
    return img;
}

} // namespace goldendie
