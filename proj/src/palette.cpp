#include "goldendie/palette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "goldendie/rng.hpp"

namespace goldendie {

namespace {

double dist2(const Rgb& a, const Rgb& b) {
    const double dr = a[0] - b[0], dg = a[1] - b[1], db = a[2] - b[2];
    return dr * dr + dg * dg + db * db;
}

double dist(const Rgb& a, const Rgb& b) { return std::sqrt(dist2(a, b)); }

int nearest_centroid(const Rgb& p, const std::vector<Rgb>& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(centroids.size()); ++i) {
        const double d = dist2(p, centroids[i]);
        if (d < best_d) { // strict: ties stay at the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<int> nearest_neighbor_path(const std::vector<Rgb>& pts, int start) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> path;
    path.reserve(n);
    std::vector<bool> used(n, false);
    int cur = start;
    path.push_back(cur);
    used[cur] = true;
    for (int step = 1; step < n; ++step) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (used[j]) continue;
            const double d = dist2(pts[cur], pts[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        cur = best;
        path.push_back(cur);
        used[cur] = true;
    }
    return path;
}

double order_cost_of(const std::vector<Rgb>& pts, const std::vector<int>& path) {
    double c = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) c += dist(pts[path[i - 1]], pts[path[i]]);
    return c;
}

// 2-opt on an open path: reverse path[i..j] while any reversal shortens it.
// End segments only touch one boundary edge, so the ends are handled as
// zero-cost virtual edges.
void two_opt(const std::vector<Rgb>& pts, std::vector<int>& path) {
    const int n = static_cast<int>(path.size());
    bool improved = true;
    while (improved) {
        improved = false;
        for (int i = 0; i < n - 1; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double before = (i > 0 ? dist(pts[path[i - 1]], pts[path[i]]) : 0.0) +
                                      (j < n - 1 ? dist(pts[path[j]], pts[path[j + 1]]) : 0.0);
                const double after = (i > 0 ? dist(pts[path[i - 1]], pts[path[j]]) : 0.0) +
                                     (j < n - 1 ? dist(pts[path[i]], pts[path[j + 1]]) : 0.0);
                if (after < before - 1e-12) {
                    std::reverse(path.begin() + i, path.begin() + j + 1);
                    improved = true;
                }
            }
        }
    }
}

} // namespace

double path_cost(const std::vector<Rgb>& centroids) {
    double c = 0.0;
    for (std::size_t i = 1; i < centroids.size(); ++i) c += dist(centroids[i - 1], centroids[i]);
    return c;
}

Palette order_palette(std::vector<Rgb> centroids) {
    if (centroids.size() < 3) throw ContractError("order_palette requires at least 3 centroids");
    const int n = static_cast<int>(centroids.size());

    std::vector<int> best_path;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int start = 0; start < n; ++start) {
        auto path = nearest_neighbor_path(centroids, start);
        two_opt(centroids, path);
        const double c = order_cost_of(centroids, path);
        if (c < best_cost) {
            best_cost = c;
            best_path = std::move(path);
        }
    }

    Palette p;
    p.centroids.reserve(centroids.size());
    for (int idx : best_path) p.centroids.push_back(centroids[idx]);
    p.order_cost = best_cost;
    return p;
}

Palette fit_palette(const RasterImage& photo, int k, std::size_t sample_size, std::uint64_t seed,
                    std::vector<double>* wcss_trace) {
    if (k < 2) throw ContractError("fit_palette requires k >= 2");
    const std::size_t n_pixels = photo.pixel_count();
    if (n_pixels == 0) throw ContractError("fit_palette on empty photo");
    if (sample_size > n_pixels) sample_size = n_pixels;
    if (sample_size < static_cast<std::size_t>(k))
        throw ContractError("sample smaller than centroid count");

    Rng rng(seed);

    std::vector<Rgb> sample(sample_size);
    if (sample_size == n_pixels) {
        for (std::size_t i = 0; i < n_pixels; ++i)
            sample[i] = {photo.data[i * 3], photo.data[i * 3 + 1], photo.data[i * 3 + 2]};
    } else {
        for (std::size_t i = 0; i < sample_size; ++i) {
            const auto p = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(n_pixels) - 1));
            sample[i] = {photo.data[p * 3], photo.data[p * 3 + 1], photo.data[p * 3 + 2]};
        }
    }

    // Initial centroids: the first k distinct colors of a shuffled sample,
    // falling back to repeats when the sample has fewer distinct colors.
    std::vector<std::size_t> order(sample.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Rgb> centroids;
    centroids.reserve(k);
    for (std::size_t i = 0; i < order.size() && static_cast<int>(centroids.size()) < k; ++i) {
        const Rgb& c = sample[order[i]];
        if (std::find(centroids.begin(), centroids.end(), c) == centroids.end())
            centroids.push_back(c);
    }
    for (std::size_t i = 0; static_cast<int>(centroids.size()) < k; ++i)
        centroids.push_back(sample[order[i % order.size()]]);

    std::vector<int> assign(sample.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < sample.size(); ++i)
            assign[i] = nearest_centroid(sample[i], centroids);

        if (wcss_trace) {
            double obj = 0.0;
            for (std::size_t i = 0; i < sample.size(); ++i)
                obj += dist2(sample[i], centroids[assign[i]]);
            wcss_trace->push_back(obj);
        }

        std::vector<Rgb> sums(k, {0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < sample.size(); ++i) {
            for (int c = 0; c < 3; ++c) sums[assign[i]][c] += sample[i][c];
            ++counts[assign[i]];
        }

        double max_move = 0.0;
        for (int j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            Rgb next = {sums[j][0] / counts[j], sums[j][1] / counts[j], sums[j][2] / counts[j]};
            max_move = std::max(max_move, dist(centroids[j], next));
            centroids[j] = next;
        }

        // re-seed empty clusters at the sample point farthest from its centroid
        for (int j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far_i = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < sample.size(); ++i) {
                const double d = dist2(sample[i], centroids[assign[i]]);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            centroids[j] = sample[far_i];
            max_move = std::max(max_move, 1.0);
        }

        if (max_move < 1e-6) break;
    }

    return order_palette(std::move(centroids));
}

QuantizedImage quantize(const RasterImage& photo, const Palette& palette) {
    if (palette.size() < 1) throw ContractError("quantize with empty palette");
    QuantizedImage q(photo.height, photo.width);
    const std::size_t n = photo.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const Rgb p = {photo.data[i * 3], photo.data[i * 3 + 1], photo.data[i * 3 + 2]};
        q.data[i] = static_cast<std::uint8_t>(nearest_centroid(p, palette.centroids));
    }
    return q;
}

RasterImage reconstruct(const QuantizedImage& q, const Palette& palette) {
    RasterImage img(q.height, q.width);
    const std::size_t n = q.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t idx = q.data[i];
        if (idx >= palette.size())
            throw ContractError("quantized index " + std::to_string(idx) +
                                " out of range for palette of " + std::to_string(palette.size()));
        const Rgb& c = palette.centroids[idx];
        img.data[i * 3] = c[0];
        img.data[i * 3 + 1] = c[1];
        img.data[i * 3 + 2] = c[2];
    }
    return img;
}

Palette Palette::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open palette " + path.string());
    Palette p;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int idx;
        Rgb c;
        if (!(ls >> idx >> c[0] >> c[1] >> c[2]))
            throw IoError("malformed palette line '" + line + "' in " + path.string());
        if (idx != static_cast<int>(p.centroids.size()))
            throw IoError("palette indices out of order in " + path.string());
        p.centroids.push_back(c);
    }
    if (p.centroids.empty()) throw IoError("empty palette " + path.string());
    p.order_cost = path_cost(p.centroids);
    return p;
}

void Palette::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write palette " + path.string());
    out << std::fixed << std::setprecision(6);
    for (int i = 0; i < size(); ++i)
        out << i << " " << centroids[i][0] << " " << centroids[i][1] << " " << centroids[i][2]
            << "\n";
}

std::uint64_t Palette::hash() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    for (int i = 0; i < size(); ++i)
        os << i << " " << centroids[i][0] << " " << centroids[i][1] << " " << centroids[i][2]
           << "\n";
    const std::string s = os.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace goldendie
