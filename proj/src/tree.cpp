#include "goldendie/tree.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "goldendie/rng.hpp"

namespace goldendie {

namespace {

struct PatternRow {
    std::uint64_t pattern;
    std::vector<std::uint64_t> class_counts;
};

int majority_class(const std::vector<std::uint64_t>& counts) {
    int best = 0;
    std::uint64_t best_n = 0;
    for (int c = 0; c < static_cast<int>(counts.size()); ++c)
        if (counts[c] > best_n) { // ties stay at the lowest class
            best_n = counts[c];
            best = c;
        }
    return best;
}

double gini(const std::vector<std::uint64_t>& counts, std::uint64_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (const auto n : counts) {
        const double p = static_cast<double>(n) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct TreeBuilder {
    int layer_count;
    int class_count;
    std::vector<TreeNode> nodes;

    int build(const std::vector<const PatternRow*>& rows) {
        std::vector<std::uint64_t> totals(class_count, 0);
        std::uint64_t n = 0;
        for (const auto* r : rows)
            for (int c = 0; c < class_count; ++c) {
                totals[c] += r->class_counts[c];
                n += r->class_counts[c];
            }

        const bool pure = std::count_if(totals.begin(), totals.end(),
                                        [](std::uint64_t x) { return x > 0; }) <= 1;
        if (pure || rows.size() == 1) {
            TreeNode leaf;
            leaf.klass = static_cast<std::int16_t>(majority_class(totals));
            nodes.push_back(leaf);
            return static_cast<int>(nodes.size()) - 1;
        }

        // pick the split with the lowest weighted child impurity; only
        // features that separate the rows qualify
        int best_feature = -1;
        double best_score = std::numeric_limits<double>::infinity();
        for (int f = 0; f < layer_count; ++f) {
            std::vector<std::uint64_t> left(class_count, 0), right(class_count, 0);
            std::uint64_t nl = 0, nr = 0;
            for (const auto* r : rows) {
                auto& side = (r->pattern >> f) & 1 ? right : left;
                auto& ns = (r->pattern >> f) & 1 ? nr : nl;
                for (int c = 0; c < class_count; ++c) {
                    side[c] += r->class_counts[c];
                    ns += r->class_counts[c];
                }
            }
            if (nl == 0 || nr == 0) continue;
            const double score = (static_cast<double>(nl) * gini(left, nl) +
                                  static_cast<double>(nr) * gini(right, nr)) /
                                 static_cast<double>(n);
            if (score < best_score) {
                best_score = score;
                best_feature = f;
            }
        }
        // distinct patterns always differ in some bit, so a split exists
        std::vector<const PatternRow*> lrows, rrows;
        for (const auto* r : rows)
            ((r->pattern >> best_feature) & 1 ? rrows : lrows).push_back(r);

        const int self = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[self].feature = static_cast<std::int16_t>(best_feature);
        const int l = build(lrows);
        const int r = build(rrows);
        nodes[self].left = l;
        nodes[self].right = r;
        return self;
    }
};

} // namespace

TreeModel train_tree(const CadStack& cad, const QuantizedImage& quantized, std::size_t n_samples,
                     std::uint64_t seed) {
    if (cad.height != quantized.height || cad.width != quantized.width)
        throw DimensionError("CAD stack and quantized image dimensions differ");
    if (n_samples == 0) throw ContractError("train_tree with empty sample");
    const std::size_t n_pixels = static_cast<std::size_t>(cad.height) * cad.width;
    if (n_pixels == 0) throw ContractError("train_tree on empty raster");

    std::vector<std::uint64_t> patterns(n_pixels);
    for (int y = 0; y < cad.height; ++y)
        for (int x = 0; x < cad.width; ++x)
            patterns[static_cast<std::size_t>(y) * cad.width + x] = cad.pattern_at(y, x);

    int class_count = 0;
    for (const auto c : quantized.data) class_count = std::max(class_count, static_cast<int>(c) + 1);

    Rng rng(seed);
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> hist;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const auto p = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(n_pixels) - 1));
        auto& counts = hist[patterns[p]];
        if (counts.empty()) counts.assign(class_count, 0);
        ++counts[quantized.data[p]];
    }

    std::vector<PatternRow> rows;
    rows.reserve(hist.size());
    for (auto& [pat, counts] : hist) rows.push_back({pat, std::move(counts)});
    std::sort(rows.begin(), rows.end(),
              [](const PatternRow& a, const PatternRow& b) { return a.pattern < b.pattern; });

    TreeBuilder builder{cad.layer_count, class_count, {}};
    std::vector<const PatternRow*> row_ptrs;
    row_ptrs.reserve(rows.size());
    for (const auto& r : rows) row_ptrs.push_back(&r);
    builder.build(row_ptrs);

    TreeModel model;
    model.layer_count = cad.layer_count;
    model.class_count = class_count;
    model.nodes = std::move(builder.nodes);
    return model;
}

int TreeModel::predict_pattern(std::uint64_t pattern) const {
    int i = 0;
    while (nodes[i].feature >= 0)
        i = (pattern >> nodes[i].feature) & 1 ? nodes[i].right : nodes[i].left;
    return nodes[i].klass;
}

QuantizedImage tree_class_map(const TreeModel& model, const CadStack& cad) {
    if (model.layer_count != cad.layer_count)
        throw ContractError("model expects " + std::to_string(model.layer_count) +
                            " CAD layers, stack has " + std::to_string(cad.layer_count));
    QuantizedImage out(cad.height, cad.width);
    std::unordered_map<std::uint64_t, std::uint8_t> cache;
    for (int y = 0; y < cad.height; ++y)
        for (int x = 0; x < cad.width; ++x) {
            const std::uint64_t pat = cad.pattern_at(y, x);
            auto it = cache.find(pat);
            if (it == cache.end())
                it = cache.emplace(pat, static_cast<std::uint8_t>(model.predict_pattern(pat))).first;
            out.at(y, x) = it->second;
        }
    return out;
}

RasterImage predict_tree(const TreeModel& model, const CadStack& cad, const Palette& palette) {
    return reconstruct(tree_class_map(model, cad), palette);
}

namespace {

template <typename T>
void write_le(std::ofstream& out, T v) {
    unsigned char buf[sizeof(T)];
    auto u = static_cast<std::uint64_t>(static_cast<std::make_unsigned_t<T>>(v));
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw IoError("truncated tree model " + path.string());
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(static_cast<std::make_unsigned_t<T>>(u));
}

constexpr char kTreeMagic[4] = {'G', 'D', 'T', 'R'};

} // namespace

void TreeModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write tree model " + path.string());
    out.write(kTreeMagic, 4);
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer_count));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(class_count));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(nodes.size()));
    for (const auto& n : nodes) {
        write_le<std::int16_t>(out, n.feature);
        write_le<std::int32_t>(out, n.left);
        write_le<std::int32_t>(out, n.right);
        write_le<std::int16_t>(out, n.klass);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

TreeModel TreeModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tree model " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || !std::equal(magic, magic + 4, kTreeMagic))
        throw IoError(path.string() + " is not a tree model file");
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != 1) throw IoError("unsupported tree model version " + std::to_string(version));
    TreeModel m;
    m.layer_count = static_cast<int>(read_le<std::uint32_t>(in, path));
    m.class_count = static_cast<int>(read_le<std::uint32_t>(in, path));
    const auto n_nodes = read_le<std::uint32_t>(in, path);
    m.nodes.resize(n_nodes);
    for (auto& n : m.nodes) {
        n.feature = read_le<std::int16_t>(in, path);
        n.left = read_le<std::int32_t>(in, path);
        n.right = read_le<std::int32_t>(in, path);
        n.klass = read_le<std::int16_t>(in, path);
    }
    return m;
}

} // namespace goldendie
