#include "goldendie/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "goldendie/pnm.hpp"
#include "goldendie/rng.hpp"

namespace goldendie {

using nlohmann::json;

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }

    static const std::set<std::string> known = {
        "name", "photo", "layers", "labels", "label_classes",
        "palette", "split_seed", "split_fraction"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("manifest " + path.string() + ": unknown key '" + key + "'");

    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.photo = j.at("photo").get<std::string>();
        m.layers = j.at("layers").get<std::vector<std::string>>();
        if (j.contains("labels")) m.labels = j["labels"].get<std::string>();
        if (j.contains("label_classes"))
            for (const auto& [cls, p] : j["label_classes"].items())
                m.label_classes.emplace_back(cls, p.get<std::string>());
        if (j.contains("palette")) m.palette = j["palette"].get<std::string>();
        if (j.contains("split_seed")) m.split_seed = j["split_seed"].get<std::uint64_t>();
        if (j.contains("split_fraction")) m.split_fraction = j["split_fraction"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    if (m.layers.empty()) throw ConfigError("manifest " + path.string() + ": no layers listed");
    if (!(m.split_fraction > 0.0 && m.split_fraction < 1.0))
        throw ConfigError("manifest " + path.string() + ": split_fraction must be in (0,1)");
    return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
    json j;
    j["name"] = name;
    j["photo"] = photo;
    j["layers"] = layers;
    if (labels) j["labels"] = *labels;
    if (!label_classes.empty()) {
        json cls = json::object();
        for (const auto& [c, p] : label_classes) cls[c] = p;
        j["label_classes"] = cls;
    }
    if (palette) j["palette"] = *palette;
    j["split_seed"] = split_seed;
    j["split_fraction"] = split_fraction;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

DatasetBundle load_dataset(const std::filesystem::path& manifest_path) {
    DatasetBundle b;
    b.manifest = DatasetManifest::load(manifest_path);
    b.root = manifest_path.parent_path();

    b.photo = load_ppm(b.root / b.manifest.photo);

    b.cad = CadStack(static_cast<int>(b.manifest.layers.size()), b.photo.height, b.photo.width);
    for (std::size_t l = 0; l < b.manifest.layers.size(); ++l) {
        const auto layer_path = b.root / b.manifest.layers[l];
        const BinaryMask plane = load_bitmask(layer_path);
        if (plane.height != b.photo.height || plane.width != b.photo.width)
            throw DimensionError("layer " + layer_path.string() + " is " +
                                 std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                                 " but photo is " + std::to_string(b.photo.width) + "x" +
                                 std::to_string(b.photo.height));
        std::copy(plane.v.begin(), plane.v.end(),
                  b.cad.data.begin() + static_cast<std::ptrdiff_t>(l * plane.v.size()));
    }

    if (b.manifest.labels) {
        DefectLabels labels;
        labels.mask = load_bitmask(b.root / *b.manifest.labels);
        if (labels.mask.height != b.photo.height || labels.mask.width != b.photo.width)
            throw DimensionError("label mask dimensions do not match photo");
        for (const auto& [cls, rel] : b.manifest.label_classes) {
            BinaryMask m = load_bitmask(b.root / rel);
            if (m.height != b.photo.height || m.width != b.photo.width)
                throw DimensionError("label class '" + cls + "' dimensions do not match photo");
            labels.per_class.emplace(cls, std::move(m));
        }
        b.labels = std::move(labels);
    }
    return b;
}

PatchSplit split_patches(int height, int width, int patch_size, double fraction, std::uint64_t seed) {
    if (patch_size <= 0) throw ContractError("patch_size must be positive");
    if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("fraction must be in (0,1)");
    const int ty = height / patch_size;
    const int tx = width / patch_size;
    if (ty == 0 || tx == 0)
        throw ContractError("patch_size " + std::to_string(patch_size) + " exceeds raster " +
                            std::to_string(width) + "x" + std::to_string(height));

    std::vector<PatchRegion> tiles;
    tiles.reserve(static_cast<std::size_t>(ty) * tx);
    for (int y = 0; y < ty; ++y)
        for (int x = 0; x < tx; ++x)
            tiles.push_back({x * patch_size, y * patch_size, patch_size, patch_size});

    Rng rng(seed);
    rng.shuffle(tiles);

    const auto n_train = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(tiles.size())));
    PatchSplit split;
    split.train.assign(tiles.begin(), tiles.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(tiles.begin() + static_cast<std::ptrdiff_t>(n_train), tiles.end());
    return split;
}

} // namespace goldendie
