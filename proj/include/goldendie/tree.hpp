#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "goldendie/palette.hpp"
#include "goldendie/raster.hpp"

namespace goldendie {

/// Node of a binary decision tree over CAD layer states. Splits test a single
/// layer (the value is -1 or +1, so the threshold is implicitly 0); leaves
/// carry a palette class.
struct TreeNode {
    std::int16_t feature = -1; // layer index; -1 marks a leaf
    std::int32_t left = -1;    // child for layer value -1
    std::int32_t right = -1;   // child for layer value +1
    std::int16_t klass = -1;   // leaf class
};

/// Pixelwise simulator: the prediction for a pixel depends only on that
/// pixel's CAD column vector.
struct TreeModel {
    int layer_count = 0;
    int class_count = 0;
    std::vector<TreeNode> nodes; // nodes[0] is the root

    int predict_pattern(std::uint64_t pattern) const;

    static TreeModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Fits a tree on a random sample of (CAD vector, quantized class) pixel
/// pairs. Splits greedily minimize Gini impurity; a node is expanded until it
/// is pure in class or holds a single CAD pattern, so the fitted tree
/// reproduces the per-pattern majority class of the sample exactly.
TreeModel train_tree(const CadStack& cad, const QuantizedImage& quantized,
                     std::size_t n_samples = 5'000'000, std::uint64_t seed = 1);

/// Per-pixel class predictions for a whole stack.
QuantizedImage tree_class_map(const TreeModel& model, const CadStack& cad);

/// Class predictions mapped through the palette.
RasterImage predict_tree(const TreeModel& model, const CadStack& cad, const Palette& palette);

} // namespace goldendie
