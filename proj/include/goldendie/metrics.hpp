#pragma once

#include <span>
#include <string>
#include <vector>

#include "goldendie/raster.hpp"
#include "goldendie/tensor.hpp"

namespace goldendie {

/// Sum with pairwise (cascade) splitting; keeps large reductions
/// order-insensitive to well below 1e-12 relative error.
double pairwise_sum(std::span<const double> x);

// --- RGB-space metrics ------------------------------------------------------

/// Mean absolute pixel-channel error, in [0,1] for in-range images.
double l1(const RasterImage& pred, const RasterImage& target);

/// Mean squared pixel-channel error, in [0,1] for in-range images.
double l2(const RasterImage& pred, const RasterImage& target);

/// 10*log10(max_val^2 / MSE). Identical images yield +infinity.
double psnr(const RasterImage& pred, const RasterImage& target, double max_val = 1.0);

/// Mean SSIM over all sliding windows, channels averaged. Uniform window.
double ssim(const RasterImage& pred, const RasterImage& target, int window = 8,
            double k1 = 0.01, double k2 = 0.03);

// --- class-space metrics ----------------------------------------------------

/// Mean per-pixel categorical cross entropy of logits (1,C,H,W) against
/// target class indices.
double cross_entropy(const Tensor& logits, const QuantizedImage& target);

/// Focal loss; gamma = 0 reduces exactly to cross entropy.
double focal(const Tensor& logits, const QuantizedImage& target, double gamma = 2.0);

/// Fraction of pixels whose predicted index is within k palette positions of
/// the target, cyclically by default.
double k_off_accuracy(const QuantizedImage& pred, const QuantizedImage& target, int k = 2,
                      bool cyclic = true, int num_classes = 64);

/// Dice coefficient of two binary masks; two empty masks score 1.
double dice(const BinaryMask& pred, const BinaryMask& target);

// --- aggregation ------------------------------------------------------------

struct MetricReport {
    std::string metric;
    std::vector<double> values; // per patch
    double mean = 0.0;
    double sd = 0.0;
    bool higher_better = false;
    int excluded = 0; // non-finite values (e.g. PSNR on identical patches)
};

/// Mean and sample standard deviation of per-patch values. Non-finite
/// entries are excluded from the moments and counted.
MetricReport aggregate(std::string metric, std::vector<double> values, bool higher_better);

struct CorrelationTable {
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> pearson;  // symmetric, unit diagonal
    std::vector<std::vector<double>> spearman; // symmetric, unit diagonal
};

double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman's rank correlation with average ranks on ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Cross-metric agreement. values_per_metric[m] holds one score per model;
/// all metrics must be scored on at least two models.
CorrelationTable correlate(const std::vector<std::string>& metric_names,
                           const std::vector<std::vector<double>>& values_per_metric);

} // namespace goldendie
