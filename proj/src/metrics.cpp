#include "goldendie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace goldendie {

namespace {

void require_same_shape(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b))
        throw DimensionError("image shapes differ: " + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                             std::to_string(b.height));
}

double sum_abs_diff(const RasterImage& a, const RasterImage& b, bool squared) {
    std::vector<double> terms(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        terms[i] = squared ? d * d : std::abs(d);
    }
    return pairwise_sum(terms);
}

} // namespace

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 32) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

double l1(const RasterImage& pred, const RasterImage& target) {
    require_same_shape(pred, target);
    return sum_abs_diff(pred, target, false) / static_cast<double>(pred.data.size());
}

double l2(const RasterImage& pred, const RasterImage& target) {
    require_same_shape(pred, target);
    return sum_abs_diff(pred, target, true) / static_cast<double>(pred.data.size());
}

double psnr(const RasterImage& pred, const RasterImage& target, double max_val) {
    const double mse = l2(pred, target);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const RasterImage& pred, const RasterImage& target, int window, double k1, double k2) {
    require_same_shape(pred, target);
    if (window < 1 || pred.height < window || pred.width < window)
        throw ContractError("ssim window " + std::to_string(window) + " exceeds patch " +
                            std::to_string(pred.width) + "x" + std::to_string(pred.height));
    const double c1 = k1 * k1;
    const double c2 = k2 * k2;
    const double inv_n = 1.0 / (window * window);

    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(pred.height - window + 1) * (pred.width - window + 1) * 3);
    for (int c = 0; c < 3; ++c) {
        for (int y0 = 0; y0 + window <= pred.height; ++y0) {
            for (int x0 = 0; x0 + window <= pred.width; ++x0) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int y = y0; y < y0 + window; ++y)
                    for (int x = x0; x < x0 + window; ++x) {
                        const double a = pred.at(y, x, c);
                        const double b = target.at(y, x, c);
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                    }
                const double mx = sx * inv_n, my = sy * inv_n;
                const double vx = sxx * inv_n - mx * mx;
                const double vy = syy * inv_n - my * my;
                const double cov = sxy * inv_n - mx * my;
                scores.push_back(((2 * mx * my + c1) * (2 * cov + c2)) /
                                 ((mx * mx + my * my + c1) * (vx + vy + c2)));
            }
        }
    }
    return pairwise_sum(scores) / static_cast<double>(scores.size());
}

namespace {

double class_loss(const Tensor& logits, const QuantizedImage& target, double gamma, bool focal_mode) {
    if (logits.n != 1 || logits.h != target.height || logits.w != target.width)
        throw DimensionError("logit tensor does not match target dimensions");
    const int k_out = logits.c;
    std::vector<double> per_pixel(target.data.size());
    const std::size_t plane = logits.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        const int t = target.data[p];
        if (t >= k_out)
            throw ContractError("target index " + std::to_string(t) + " >= class count " +
                                std::to_string(k_out));
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k_out; ++c) mx = std::max(mx, logits.v[c * plane + p]);
        double denom = 0.0;
        for (int c = 0; c < k_out; ++c) denom += std::exp(logits.v[c * plane + p] - mx);
        const double log_pt = logits.v[static_cast<std::size_t>(t) * plane + p] - mx - std::log(denom);
        const double ce = -log_pt;
        per_pixel[p] = focal_mode ? std::pow(1.0 - std::exp(log_pt), gamma) * ce : ce;
    }
    return pairwise_sum(per_pixel) / static_cast<double>(per_pixel.size());
}

} // namespace

double cross_entropy(const Tensor& logits, const QuantizedImage& target) {
    return class_loss(logits, target, 0.0, false);
}

double focal(const Tensor& logits, const QuantizedImage& target, double gamma) {
    return class_loss(logits, target, gamma, true);
}

double k_off_accuracy(const QuantizedImage& pred, const QuantizedImage& target, int k, bool cyclic,
                      int num_classes) {
    if (pred.height != target.height || pred.width != target.width)
        throw DimensionError("quantized image shapes differ");
    if (pred.data.empty()) throw ContractError("k_off_accuracy on empty images");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        int d = std::abs(static_cast<int>(pred.data[i]) - static_cast<int>(target.data[i]));
        if (cyclic) d = std::min(d, num_classes - d);
        if (d <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.data.size());
}

double dice(const BinaryMask& pred, const BinaryMask& target) {
    if (pred.height != target.height || pred.width != target.width)
        throw DimensionError("mask shapes differ");
    std::size_t a = 0, b = 0, inter = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const bool pa = pred.v[i] > 0;
        const bool pb = target.v[i] > 0;
        a += pa;
        b += pb;
        inter += pa && pb;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

MetricReport aggregate(std::string metric, std::vector<double> values, bool higher_better) {
    MetricReport r;
    r.metric = std::move(metric);
    r.higher_better = higher_better;
    r.values = std::move(values);

    std::vector<double> finite;
    finite.reserve(r.values.size());
    for (double v : r.values) {
        if (std::isfinite(v))
            finite.push_back(v);
        else
            ++r.excluded;
    }
    if (finite.empty()) {
        r.mean = std::numeric_limits<double>::quiet_NaN();
        r.sd = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.mean = pairwise_sum(finite) / static_cast<double>(finite.size());
    if (finite.size() > 1) {
        std::vector<double> sq(finite.size());
        for (std::size_t i = 0; i < finite.size(); ++i) {
            const double d = finite[i] - r.mean;
            sq[i] = d * d;
        }
        r.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(finite.size() - 1));
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ContractError("pearson requires two equally sized series of length >= 2");
    const auto n = static_cast<double>(x.size());
    const double mx = pairwise_sum(x) / n;
    const double my = pairwise_sum(y) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        return std::equal(x.begin(), x.end(), y.begin()) ? 1.0 : 0.0;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

CorrelationTable correlate(const std::vector<std::string>& metric_names,
                           const std::vector<std::vector<double>>& values_per_metric) {
    if (metric_names.size() != values_per_metric.size())
        throw ContractError("metric name count does not match value series count");
    const std::size_t m = metric_names.size();
    if (m == 0) throw ContractError("correlate with no metrics");
    const std::size_t models = values_per_metric[0].size();
    if (models < 2) throw ContractError("correlate requires at least 2 models");
    for (const auto& v : values_per_metric)
        if (v.size() != models) throw ContractError("metric series have differing lengths");

    CorrelationTable t;
    t.metrics = metric_names;
    t.pearson.assign(m, std::vector<double>(m, 1.0));
    t.spearman.assign(m, std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double p = pearson(values_per_metric[i], values_per_metric[j]);
            const double s = spearman(values_per_metric[i], values_per_metric[j]);
            t.pearson[i][j] = t.pearson[j][i] = p;
            t.spearman[i][j] = t.spearman[j][i] = s;
        }
    }
    return t;
}

} // namespace goldendie
