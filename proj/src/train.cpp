#include "goldendie/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "goldendie/metrics.hpp"
#include "goldendie/rng.hpp"

namespace goldendie {

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::l2: return "l2";
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::focal: return "focal";
    }
    return "?";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "l2") return LossKind::l2;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "focal") return LossKind::focal;
    throw ConfigError("unknown loss '" + s + "'");
}

double lr_for_epoch(const TrainConfig& cfg, int epoch) {
    int decays = 0;
    for (int d : cfg.decay_epochs)
        if (d < epoch) ++decays;
    return cfg.lr0 * std::pow(cfg.decay_factor, decays);
}

namespace {

Tensor cad_patch_tensor(const CadStack& cad, const std::vector<PatchRegion>& regions,
                        std::size_t first, std::size_t count) {
    const int p = regions[first].h;
    Tensor x(static_cast<int>(count), cad.layer_count, p, p);
    for (std::size_t s = 0; s < count; ++s) {
        const PatchRegion& r = regions[first + s];
        double* dst = x.sample(static_cast<int>(s));
        for (int l = 0; l < cad.layer_count; ++l)
            for (int y = 0; y < p; ++y)
                for (int xx = 0; xx < p; ++xx)
                    dst[(static_cast<std::size_t>(l) * p + y) * p + xx] =
                        static_cast<double>(cad.at(l, r.y0 + y, r.x0 + xx));
    }
    return x;
}

Tensor rgb_patch_tensor(const RasterImage& img, const std::vector<PatchRegion>& regions,
                        std::size_t first, std::size_t count) {
    const int p = regions[first].h;
    Tensor t(static_cast<int>(count), 3, p, p);
    for (std::size_t s = 0; s < count; ++s) {
        const PatchRegion& r = regions[first + s];
        double* dst = t.sample(static_cast<int>(s));
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    dst[(static_cast<std::size_t>(c) * p + y) * p + x] =
                        img.at(r.y0 + y, r.x0 + x, c);
    }
    return t;
}

Tensor slice_sample(const Tensor& t, int s) {
    Tensor out(1, t.c, t.h, t.w);
    std::copy(t.sample(s), t.sample(s) + out.size(), out.v.begin());
    return out;
}

double patch_class_variance(const QuantizedImage& q, const PatchRegion& r) {
    double sum = 0.0, sum_sq = 0.0;
    const double n = static_cast<double>(r.w) * r.h;
    for (int y = r.y0; y < r.y0 + r.h; ++y)
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
            const double v = q.at(y, x);
            sum += v;
            sum_sq += v * v;
        }
    const double mean = sum / n;
    return sum_sq / n - mean * mean;
}

struct Optimizer {
    OptimizerKind kind;
    double beta1, beta2;
    std::vector<std::vector<double>> m, v;
    std::int64_t t = 0;

    explicit Optimizer(const TrainConfig& cfg, std::vector<ParamRef>& params)
        : kind(cfg.optimizer), beta1(cfg.adam_beta1), beta2(cfg.adam_beta2) {
        if (kind == OptimizerKind::adam) {
            for (auto& p : params) {
                m.emplace_back(p.value->size(), 0.0);
                v.emplace_back(p.value->size(), 0.0);
            }
        }
    }

    void step(std::vector<ParamRef>& params, double lr) {
        if (kind == OptimizerKind::sgd) {
            for (auto& p : params)
                for (std::size_t i = 0; i < p.value->size(); ++i)
                    (*p.value)[i] -= lr * (*p.grad)[i];
            return;
        }
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = params[k];
            for (std::size_t i = 0; i < p.value->size(); ++i) {
                const double g = (*p.grad)[i];
                m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
                v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
                (*p.value)[i] -= lr * (m[k][i] / bc1) / (std::sqrt(v[k][i] / bc2) + 1e-8);
            }
        }
    }
};

} // namespace

TrainResult train_unet(const DatasetBundle& bundle, const TrainConfig& cfg, LossKind loss,
                       const Palette* palette) {
    if (cfg.batch < 1 || cfg.batch > cfg.max_batch)
        throw ContractError("batch size must be in [1, " + std::to_string(cfg.max_batch) + "]");
    if (cfg.epochs < 1) throw ContractError("at least one epoch required");
    if (cfg.patch_size % 8)
        throw ContractError("patch size must be divisible by 8 for three downsampling stages");
    const bool classification = loss != LossKind::l2;
    if (classification && !palette)
        throw ContractError("classification losses require a palette");
    if (cfg.variance_threshold > 0.0 && !palette)
        throw ContractError("the variance filter measures the quantized target and needs a palette");

    const PatchSplit split = split_patches(bundle, cfg.patch_size);

    QuantizedImage q;
    if (palette) q = quantize(bundle.photo, *palette);

    std::vector<PatchRegion> train;
    int filtered_out = 0;
    for (const auto& r : split.train) {
        if (cfg.variance_threshold > 0.0 &&
            patch_class_variance(q, r) < cfg.variance_threshold) {
            ++filtered_out;
            continue;
        }
        train.push_back(r);
    }
    if (train.empty()) throw ContractError("no patch passes the variance filter");
    if (split.val.empty()) throw ContractError("validation split is empty");

    UNetConfig net_cfg;
    net_cfg.mode = classification ? SimMode::classification : SimMode::regression;
    net_cfg.k_in = bundle.cad.layer_count;
    net_cfg.k_out = classification ? palette->size() : 3;
    net_cfg.widths = cfg.widths;

    const Rng root(cfg.seed);
    UNet net(net_cfg, root.fork(17).seed());

    auto params = net.parameters();
    Optimizer opt(cfg, params);

    const std::uint64_t phash = classification ? palette->hash() : 0;

    TrainResult result;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_for_epoch(cfg, epoch);

        std::vector<PatchRegion> order = train;
        Rng shuffle_rng = root.fork(1000 + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
            const std::size_t count = std::min<std::size_t>(cfg.batch, order.size() - first);
            Tensor x = cad_patch_tensor(bundle.cad, order, first, count);
            Tensor logits = net.forward(x, true);

            Tensor dlogits;
            double batch_loss;
            if (loss == LossKind::l2) {
                Tensor target = rgb_patch_tensor(bundle.photo, order, first, count);
                batch_loss = loss_l2_tanh(logits, target, dlogits);
            } else {
                std::vector<QuantizedImage> targets;
                targets.reserve(count);
                for (std::size_t s = 0; s < count; ++s)
                    targets.push_back(extract_patch(q, order[first + s]));
                batch_loss = loss == LossKind::cross_entropy
                                 ? loss_cross_entropy(logits, targets, dlogits)
                                 : loss_focal(logits, targets, cfg.focal_gamma, dlogits);
            }

            net.zero_grad();
            net.backward(dlogits);
            opt.step(params, lr);
            loss_sum += batch_loss * static_cast<double>(count);
            ++batches;
        }

        // validation in running-statistics mode
        std::vector<double> val_l2s, val_primaries;
        for (std::size_t first = 0; first < split.val.size(); first += cfg.batch) {
            const std::size_t count = std::min<std::size_t>(cfg.batch, split.val.size() - first);
            Tensor x = cad_patch_tensor(bundle.cad, split.val, first, count);
            Tensor logits = net.forward(x, false);
            for (std::size_t s = 0; s < count; ++s) {
                const PatchRegion& r = split.val[first + s];
                Tensor one = slice_sample(logits, static_cast<int>(s));
                const RasterImage sim = to_rgb(one, net_cfg.mode, palette);
                const RasterImage target = extract_patch(bundle.photo, r);
                val_l2s.push_back(l2(sim, target));
                if (loss == LossKind::l2) {
                    val_primaries.push_back(val_l2s.back());
                } else {
                    const QuantizedImage qt = extract_patch(q, r);
                    val_primaries.push_back(loss == LossKind::cross_entropy
                                                ? cross_entropy(one, qt)
                                                : focal(one, qt, cfg.focal_gamma));
                }
            }
        }
        const double val_l2 = pairwise_sum(val_l2s) / static_cast<double>(val_l2s.size());
        const double val_primary =
            pairwise_sum(val_primaries) / static_cast<double>(val_primaries.size());

        Checkpoint ckpt = make_checkpoint(net, loss, phash);
        ckpt.epoch = epoch;
        ckpt.lr = lr;
        ckpt.val_scores = {{"l2", val_l2}, {"primary", val_primary}};
        if (classification)
            ckpt.val_scores.emplace_back(to_string(loss), val_primary);
        result.checkpoints.push_back(std::move(ckpt));

        EpochStats st;
        st.epoch = epoch;
        st.lr = lr;
        st.train_loss = loss_sum / static_cast<double>(order.size());
        st.val_l2 = val_l2;
        st.val_primary = val_primary;
        st.batches = batches;
        st.train_patches = static_cast<int>(train.size());
        st.filtered_out = filtered_out;
        result.history.push_back(st);
    }
    return result;
}

const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints,
                              const std::string& metric) {
    if (checkpoints.empty()) throw ContractError("select_best on empty checkpoint list");
    const Checkpoint* best = nullptr;
    double best_score = std::numeric_limits<double>::infinity();
    for (const auto& c : checkpoints) {
        const double s = c.score(metric);
        if (s < best_score) { // strict: ties keep the earliest epoch
            best_score = s;
            best = &c;
        }
    }
    return *best;
}

double Checkpoint::score(const std::string& name) const {
    for (const auto& [k, v] : val_scores)
        if (k == name) return v;
    throw ContractError("checkpoint has no validation score '" + name + "'");
}

bool Checkpoint::has_score(const std::string& name) const {
    for (const auto& [k, v] : val_scores)
        if (k == name) return true;
    return false;
}

Checkpoint make_checkpoint(UNet& net, LossKind loss, std::uint64_t palette_hash) {
    Checkpoint c;
    c.mode = net.config().mode;
    c.loss = loss;
    c.k_in = net.config().k_in;
    c.k_out = net.config().k_out;
    c.widths = net.config().widths;
    c.palette_hash = palette_hash;
    auto snapshot = [&c](std::vector<ParamRef> refs) {
        for (const auto& p : refs) {
            NamedTensorF32 t;
            t.name = p.name;
            for (int d : p.shape) t.dims.push_back(static_cast<std::uint32_t>(d));
            t.data.reserve(p.value->size());
            for (double v : *p.value) t.data.push_back(static_cast<float>(v));
            c.tensors.push_back(std::move(t));
        }
    };
    snapshot(net.parameters());
    snapshot(net.buffers());
    return c;
}

UNet unet_from_checkpoint(const Checkpoint& ckpt) {
    UNetConfig cfg;
    cfg.mode = ckpt.mode;
    cfg.k_in = ckpt.k_in;
    cfg.k_out = ckpt.k_out;
    cfg.widths = ckpt.widths;
    UNet net(cfg, 0);
    auto restore = [&ckpt](std::vector<ParamRef> refs) {
        for (auto& p : refs) {
            const NamedTensorF32* found = nullptr;
            for (const auto& t : ckpt.tensors)
                if (t.name == p.name) {
                    found = &t;
                    break;
                }
            if (!found) throw IoError("checkpoint is missing tensor '" + p.name + "'");
            if (found->data.size() != p.value->size())
                throw IoError("checkpoint tensor '" + p.name + "' has wrong size");
            for (std::size_t i = 0; i < p.value->size(); ++i)
                (*p.value)[i] = static_cast<double>(found->data[i]);
        }
    };
    restore(net.parameters());
    restore(net.buffers());
    return net;
}

namespace {

int mirror_index(int i, int n) {
    // reflects out-of-range indices back into [0, n), bouncing at the edges
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

} // namespace

RasterImage infer(const Checkpoint& ckpt, const CadStack& cad, const Palette* palette, int tile,
                  int batch) {
    if (tile % 8) throw ContractError("tile size must be divisible by 8");
    if (batch < 1) throw ContractError("batch must be positive");
    if (cad.layer_count != ckpt.k_in)
        throw ContractError("model expects " + std::to_string(ckpt.k_in) + " CAD layers");
    if (ckpt.mode == SimMode::classification) {
        if (!palette) throw ContractError("classification inference needs a palette");
        if (ckpt.palette_hash != 0 && palette->hash() != ckpt.palette_hash)
            throw ContractError("palette does not match the one the model was trained with");
    }

    UNet net = unet_from_checkpoint(ckpt);

    const int ty = (cad.height + tile - 1) / tile;
    const int tx = (cad.width + tile - 1) / tile;
    std::vector<PatchRegion> tiles;
    for (int y = 0; y < ty; ++y)
        for (int x = 0; x < tx; ++x) tiles.push_back({x * tile, y * tile, tile, tile});

    RasterImage out(cad.height, cad.width);
    for (std::size_t first = 0; first < tiles.size(); first += batch) {
        const std::size_t count = std::min<std::size_t>(batch, tiles.size() - first);
        Tensor x(static_cast<int>(count), cad.layer_count, tile, tile);
        for (std::size_t s = 0; s < count; ++s) {
            const PatchRegion& r = tiles[first + s];
            double* dst = x.sample(static_cast<int>(s));
            for (int l = 0; l < cad.layer_count; ++l)
                for (int yy = 0; yy < tile; ++yy) {
                    const int sy = mirror_index(r.y0 + yy, cad.height);
                    for (int xx = 0; xx < tile; ++xx)
                        dst[(static_cast<std::size_t>(l) * tile + yy) * tile + xx] =
                            static_cast<double>(cad.at(l, sy, mirror_index(r.x0 + xx, cad.width)));
                }
        }
        Tensor logits = net.forward(x, false);
        for (std::size_t s = 0; s < count; ++s) {
            const PatchRegion& r = tiles[first + s];
            Tensor one = slice_sample(logits, static_cast<int>(s));
            const RasterImage rgb = to_rgb(one, ckpt.mode, palette);
            for (int yy = 0; yy < tile && r.y0 + yy < cad.height; ++yy)
                for (int xx = 0; xx < tile && r.x0 + xx < cad.width; ++xx)
                    for (int c = 0; c < 3; ++c)
                        out.at(r.y0 + yy, r.x0 + xx, c) = rgb.at(yy, xx, c);
        }
    }
    return out;
}

CheckpointRunner::CheckpointRunner(const Checkpoint& ckpt, const Palette* palette)
    : net_(unet_from_checkpoint(ckpt)), mode_(ckpt.mode), palette_(palette) {
    if (mode_ == SimMode::classification && !palette_)
        throw ContractError("classification inference needs a palette");
}

Tensor CheckpointRunner::logits(const CadStack& cad, const PatchRegion& region) {
    const CadStack patch = extract_patch(cad, region);
    Tensor x(1, patch.layer_count, patch.height, patch.width);
    for (std::size_t i = 0; i < patch.data.size(); ++i)
        x.v[i] = static_cast<double>(patch.data[i]);
    return net_.forward(x, false);
}

RasterImage CheckpointRunner::rgb(const CadStack& cad, const PatchRegion& region) {
    return to_rgb(logits(cad, region), mode_, palette_);
}

} // namespace goldendie
