#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goldendie/dataset.hpp"
#include "goldendie/palette.hpp"
#include "goldendie/unet.hpp"

namespace goldendie {

enum class LossKind { l2, cross_entropy, focal };
enum class OptimizerKind { sgd, adam };

std::string to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

/// Training hyperparameters. The default path is plain SGD with a stepped
/// decay: the rate is multiplied by decay_factor after each epoch listed in
/// decay_epochs and held constant afterwards. The adam optimizer mode uses
/// adam_lr with the usual moment estimates instead of the schedule.
struct TrainConfig {
    int patch_size = 64;
    int batch = 32;
    int max_batch = 128;
    double variance_threshold = 0.0;
    double lr0 = 5e-3;
    double decay_factor = 0.6;
    std::vector<int> decay_epochs = {1, 3, 5, 8};
    int epochs = 10;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double adam_lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double focal_gamma = 2.0;
    std::array<int, 4> widths = {16, 32, 64, 128};
    std::uint64_t seed = 1;
};

/// Learning rate in effect during a 1-based epoch under the decay schedule.
double lr_for_epoch(const TrainConfig& cfg, int epoch);

struct NamedTensorF32 {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

/// Frozen snapshot of a model at an epoch boundary. Parameters are stored in
/// 32-bit floats (also the file representation), so saving and reloading a
/// checkpoint is lossless and inference from it is bit-reproducible.
struct Checkpoint {
    SimMode mode = SimMode::classification;
    LossKind loss = LossKind::cross_entropy;
    int k_in = 5;
    int k_out = 64;
    std::array<int, 4> widths = {16, 32, 64, 128};
    int epoch = 0;
    double lr = 0.0;
    std::vector<std::pair<std::string, double>> val_scores;
    std::uint64_t palette_hash = 0;
    std::vector<NamedTensorF32> tensors;

    double score(const std::string& name) const;
    bool has_score(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_l2 = 0.0;
    double val_primary = 0.0; // validation value of the training objective
    int batches = 0;
    int train_patches = 0;
    int filtered_out = 0;
};

struct TrainResult {
    std::vector<Checkpoint> checkpoints; // one per epoch
    std::vector<EpochStats> history;
};

/// Trains a U-Net on the bundle's train split. A palette is required for the
/// classification losses and whenever variance_threshold > 0 (the patch
/// filter measures variance of the quantized target).
TrainResult train_unet(const DatasetBundle& bundle, const TrainConfig& cfg, LossKind loss,
                       const Palette* palette);

/// Checkpoint with the lowest validation score under the given metric
/// ("l2" or "primary"); ties resolve to the earliest epoch.
const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints,
                              const std::string& metric = "l2");

/// Whole-stack simulation by tiling. Edge tiles are reflect-padded to the
/// tile grid and cropped after; results do not depend on how tiles are
/// grouped into batches. Normalization uses the stored running statistics.
RasterImage infer(const Checkpoint& ckpt, const CadStack& cad, const Palette* palette,
                  int tile = 256, int batch = 20);

/// Reusable inference handle for patchwise evaluation.
class CheckpointRunner {
public:
    CheckpointRunner(const Checkpoint& ckpt, const Palette* palette);

    Tensor logits(const CadStack& cad, const PatchRegion& region);
    RasterImage rgb(const CadStack& cad, const PatchRegion& region);
    SimMode mode() const { return mode_; }

private:
    UNet net_;
    SimMode mode_;
    const Palette* palette_;
};

/// Builds a double-precision network from a checkpoint's f32 tensors.
UNet unet_from_checkpoint(const Checkpoint& ckpt);

/// Snapshots the network (parameters and normalization statistics) to f32.
Checkpoint make_checkpoint(UNet& net, LossKind loss, std::uint64_t palette_hash);

} // namespace goldendie
