#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goldendie/dataset.hpp"
#include "goldendie/defectmap.hpp"
#include "goldendie/metrics.hpp"
#include "goldendie/synthgen.hpp"
#include "goldendie/train.hpp"
#include "goldendie/tree.hpp"

namespace goldendie {

// Command implementations behind the CLI. Each writes its outputs under the
// given directory and reports what it produced; orchestration stays testable
// without spawning processes.

struct GenOptions {
    SynthConfig synth;
    std::string name = "synthetic";
    std::filesystem::path out;
};

struct GenOutcome {
    std::filesystem::path manifest;
    SceneReport report;
};

GenOutcome cmd_gen(const GenOptions& opt);

struct QuantizeOptions {
    std::filesystem::path manifest;
    int k = 64;
    std::size_t sample_size = 1'000'000;
    std::uint64_t seed = 1;
};

struct QuantizeOutcome {
    std::filesystem::path palette_path;
    std::filesystem::path quantized_path;
    double reconstruction_l2 = 0.0;
    double order_cost = 0.0;
};

QuantizeOutcome cmd_quantize(const QuantizeOptions& opt);

struct TrainOptions {
    std::filesystem::path manifest;
    std::string model = "unet"; // "unet" or "tree"
    LossKind loss = LossKind::cross_entropy;
    TrainConfig tc;
    std::size_t tree_samples = 5'000'000;
    std::string select_metric = "l2"; // best-checkpoint criterion
    std::filesystem::path out;
};

struct TrainOutcome {
    std::filesystem::path model_path; // best checkpoint or tree model
    std::filesystem::path csv_path;
    int best_epoch = 0;
    double best_val_l2 = 0.0;
    double whole_wafer_l2 = 0.0; // tree only
};

TrainOutcome cmd_train(const TrainOptions& opt);

struct SimulateOptions {
    std::filesystem::path manifest;
    std::filesystem::path checkpoint; // .ckpt (U-Net) or .tree
    std::filesystem::path out;
    int tile = 256;
    int batch = 20;
};

std::filesystem::path cmd_simulate(const SimulateOptions& opt);

struct DetectOptions {
    std::filesystem::path manifest;
    std::filesystem::path simulation; // PPM; empty if checkpoint given
    std::filesystem::path checkpoint; // optional, used when simulation empty
    std::string metric = "l2";
    double threshold = 0.1;
    int window = 0; // > 0 switches to the sliding-window score
    int stride = 1;
    std::filesystem::path out;
};

struct DetectOutcome {
    std::filesystem::path scoremap, mask, heatmap, triptych;
    std::optional<std::filesystem::path> pr_csv;
    std::optional<double> average_precision;
};

DetectOutcome cmd_detect(const DetectOptions& opt);

struct EvalOptions {
    std::filesystem::path manifest;
    std::filesystem::path model_file; // .ckpt or .tree
    int patch = 64;
    std::filesystem::path out_csv;
};

struct EvalOutcome {
    std::filesystem::path csv;
    std::vector<MetricReport> reports;
    std::string model_label;
};

EvalOutcome cmd_eval(const EvalOptions& opt);

struct ReportOptions {
    std::vector<std::filesystem::path> inputs; // eval CSVs or directories
    std::filesystem::path out;
};

struct ReportOutcome {
    std::filesystem::path table;
    std::optional<std::filesystem::path> correlation;
    std::filesystem::path points;
    int models = 0;
};

ReportOutcome cmd_report(const ReportOptions& opt);

} // namespace goldendie
