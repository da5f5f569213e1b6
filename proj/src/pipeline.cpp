#include "goldendie/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "goldendie/pnm.hpp"

namespace goldendie {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

std::string epoch_filename(int epoch) {
    std::ostringstream os;
    os << "epoch_" << std::setw(3) << std::setfill('0') << epoch << ".ckpt";
    return os.str();
}

/// Loads the manifest's palette, fitting and persisting one when absent.
Palette ensure_palette(DatasetBundle& bundle, const fs::path& manifest_path) {
    if (bundle.manifest.palette) return Palette::load(bundle.root / *bundle.manifest.palette);
    Palette p = fit_palette(bundle.photo, 64, 1'000'000, bundle.manifest.split_seed);
    p.save(bundle.root / "palette.txt");
    bundle.manifest.palette = "palette.txt";
    bundle.manifest.save(manifest_path);
    return p;
}

bool is_tree_model(const fs::path& p) { return p.extension() == ".tree"; }

RasterImage compose_triptych(const RasterImage& target, const RasterImage& sim,
                             const BinaryMask& mask) {
    const int gap = 4;
    RasterImage out(target.height, target.width * 3 + gap * 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = 1.0;
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x)
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = target.at(y, x, c);
                out.at(y, x + target.width + gap, c) = sim.at(y, x, c);
                out.at(y, x + 2 * (target.width + gap), c) = mask.at(y, x) > 0 ? 1.0 : 0.0;
            }
    return out;
}

} // namespace

GenOutcome cmd_gen(const GenOptions& opt) {
    ensure_dir(opt.out);
    ensure_dir(opt.out / "layers");
    ensure_dir(opt.out / "labels");

    SynthResult r = generate(opt.synth);

    save_ppm(opt.out / "photo.ppm", r.photo);
    DatasetManifest m;
    m.name = opt.name;
    m.photo = "photo.ppm";
    for (int l = 0; l < r.cad.layer_count; ++l) {
        std::ostringstream os;
        os << "layers/layer_" << std::setw(2) << std::setfill('0') << l << ".pbm";
        m.layers.push_back(os.str());
        BinaryMask plane(r.cad.height, r.cad.width);
        const std::size_t n = plane.v.size();
        std::copy(r.cad.data.begin() + static_cast<std::ptrdiff_t>(l * n),
                  r.cad.data.begin() + static_cast<std::ptrdiff_t>((l + 1) * n), plane.v.begin());
        save_bitmask(opt.out / os.str(), plane);
    }
    save_bitmask(opt.out / "labels/mask.pbm", r.labels.mask);
    m.labels = "labels/mask.pbm";
    for (const auto& [cls, mask] : r.labels.per_class) {
        const std::string rel = "labels/" + cls + ".pbm";
        save_bitmask(opt.out / rel, mask);
        m.label_classes.emplace_back(cls, rel);
    }
    m.split_seed = opt.synth.seed;
    m.split_fraction = 0.7;
    m.save(opt.out / "manifest.json");

    std::ofstream report(opt.out / "report.txt");
    report << r.report.to_string();

    return {opt.out / "manifest.json", r.report};
}

QuantizeOutcome cmd_quantize(const QuantizeOptions& opt) {
    DatasetBundle bundle = load_dataset(opt.manifest);
    Palette p = fit_palette(bundle.photo, opt.k, opt.sample_size, opt.seed);
    const fs::path palette_path = bundle.root / "palette.txt";
    p.save(palette_path);

    QuantizedImage q = quantize(bundle.photo, p);
    const fs::path q_path = bundle.root / "quantized.pgm";
    save_pgm8(q_path, q);

    bundle.manifest.palette = "palette.txt";
    bundle.manifest.save(opt.manifest);

    QuantizeOutcome out;
    out.palette_path = palette_path;
    out.quantized_path = q_path;
    out.reconstruction_l2 = l2(reconstruct(q, p), bundle.photo);
    out.order_cost = p.order_cost;
    return out;
}

TrainOutcome cmd_train(const TrainOptions& opt) {
    DatasetBundle bundle = load_dataset(opt.manifest);
    Palette palette = ensure_palette(bundle, opt.manifest);
    ensure_dir(opt.out);

    TrainOutcome out;
    if (opt.model == "tree") {
        const QuantizedImage q = quantize(bundle.photo, palette);
        const TreeModel tree = train_tree(bundle.cad, q, opt.tree_samples, opt.tc.seed);
        out.model_path = opt.out / "tree.tree";
        tree.save(out.model_path);

        out.whole_wafer_l2 = l2(predict_tree(tree, bundle.cad, palette), bundle.photo);
        out.csv_path = opt.out / "training.csv";
        std::ofstream csv(out.csv_path);
        csv << "model,whole_wafer_l2,samples,seed\n";
        csv << "tree," << std::setprecision(12) << out.whole_wafer_l2 << "," << opt.tree_samples
            << "," << opt.tc.seed << "\n";
        std::ofstream best(opt.out / "best.txt");
        best << "tree.tree\n";
        return out;
    }
    if (opt.model != "unet") throw ConfigError("unknown model '" + opt.model + "'");

    const TrainResult result = train_unet(bundle, opt.tc, opt.loss, &palette);

    out.csv_path = opt.out / "training.csv";
    std::ofstream csv(out.csv_path);
    csv << "epoch,lr,train_loss,val_l2,val_primary\n";
    for (const auto& st : result.history) {
        csv << st.epoch << "," << std::setprecision(17) << st.lr << ","
            << std::setprecision(12) << st.train_loss << "," << st.val_l2 << ","
            << st.val_primary << "\n";
    }
    for (const auto& c : result.checkpoints) c.save(opt.out / epoch_filename(c.epoch));

    const Checkpoint& best = select_best(result.checkpoints, opt.select_metric);
    out.best_epoch = best.epoch;
    out.best_val_l2 = best.score("l2");
    out.model_path = opt.out / epoch_filename(best.epoch);
    std::ofstream marker(opt.out / "best.txt");
    marker << epoch_filename(best.epoch) << "\n";
    return out;
}

std::filesystem::path cmd_simulate(const SimulateOptions& opt) {
    DatasetBundle bundle = load_dataset(opt.manifest);
    RasterImage sim;
    if (is_tree_model(opt.checkpoint)) {
        Palette palette = ensure_palette(bundle, opt.manifest);
        sim = predict_tree(TreeModel::load(opt.checkpoint), bundle.cad, palette);
    } else {
        const Checkpoint ckpt = Checkpoint::load(opt.checkpoint);
        std::optional<Palette> palette;
        if (ckpt.mode == SimMode::classification) palette = ensure_palette(bundle, opt.manifest);
        sim = infer(ckpt, bundle.cad, palette ? &*palette : nullptr, opt.tile, opt.batch);
    }
    ensure_dir(opt.out);
    const fs::path path = opt.out / "sim.ppm";
    save_ppm(path, sim);
    return path;
}

DetectOutcome cmd_detect(const DetectOptions& opt) {
    DatasetBundle bundle = load_dataset(opt.manifest);

    RasterImage sim;
    if (!opt.simulation.empty()) {
        sim = load_ppm(opt.simulation);
    } else if (!opt.checkpoint.empty()) {
        SimulateOptions s;
        s.manifest = opt.manifest;
        s.checkpoint = opt.checkpoint;
        s.out = opt.out;
        sim = load_ppm(cmd_simulate(s));
    } else {
        throw ConfigError("detect needs either a simulation image or a checkpoint");
    }

    const ScoreMap map = opt.window > 0
                             ? score_windowed(bundle.photo, sim, opt.metric, opt.window, opt.stride)
                             : score_pixelwise(bundle.photo, sim, opt.metric);
    const BinaryMask mask = binarize(map, opt.threshold);

    ensure_dir(opt.out);
    DetectOutcome out;
    out.scoremap = opt.out / "scoremap.pgm";
    save_scoremap(out.scoremap, map);
    out.mask = opt.out / "mask.pbm";
    save_bitmask(out.mask, mask);
    out.heatmap = opt.out / "heatmap.ppm";
    save_ppm(out.heatmap, heatmap(map));
    out.triptych = opt.out / "triptych.ppm";
    save_ppm(out.triptych, compose_triptych(bundle.photo, sim, mask));

    if (bundle.labels && bundle.labels->mask.positive_count() > 0) {
        const PRResult pr = average_precision(map, bundle.labels->mask);
        out.average_precision = pr.average_precision;
        out.pr_csv = opt.out / "pr.csv";
        std::ofstream csv(*out.pr_csv);
        csv << "# average_precision," << std::setprecision(12) << pr.average_precision << "\n";
        csv << "threshold,precision,recall\n";
        for (std::size_t i = 0; i < pr.thresholds.size(); ++i)
            csv << std::setprecision(12) << pr.thresholds[i] << "," << pr.precision[i] << ","
                << pr.recall[i] << "\n";
    }
    return out;
}

EvalOutcome cmd_eval(const EvalOptions& opt) {
    DatasetBundle bundle = load_dataset(opt.manifest);
    Palette palette = ensure_palette(bundle, opt.manifest);
    const PatchSplit split = split_patches(bundle, opt.patch);
    if (split.val.empty()) throw ContractError("no validation patches at this patch size");

    const QuantizedImage target_q = quantize(bundle.photo, palette);

    EvalOutcome out;
    std::string loss_label = "-";
    int epoch = 0;

    std::vector<double> v_l1, v_l2, v_psnr, v_ssim, v_ce, v_focal, v_koff;
    const bool tree = is_tree_model(opt.model_file);
    if (tree) {
        out.model_label = "tree";
        const TreeModel model = TreeModel::load(opt.model_file);
        const QuantizedImage pred_q = tree_class_map(model, bundle.cad);
        const RasterImage sim = reconstruct(pred_q, palette);
        for (const auto& r : split.val) {
            const RasterImage sp = extract_patch(sim, r);
            const RasterImage tp = extract_patch(bundle.photo, r);
            v_l1.push_back(l1(sp, tp));
            v_l2.push_back(l2(sp, tp));
            v_psnr.push_back(psnr(sp, tp));
            v_ssim.push_back(ssim(sp, tp));
            v_koff.push_back(k_off_accuracy(extract_patch(pred_q, r), extract_patch(target_q, r),
                                            2, true, palette.size()));
        }
    } else {
        out.model_label = "unet";
        const Checkpoint ckpt = Checkpoint::load(opt.model_file);
        loss_label = to_string(ckpt.loss);
        epoch = ckpt.epoch;
        const bool classification = ckpt.mode == SimMode::classification;
        CheckpointRunner runner(ckpt, classification ? &palette : nullptr);
        for (const auto& r : split.val) {
            const Tensor logits = runner.logits(bundle.cad, r);
            const RasterImage sp = to_rgb(logits, ckpt.mode, classification ? &palette : nullptr);
            const RasterImage tp = extract_patch(bundle.photo, r);
            v_l1.push_back(l1(sp, tp));
            v_l2.push_back(l2(sp, tp));
            v_psnr.push_back(psnr(sp, tp));
            v_ssim.push_back(ssim(sp, tp));
            if (classification) {
                const QuantizedImage qt = extract_patch(target_q, r);
                v_ce.push_back(cross_entropy(logits, qt));
                v_focal.push_back(focal(logits, qt));
                QuantizedImage pred_q(logits.h, logits.w);
                const std::size_t plane = logits.plane();
                for (std::size_t p = 0; p < plane; ++p) {
                    int best = 0;
                    for (int c = 1; c < logits.c; ++c)
                        if (logits.v[c * plane + p] > logits.v[best * plane + p]) best = c;
                    pred_q.data[p] = static_cast<std::uint8_t>(best);
                }
                v_koff.push_back(k_off_accuracy(pred_q, qt, 2, true, palette.size()));
            }
        }
    }

    out.reports.push_back(aggregate("l1", std::move(v_l1), false));
    out.reports.push_back(aggregate("l2", std::move(v_l2), false));
    out.reports.push_back(aggregate("psnr", std::move(v_psnr), true));
    out.reports.push_back(aggregate("ssim", std::move(v_ssim), true));
    if (!v_ce.empty()) {
        out.reports.push_back(aggregate("cross_entropy", std::move(v_ce), false));
        out.reports.push_back(aggregate("focal", std::move(v_focal), false));
    }
    if (!v_koff.empty()) out.reports.push_back(aggregate("k_off", std::move(v_koff), true));

    ensure_dir(opt.out_csv.parent_path());
    std::ofstream csv(opt.out_csv);
    if (!csv) throw IoError("cannot write " + opt.out_csv.string());
    csv << "dataset,model,loss,epoch,metric,mean,sd,n_patches\n";
    for (const auto& rep : out.reports) {
        csv << bundle.manifest.name << "," << out.model_label << "," << loss_label << "," << epoch
            << "," << rep.metric << "," << std::setprecision(12) << rep.mean << "," << rep.sd
            << "," << (rep.values.size() - rep.excluded) << "\n";
    }
    out.csv = opt.out_csv;
    return out;
}

namespace {

struct EvalRow {
    std::string dataset, model, loss, metric;
    int epoch = 0;
    double mean = 0.0, sd = 0.0;
    long n = 0;
};

std::vector<EvalRow> read_eval_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<EvalRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("dataset,", 0) == 0) continue;
        }
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 8)
            throw IoError("malformed evaluation row in " + path.string() + ": " + line);
        EvalRow r;
        r.dataset = fields[0];
        r.model = fields[1];
        r.loss = fields[2];
        r.epoch = std::stoi(fields[3]);
        r.metric = fields[4];
        r.mean = std::stod(fields[5]);
        r.sd = std::stod(fields[6]);
        r.n = std::stol(fields[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace

ReportOutcome cmd_report(const ReportOptions& opt) {
    std::vector<fs::path> files;
    for (const auto& input : opt.inputs) {
        if (fs::is_directory(input)) {
            for (const auto& e : fs::directory_iterator(input))
                if (e.path().extension() == ".csv") files.push_back(e.path());
        } else {
            files.push_back(input);
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<EvalRow> rows;
    for (const auto& f : files)
        for (auto& r : read_eval_csv(f)) rows.push_back(std::move(r));
    if (rows.empty()) throw ContractError("no evaluations found");

    ensure_dir(opt.out);
    ReportOutcome out;
    out.table = opt.out / "metrics_table.csv";
    {
        std::ofstream csv(out.table);
        csv << "dataset,model,loss,epoch,metric,mean,sd,n_patches\n";
        for (const auto& r : rows)
            csv << r.dataset << "," << r.model << "," << r.loss << "," << r.epoch << ","
                << r.metric << "," << std::setprecision(12) << r.mean << "," << r.sd << "," << r.n
                << "\n";
    }

    // one point per (model id, metric); models are dataset/model/loss/epoch
    std::map<std::string, std::map<std::string, double>> by_model;
    for (const auto& r : rows) {
        const std::string id =
            r.dataset + "/" + r.model + "/" + r.loss + "/e" + std::to_string(r.epoch);
        by_model[id][r.metric] = r.mean;
    }
    out.models = static_cast<int>(by_model.size());

    out.points = opt.out / "points.csv";
    {
        std::ofstream csv(out.points);
        csv << "model,metric,value\n";
        for (const auto& [id, metrics] : by_model)
            for (const auto& [metric, value] : metrics)
                csv << id << "," << metric << "," << std::setprecision(12) << value << "\n";
    }

    if (by_model.size() >= 2) {
        // metrics present for every model
        std::set<std::string> common;
        bool first = true;
        for (const auto& [id, metrics] : by_model) {
            std::set<std::string> here;
            for (const auto& [m, _] : metrics) here.insert(m);
            if (first) {
                common = here;
                first = false;
            } else {
                std::set<std::string> inter;
                std::set_intersection(common.begin(), common.end(), here.begin(), here.end(),
                                      std::inserter(inter, inter.begin()));
                common = inter;
            }
        }
        if (common.size() >= 2) {
            std::vector<std::string> names(common.begin(), common.end());
            std::vector<std::vector<double>> series(names.size());
            for (std::size_t m = 0; m < names.size(); ++m)
                for (const auto& [id, metrics] : by_model)
                    series[m].push_back(metrics.at(names[m]));
            const CorrelationTable table = correlate(names, series);

            out.correlation = opt.out / "correlation.csv";
            std::ofstream csv(*out.correlation);
            // Pearson above the diagonal, Spearman's rank correlation below
            csv << "metric";
            for (const auto& n : names) csv << "," << n;
            csv << "\n";
            for (std::size_t i = 0; i < names.size(); ++i) {
                csv << names[i];
                for (std::size_t j = 0; j < names.size(); ++j) {
                    double v;
                    if (i == j)
                        v = 1.0;
                    else if (i < j)
                        v = table.pearson[i][j];
                    else
                        v = table.spearman[i][j];
                    csv << "," << std::setprecision(12) << v;
                }
                csv << "\n";
            }
        }
    }
    return out;
}

} // namespace goldendie
