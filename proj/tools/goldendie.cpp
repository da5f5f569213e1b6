// goldendie: simulate defect-free wafer images from CAD layer stacks and use
// them for template-matching defect detection.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "goldendie/pipeline.hpp"

namespace fs = std::filesystem;
using namespace goldendie;

namespace {

// Flat sectioned key=value config. CLI flags override file values.
struct IniFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static IniFile parse(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path.string());
        IniFile ini;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected key=value");
            const std::string key = trim(line.substr(0, eq));
            if (section.empty())
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": key '" + key + "' outside any section");
            ini.sections[section][key] = trim(line.substr(eq + 1));
        }
        return ini;
    }
};

struct ConfigBinding {
    std::string section, key;
    CLI::Option* option;
    std::function<void(const std::string&)> set;
};

class ConfigMap {
public:
    template <typename T>
    void bind(const std::string& section, const std::string& key, CLI::Option* opt, T& var) {
        bindings_.push_back({section, key, opt, [&var](const std::string& s) {
                                 if constexpr (std::is_same_v<T, std::string>)
                                     var = s;
                                 else if constexpr (std::is_same_v<T, fs::path>)
                                     var = fs::path(s);
                                 else if constexpr (std::is_same_v<T, double>)
                                     var = std::stod(s);
                                 else if constexpr (std::is_same_v<T, std::uint64_t>)
                                     var = std::stoull(s);
                                 else if constexpr (std::is_same_v<T, std::size_t>)
                                     var = static_cast<std::size_t>(std::stoull(s));
                                 else
                                     var = static_cast<T>(std::stoll(s));
                             }});
    }

    /// Fills every bound variable whose flag was not given on the command
    /// line; rejects keys that bind to nothing.
    void apply(const IniFile& ini) const {
        std::set<std::pair<std::string, std::string>> known;
        for (const auto& b : bindings_) known.insert({b.section, b.key});
        for (const auto& [section, kv] : ini.sections)
            for (const auto& [key, value] : kv) {
                if (!known.count({section, key}))
                    throw ConfigError("unknown config key [" + section + "] " + key);
                (void)value;
            }
        for (const auto& b : bindings_) {
            if (b.option && b.option->count() > 0) continue; // flags win
            const auto sec = ini.sections.find(b.section);
            if (sec == ini.sections.end()) continue;
            const auto kv = sec->second.find(b.key);
            if (kv == sec->second.end()) continue;
            try {
                b.set(kv->second);
            } catch (const std::exception&) {
                throw ConfigError("bad value for [" + b.section + "] " + b.key + ": '" +
                                  kv->second + "'");
            }
        }
    }

private:
    std::vector<ConfigBinding> bindings_;
};

fs::path default_out_root() {
    if (const char* env = std::getenv("GOLDENDIE_OUT")) return fs::path(env);
    return fs::path(".");
}

int run(int argc, char** argv) {
    CLI::App app{"golden-die wafer simulation and defect detection"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    fs::path out_root = default_out_root();
    int threads = 0;
    app.add_option("--config", config_path, "sectioned key=value config file");
    auto* seed_opt = app.add_option("--seed", seed, "global random seed");
    app.add_option("--out", out_root, "output root directory");
    app.add_option("--threads", threads, "worker cap; 1 forces the sequential path");

    ConfigMap cfg;

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic wafer dataset");
    GenOptions gen_opt;
    cfg.bind("synth", "size", gen->add_option("--size", gen_opt.synth.size), gen_opt.synth.size);
    auto* gen_seed = gen->add_option("--gen-seed", gen_opt.synth.seed, "dataset seed");
    cfg.bind("synth", "seed", gen_seed, gen_opt.synth.seed);
    cfg.bind("synth", "rate_dust", gen->add_option("--rate-dust", gen_opt.synth.rate_dust),
             gen_opt.synth.rate_dust);
    cfg.bind("synth", "rate_nitride",
             gen->add_option("--rate-nitride", gen_opt.synth.rate_nitride),
             gen_opt.synth.rate_nitride);
    cfg.bind("synth", "rate_resist", gen->add_option("--rate-resist", gen_opt.synth.rate_resist),
             gen_opt.synth.rate_resist);
    cfg.bind("synth", "letter_defect_fraction",
             gen->add_option("--letter-fraction", gen_opt.synth.letter_defect_fraction),
             gen_opt.synth.letter_defect_fraction);
    cfg.bind("synth", "noise_sigma", gen->add_option("--noise-sigma", gen_opt.synth.noise_sigma),
             gen_opt.synth.noise_sigma);
    cfg.bind("synth", "misalignment_px",
             gen->add_option("--misalignment", gen_opt.synth.misalignment_px),
             gen_opt.synth.misalignment_px);
    cfg.bind("synth", "name", gen->add_option("--name", gen_opt.name), gen_opt.name);

    // quantize
    auto* quant = app.add_subcommand("quantize", "fit the color palette and quantize the photo");
    QuantizeOptions q_opt;
    quant->add_option("--data", q_opt.manifest, "dataset manifest")->required();
    cfg.bind("palette", "k", quant->add_option("--k", q_opt.k), q_opt.k);
    cfg.bind("palette", "sample_size", quant->add_option("--sample-size", q_opt.sample_size),
             q_opt.sample_size);
    auto* q_seed = quant->add_option("--fit-seed", q_opt.seed, "sampling seed");
    cfg.bind("palette", "seed", q_seed, q_opt.seed);

    // train
    auto* train = app.add_subcommand("train", "train a simulator on a dataset");
    TrainOptions t_opt;
    std::string loss_name = "cross_entropy";
    std::string optimizer_name = "sgd";
    std::string run_name;
    train->add_option("--data", t_opt.manifest, "dataset manifest")->required();
    cfg.bind("train", "model", train->add_option("--model", t_opt.model), t_opt.model);
    cfg.bind("train", "loss", train->add_option("--loss", loss_name), loss_name);
    cfg.bind("train", "epochs", train->add_option("--epochs", t_opt.tc.epochs), t_opt.tc.epochs);
    cfg.bind("train", "batch", train->add_option("--batch", t_opt.tc.batch), t_opt.tc.batch);
    cfg.bind("train", "patch_size", train->add_option("--patch", t_opt.tc.patch_size),
             t_opt.tc.patch_size);
    cfg.bind("train", "lr0", train->add_option("--lr0", t_opt.tc.lr0), t_opt.tc.lr0);
    cfg.bind("train", "variance_threshold",
             train->add_option("--variance-threshold", t_opt.tc.variance_threshold),
             t_opt.tc.variance_threshold);
    cfg.bind("train", "optimizer", train->add_option("--optimizer", optimizer_name),
             optimizer_name);
    cfg.bind("train", "gamma", train->add_option("--gamma", t_opt.tc.focal_gamma),
             t_opt.tc.focal_gamma);
    cfg.bind("train", "tree_samples", train->add_option("--tree-samples", t_opt.tree_samples),
             t_opt.tree_samples);
    cfg.bind("train", "select", train->add_option("--select", t_opt.select_metric),
             t_opt.select_metric);
    cfg.bind("train", "run", train->add_option("--run", run_name), run_name);
    auto* t_seed = train->add_option("--train-seed", t_opt.tc.seed, "training seed");
    cfg.bind("train", "seed", t_seed, t_opt.tc.seed);

    // simulate
    auto* sim = app.add_subcommand("simulate", "render the full-wafer simulation");
    SimulateOptions s_opt;
    sim->add_option("--data", s_opt.manifest, "dataset manifest")->required();
    sim->add_option("--checkpoint", s_opt.checkpoint, "model file (.ckpt or .tree)")->required();
    sim->add_option("--tile", s_opt.tile);
    sim->add_option("--batch", s_opt.batch);

    // detect
    auto* detect = app.add_subcommand("detect", "score, binarize and evaluate defects");
    DetectOptions d_opt;
    detect->add_option("--data", d_opt.manifest, "dataset manifest")->required();
    detect->add_option("--simulation", d_opt.simulation, "simulation image (PPM)");
    detect->add_option("--checkpoint", d_opt.checkpoint, "model file to simulate with");
    cfg.bind("detect", "metric", detect->add_option("--metric", d_opt.metric), d_opt.metric);
    cfg.bind("detect", "threshold", detect->add_option("--threshold", d_opt.threshold),
             d_opt.threshold);
    cfg.bind("detect", "window", detect->add_option("--window", d_opt.window), d_opt.window);
    cfg.bind("detect", "stride", detect->add_option("--stride", d_opt.stride), d_opt.stride);

    // eval
    auto* eval = app.add_subcommand("eval", "patchwise metric suite on the validation split");
    EvalOptions e_opt;
    eval->add_option("--data", e_opt.manifest, "dataset manifest")->required();
    eval->add_option("--model-file", e_opt.model_file, "model file (.ckpt or .tree)")->required();
    eval->add_option("--patch", e_opt.patch);
    eval->add_option("--out-csv", e_opt.out_csv);

    // report
    auto* report = app.add_subcommand("report", "aggregate evaluations into tables");
    ReportOptions r_opt;
    report->add_option("--inputs", r_opt.inputs, "evaluation CSVs or directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (!config_path.empty()) cfg.apply(IniFile::parse(config_path));
    if (threads > 0) {
#ifdef _OPENMP
        omp_set_num_threads(threads);
#endif
    }

    if (gen->parsed()) {
        if (gen_seed->count() == 0 && seed_opt->count() > 0) gen_opt.synth.seed = seed;
        gen_opt.out = out_root / gen_opt.name;
        const GenOutcome r = cmd_gen(gen_opt);
        std::cout << "dataset written to " << r.manifest.parent_path().string() << "\n"
                  << r.report.to_string();
    } else if (quant->parsed()) {
        if (q_seed->count() == 0 && seed_opt->count() > 0) q_opt.seed = seed;
        const QuantizeOutcome r = cmd_quantize(q_opt);
        std::cout << "palette " << r.palette_path.string() << " (order cost " << r.order_cost
                  << ")\nquantized " << r.quantized_path.string() << "\nreconstruction l2 "
                  << r.reconstruction_l2 << "\n";
    } else if (train->parsed()) {
        t_opt.loss = loss_from_string(loss_name);
        if (optimizer_name == "sgd")
            t_opt.tc.optimizer = OptimizerKind::sgd;
        else if (optimizer_name == "adam")
            t_opt.tc.optimizer = OptimizerKind::adam;
        else
            throw ConfigError("unknown optimizer '" + optimizer_name + "'");
        if (t_seed->count() == 0 && seed_opt->count() > 0) t_opt.tc.seed = seed;
        if (run_name.empty()) run_name = t_opt.model + "_" + loss_name;
        t_opt.out = out_root / run_name;
        const TrainOutcome r = cmd_train(t_opt);
        if (t_opt.model == "tree")
            std::cout << "tree model " << r.model_path.string() << "\nwhole-wafer l2 "
                      << r.whole_wafer_l2 << "\n";
        else
            std::cout << "best checkpoint " << r.model_path.string() << " (epoch " << r.best_epoch
                      << ", val l2 " << r.best_val_l2 << ")\n";
        std::cout << "history " << r.csv_path.string() << "\n";
    } else if (sim->parsed()) {
        s_opt.out = out_root / "sim";
        std::cout << "simulation " << cmd_simulate(s_opt).string() << "\n";
    } else if (detect->parsed()) {
        d_opt.out = out_root / "detect";
        const DetectOutcome r = cmd_detect(d_opt);
        std::cout << "score map " << r.scoremap.string() << "\nmask " << r.mask.string()
                  << "\ntriptych " << r.triptych.string() << "\n";
        if (r.average_precision)
            std::cout << "average precision " << *r.average_precision << "\n";
        else
            std::cout << "average precision skipped (no labels)\n";
    } else if (eval->parsed()) {
        if (e_opt.out_csv.empty()) e_opt.out_csv = out_root / "eval" / "eval.csv";
        const EvalOutcome r = cmd_eval(e_opt);
        std::cout << "evaluation " << r.csv.string() << " (" << r.model_label << ")\n";
        for (const auto& rep : r.reports)
            std::cout << "  " << rep.metric << " " << rep.mean << " (" << rep.sd << ")\n";
    } else if (report->parsed()) {
        r_opt.out = out_root / "report";
        const ReportOutcome r = cmd_report(r_opt);
        std::cout << "table " << r.table.string() << "\npoints " << r.points.string() << "\n";
        if (r.correlation) std::cout << "correlation " << r.correlation->string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
}
