#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "datn/commands.hpp"

namespace {

// Exit codes: 0 ok, 1 runtime/io failure, 2 config schema violation,
// 3 non-finite loss or gradient, 4 checkpoint mismatch, 5 infer input size
// not divisible by the network stride.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitInferSize = 5;

datn::RunConfig load_config(const std::string& path, bool seed_set, uint64_t seed,
                            const std::string& out_dir) {
    datn::RunConfig cfg;
    if (!path.empty()) cfg = datn::load_run_config(path);
    if (seed_set) cfg.apply_seed(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"datn: dynamic-attention small-target segmentation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    app.add_option("--config", config_path, "key=value run configuration file")
        ->envname("DATN_CONFIG");
    app.add_option("--seed", seed, "override the run seed")->each([&seed_set](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out", out_dir, "override paths.out_dir");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    int synth_count = 16;
    std::string synth_out;
    synth->add_option("--count", synth_count, "number of image/mask pairs")->required();
    synth->add_option("--dataset-out", synth_out, "dataset directory (default: out dir)");

    auto* train = app.add_subcommand("train", "train a network on a dataset");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_checkpoint, eval_data;
    int roc_thresholds = 50;
    bool macro = false;
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--roc-thresholds", roc_thresholds, "ROC threshold count");
    eval->add_flag("--macro", macro, "also report per-image macro averages");

    auto* infer = app.add_subcommand("infer", "run one image through a checkpoint");
    std::string infer_checkpoint, infer_in, infer_out;
    double threshold = 0.5;
    infer->add_option("--checkpoint", infer_checkpoint, "checkpoint file")->required();
    infer->add_option("--in", infer_in, "input P5 PGM image")->required();
    infer->add_option("--out-mask", infer_out, "output P5 PGM mask")->required();
    infer->add_option("--threshold", threshold, "binarization threshold");

    auto* ablate = app.add_subcommand("ablate", "train and compare module variants");
    std::string grid;
    int workers = 1;
    ablate->add_option("--grid", grid, "components, dilations or gfem")->required();
    ablate->add_option("--workers", workers, "parallel variant workers");

    CLI11_PARSE(app, argc, argv);

    try {
        datn::RunConfig cfg = load_config(config_path, seed_set, seed, out_dir);
        if (synth->parsed()) {
            std::string dir = synth_out.empty() ? cfg.out_dir : synth_out;
            datn::cmd_synth(cfg, dir, synth_count);
            std::cout << "wrote " << synth_count << " samples to " << dir << "\n";
        } else if (train->parsed()) {
            datn::TrainArtifacts artifacts = datn::cmd_train(cfg);
            std::printf("best_epoch=%d best_miou=%.9g final_miou=%.9g\n", artifacts.best_epoch,
                        artifacts.best_miou, artifacts.final_miou);
            std::cout << "checkpoints: " << artifacts.best_checkpoint << " (best), "
                      << artifacts.final_checkpoint << " (final)\n";
            std::cout << "log: " << artifacts.log_csv << "\n";
        } else if (eval->parsed()) {
            datn::EvalSummary s =
                datn::cmd_eval(cfg, eval_checkpoint, eval_data, cfg.out_dir, roc_thresholds, macro);
            std::printf("images=%zu miou=%.9g f1=%.9g pd=%.9g fa=%.9ge-6\n", s.images, s.miou,
                        s.f1, s.pd, s.fa * 1e6);
        } else if (infer->parsed()) {
            datn::cmd_infer(cfg, infer_checkpoint, infer_in, infer_out, threshold);
            std::cout << "wrote " << infer_out << "\n";
        } else if (ablate->parsed()) {
            std::string csv = (cfg.out_dir.empty() ? std::string(".") : cfg.out_dir) +
                              "/ablation_" + grid + ".csv";
            auto rows = datn::cmd_ablate(cfg, grid, csv, workers);
            for (const auto& r : rows) {
                std::printf("%-18s params=%lld miou=%.4f f1=%.4f pd=%.4f fa=%.3ge-6\n",
                            r.variant.c_str(), static_cast<long long>(r.params), r.miou, r.f1,
                            r.pd, r.fa_1e6);
            }
            std::cout << "table: " << csv << "\n";
        }
    } catch (const datn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const datn::NonFiniteError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNonFinite;
    } catch (const datn::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const datn::ShapeError& e) {
        if (infer->parsed()) {
            std::cerr << "input size error: " << e.what() << "\n";
            return kExitInferSize;
        }
        std::cerr << "shape error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
