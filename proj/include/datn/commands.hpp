#pragma once

#include <string>
#include <vector>

#include "datn/run_config.hpp"

namespace datn {

// Subcommand bodies behind the CLI; each throws typed errors that the entry
// point maps to exit codes.

void cmd_synth(const RunConfig& config, const std::string& out_dir, int count);

struct TrainArtifacts {
    std::string best_checkpoint;
    std::string final_checkpoint;
    std::string log_csv;
    int best_epoch = -1;
    double best_miou = 0.0;
    double final_miou = 0.0;
};
TrainArtifacts cmd_train(const RunConfig& config);

struct EvalSummary {
    double miou = 0.0, f1 = 0.0, precision = 0.0, recall = 0.0, pd = 0.0, fa = 0.0;
    double macro_miou = 0.0, macro_f1 = 0.0;
    size_t images = 0;
};
EvalSummary cmd_eval(const RunConfig& config, const std::string& checkpoint,
                     const std::string& dataset_dir, const std::string& out_dir,
                     int roc_thresholds, bool macro);

void cmd_infer(const RunConfig& config, const std::string& checkpoint,
               const std::string& input_pgm, const std::string& output_pgm, double threshold);

struct AblationRow {
    std::string variant;
    int64_t params = 0;
    double miou = 0.0, f1 = 0.0, pd = 0.0, fa_1e6 = 0.0;
    // Full-scale reference results for context; empty string when unpublished.
    std::string ref_params, ref_miou, ref_f1, ref_pd, ref_fa_1e6;
};
std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::string& grid,
                                    const std::string& out_csv, int workers);

}  // namespace datn
