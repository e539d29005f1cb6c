#pragma once

#include <functional>
#include <string>
#include <vector>

#include "datn/data.hpp"
#include "datn/network.hpp"
#include "datn/nn.hpp"
#include "datn/tensor.hpp"

namespace datn {

struct TrainConfig {
    double lr0 = 5e-4;
    double lr1 = 5e-5;
    double lr2 = 5e-6;
    int drop1_epoch = 200;
    int drop2_epoch = 300;
    int epochs = 400;
    int batch_size = 4;
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError naming the field
};

// Piecewise-constant schedule: lr0 before drop1_epoch, lr1 before drop2_epoch,
// lr2 after. Throws on epoch outside [0, epochs).
double lr_at(const TrainConfig& config, int epoch);

// 1 - (sum(p·g)+eps) / (sum(p)+sum(g)-sum(p·g)+eps) with eps = 1e-6, so a
// perfect match is exactly 0 and empty-vs-empty maps are well defined.
// Differentiable in p; g must be binary.
Tensor soft_iou_loss(const Tensor& pred, const Tensor& target);

// Bias-corrected Adam over a fixed parameter list.
class Adam {
public:
    explicit Adam(ParamList params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // Throws NonFiniteError naming the parameter on a non-finite gradient.
    void step(double lr);
    void zero_grad();
    int64_t step_count() const { return t_; }

private:
    ParamList params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double miou = 0.0;
    double f1 = 0.0;
    double pd = 0.0;
    double fa = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    int best_epoch = -1;
    double best_miou = 0.0;
    double final_miou = 0.0;
};

struct FitOptions {
    std::string best_checkpoint_path;   // written whenever val mIoU improves
    std::string final_checkpoint_path;  // written after the last epoch
    // Called after every epoch; return false to stop the loop.
    std::function<bool(const EpochRecord&)> on_epoch;
};

// Epoch loop: seeded shuffle, batched SoftIoU descent, per-epoch validation
// at threshold 0.5, best-mIoU checkpointing. Deterministic given
// (seed, config, data).
TrainResult fit(DATransNet& net, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& config,
                const FitOptions& options = {});

void write_log_csv(const std::vector<EpochRecord>& log, const std::string& path);

}  // namespace datn
