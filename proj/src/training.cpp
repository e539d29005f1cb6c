#include "datn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "datn/metrics.hpp"

namespace datn {

namespace {
constexpr double kIouEps = 1e-6;

Tensor binarize(const Tensor& prob, double threshold) {
    Tensor out = Tensor::zeros(prob.shape());
    for (int64_t i = 0; i < prob.numel(); ++i) {
        out.data()[i] = prob.data()[i] >= threshold ? 1.0 : 0.0;
    }
    return out;
}
}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1) {
        throw ConfigError("train.batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (lr0 <= 0.0 || lr1 <= 0.0 || lr2 <= 0.0) {
        throw ConfigError("train.lr0/lr1/lr2 must be positive");
    }
    if (!(drop1_epoch < drop2_epoch && drop2_epoch < epochs)) {
        if (drop1_epoch >= epochs || drop2_epoch >= epochs || drop1_epoch >= drop2_epoch) {
            throw ConfigError("train.drop1_epoch < train.drop2_epoch < train.epochs required, got " +
                              std::to_string(drop1_epoch) + ", " + std::to_string(drop2_epoch) +
                              ", " + std::to_string(epochs));
        }
    }
}

double lr_at(const TrainConfig& config, int epoch) {
    if (epoch < 0 || epoch >= config.epochs) {
        throw ValueError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(config.epochs) + ")");
    }
    if (epoch < config.drop1_epoch) return config.lr0;
    if (epoch < config.drop2_epoch) return config.lr1;
    return config.lr2;
}

Tensor soft_iou_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("soft_iou_loss shapes differ: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    for (int64_t i = 0; i < target.numel(); ++i) {
        double v = target.data()[i];
        if (v != 0.0 && v != 1.0) {
            throw ValueError("soft_iou_loss target must be binary");
        }
    }
    Tensor inter = sum(mul(pred, target));
    Tensor uni = sub(add(sum(pred), sum(target)), inter);
    Tensor frac = div(add_scalar(inter, kIouEps), add_scalar(uni, kIouEps));
    return add_scalar(scale(frac, -1.0), 1.0);
}

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        size_t n = static_cast<size_t>(params_[i].tensor.numel());
        m_[i].assign(n, 0.0);
        v_[i].assign(n, 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        Tensor& t = params_[p].tensor;
        double* w = t.data();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        int64_t n = t.numel();
        for (int64_t i = 0; i < n; ++i) {
            double g = t.grad_at(i);
            if (!std::isfinite(g)) {
                throw NonFiniteError("non-finite gradient in parameter '" + params_[p].name +
                                     "' at index " + std::to_string(i));
            }
            m[static_cast<size_t>(i)] = beta1_ * m[static_cast<size_t>(i)] + (1.0 - beta1_) * g;
            v[static_cast<size_t>(i)] =
                beta2_ * v[static_cast<size_t>(i)] + (1.0 - beta2_) * g * g;
            double mhat = m[static_cast<size_t>(i)] / bc1;
            double vhat = v[static_cast<size_t>(i)] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (NamedParam& p : params_) p.tensor.zero_grad();
}

TrainResult fit(DATransNet& net, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& config,
                const FitOptions& options) {
    config.validate();
    if (train_set.empty()) throw ValueError("fit: training set is empty");
    if (val_set.empty()) throw ValueError("fit: validation set is empty");

    Adam optimizer(net.parameters());
    Rng shuffle_rng(config.seed);
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = lr_at(config, epoch);

        // Fisher-Yates with the run RNG keeps batch order reproducible.
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            optimizer.zero_grad();
            Tape tape;
            Tensor batch_loss;
            for (size_t i = start; i < end; ++i) {
                const Sample& sample = train_set[order[i]];
                Tensor prob = net.forward(sample.image);
                Tensor loss = soft_iou_loss(prob, sample.mask);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
            double loss_value = batch_loss.value();
            if (!std::isfinite(loss_value)) {
                throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            tape.backward(batch_loss);
            optimizer.step(lr);
            epoch_loss += loss_value;
            ++batches;
        }

        PixelConfusion confusion;
        TargetMatchReport targets;
        for (const Sample& sample : val_set) {
            Tensor prob = net.forward(sample.image);
            Tensor pred = binarize(prob, 0.5);
            confusion.add(pred, sample.mask);
            targets.merge(target_metrics(pred, sample.mask));
        }
        PixelMetrics px = pixel_metrics(confusion);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss / static_cast<double>(batches);
        rec.lr = lr;
        rec.miou = px.miou;
        rec.f1 = px.f1;
        rec.pd = targets.pd();
        rec.fa = targets.fa();
        result.log.push_back(rec);
        result.final_miou = rec.miou;

        if (result.best_epoch < 0 || rec.miou > result.best_miou) {
            result.best_epoch = epoch;
            result.best_miou = rec.miou;
            if (!options.best_checkpoint_path.empty()) {
                net.save_checkpoint(options.best_checkpoint_path);
            }
        }
        if (options.on_epoch && !options.on_epoch(rec)) break;
    }

    if (!options.final_checkpoint_path.empty()) {
        net.save_checkpoint(options.final_checkpoint_path);
    }
    return result;
}

void write_log_csv(const std::vector<EpochRecord>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open log for writing: " + path);
    os << "epoch,loss,lr,miou,f1,pd,fa\n";
    char buf[256];
    for (const EpochRecord& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.loss,
                      r.lr, r.miou, r.f1, r.pd, r.fa);
        os << buf;
    }
    if (!os) throw IoError("failed writing log: " + path);
}

}  // namespace datn
