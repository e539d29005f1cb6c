#include "datn/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "datn/metrics.hpp"

namespace fs = std::filesystem;

namespace datn {

namespace {

Tensor binarize(const Tensor& prob, double threshold) {
    Tensor out = Tensor::zeros(prob.shape());
    for (int64_t i = 0; i < prob.numel(); ++i) {
        out.data()[i] = prob.data()[i] >= threshold ? 1.0 : 0.0;
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

void cmd_synth(const RunConfig& config, const std::string& out_dir, int count) {
    if (count < 0) throw ConfigError("synth count must be >= 0");
    config.data.validate();
    write_dataset_dir(out_dir, config.data, count);
}

TrainArtifacts cmd_train(const RunConfig& config) {
    config.validate();
    if (config.train_dir.empty() || config.val_dir.empty()) {
        throw ConfigError("paths.train_dir and paths.val_dir are required for train");
    }
    std::vector<Sample> train_set = load_dataset_dir(config.train_dir);
    std::vector<Sample> val_set = load_dataset_dir(config.val_dir);

    fs::create_directories(config.out_dir);
    TrainArtifacts artifacts;
    artifacts.best_checkpoint = (fs::path(config.out_dir) / "best.datn").string();
    artifacts.final_checkpoint = (fs::path(config.out_dir) / "final.datn").string();
    artifacts.log_csv = (fs::path(config.out_dir) / "log.csv").string();

    DATransNet net(config.net);
    FitOptions options;
    options.best_checkpoint_path = artifacts.best_checkpoint;
    options.final_checkpoint_path = artifacts.final_checkpoint;
    TrainResult result = fit(net, train_set, val_set, config.train, options);
    write_log_csv(result.log, artifacts.log_csv);

    artifacts.best_epoch = result.best_epoch;
    artifacts.best_miou = result.best_miou;
    artifacts.final_miou = result.final_miou;
    return artifacts;
}

EvalSummary cmd_eval(const RunConfig& config, const std::string& checkpoint,
                     const std::string& dataset_dir, const std::string& out_dir,
                     int roc_thresholds, bool macro) {
    config.net.validate();
    DATransNet net(config.net);
    net.load_checkpoint(checkpoint);

    std::vector<Sample> samples = load_dataset_dir(dataset_dir);
    if (samples.empty()) throw IoError("eval dataset is empty: " + dataset_dir);

    std::vector<Tensor> probs, masks;
    probs.reserve(samples.size());
    masks.reserve(samples.size());
    PixelConfusion confusion;
    TargetMatchReport targets;
    double macro_miou = 0.0, macro_f1 = 0.0;
    for (const Sample& s : samples) {
        Tensor prob = net.forward(s.image);
        Tensor pred = binarize(prob, 0.5);
        PixelConfusion per_image;
        per_image.add(pred, s.mask);
        confusion.merge(per_image);
        targets.merge(target_metrics(pred, s.mask));
        PixelMetrics pm = pixel_metrics(per_image);
        macro_miou += pm.miou;
        macro_f1 += pm.f1;
        probs.push_back(prob);
        masks.push_back(s.mask);
    }

    PixelMetrics px = pixel_metrics(confusion);
    EvalSummary summary;
    summary.miou = px.miou;
    summary.f1 = px.f1;
    summary.precision = px.precision;
    summary.recall = px.recall;
    summary.pd = targets.pd();
    summary.fa = targets.fa();
    summary.macro_miou = macro_miou / static_cast<double>(samples.size());
    summary.macro_f1 = macro_f1 / static_cast<double>(samples.size());
    summary.images = samples.size();

    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "metrics.csv");
    if (!os) throw IoError("cannot write metrics.csv under " + out_dir);
    os << "dataset,images,miou,f1,precision,recall,pd,fa_1e6";
    if (macro) os << ",macro_miou,macro_f1";
    os << "\n";
    os << dataset_dir << "," << samples.size() << "," << fmt(summary.miou) << ","
       << fmt(summary.f1) << "," << fmt(summary.precision) << "," << fmt(summary.recall) << ","
       << fmt(summary.pd) << "," << fmt(summary.fa * 1e6);
    if (macro) os << "," << fmt(summary.macro_miou) << "," << fmt(summary.macro_f1);
    os << "\n";
    if (!os) throw IoError("failed writing metrics.csv under " + out_dir);

    RocCurve curve = roc(probs, masks, roc_thresholds);
    write_roc_csv(curve, (fs::path(out_dir) / "roc.csv").string());
    return summary;
}

void cmd_infer(const RunConfig& config, const std::string& checkpoint,
               const std::string& input_pgm, const std::string& output_pgm, double threshold) {
    config.net.validate();
    Tensor image = load_pgm(input_pgm);
    int64_t multiple = int64_t{1} << config.net.depth;
    if (image.dim(1) % multiple != 0 || image.dim(2) % multiple != 0) {
        throw ShapeError("infer: input " + shape_str(image.shape()) +
                         " spatial extents must be divisible by " + std::to_string(multiple));
    }
    DATransNet net(config.net);
    net.load_checkpoint(checkpoint);
    Tensor prob = net.forward(image);
    save_pgm(binarize(prob, threshold), output_pgm);
}

namespace {

struct AblationVariant {
    std::string name;
    NetworkConfig net;
    std::string ref_params, ref_miou, ref_f1, ref_pd, ref_fa;
};

// Published full-scale NUDT-SIRST reference results, kept for context next
// to desk-scale numbers; the two columns are not comparable.
std::vector<AblationVariant> make_grid(const RunConfig& config, const std::string& grid) {
    std::vector<AblationVariant> variants;
    auto base = [&config] {
        NetworkConfig net = config.net;
        return net;
    };
    if (grid == "components") {
        AblationVariant unet{"unet", base(), "", "0.9131", "0.9544", "0.9798", "4.46"};
        unet.net.use_datrans = false;
        unet.net.use_gfem = false;
        AblationVariant datrans{"unet_datrans", base(), "", "0.9425", "0.9703", "0.9883", "2.73"};
        datrans.net.use_datrans = true;
        datrans.net.use_gfem = false;
        AblationVariant gfem{"unet_gfem", base(), "", "0.9232", "0.9614", "0.9630", "3.96"};
        gfem.net.use_datrans = false;
        gfem.net.use_gfem = true;
        AblationVariant both{"unet_datrans_gfem", base(), "", "0.9493", "0.9739", "0.9904", "2.00"};
        both.net.use_datrans = true;
        both.net.use_gfem = true;
        variants = {unet, datrans, gfem, both};
    } else if (grid == "dilations") {
        struct Row {
            const char* name;
            std::vector<int> dilations;
            const char* miou;
            const char* f1;
            const char* pd;
            const char* fa;
        };
        const Row rows[] = {
            {"1", {1}, "0.9353", "0.9630", "0.9889", "5.58"},
            {"1,2", {1, 2}, "0.9441", "0.9712", "0.9883", "2.46"},
            {"1,3", {1, 3}, "0.9493", "0.9739", "0.9904", "2.00"},
            {"1,5", {1, 5}, "0.9424", "0.9703", "0.9865", "1.47"},
            {"1,2,3,4", {1, 2, 3, 4}, "0.9458", "0.9720", "0.9804", "2.21"},
        };
        for (const Row& r : rows) {
            AblationVariant v{r.name, base(), "", r.miou, r.f1, r.pd, r.fa};
            v.net.use_datrans = true;
            v.net.dilations = r.dilations;
            variants.push_back(std::move(v));
        }
    } else if (grid == "gfem") {
        AblationVariant none{"none", base(), "3.70", "0.9425", "0.9703", "", ""};
        none.net.use_datrans = true;
        none.net.use_gfem = false;
        AblationVariant nl{"nonlocal", base(), "4.03", "0.9469", "0.9727", "", ""};
        nl.net.use_datrans = true;
        nl.net.use_gfem = true;
        nl.net.gfem_nonlocal = true;
        nl.net.gfem_se = false;
        AblationVariant se{"se", base(), "4.02", "0.9453", "0.9719", "", ""};
        se.net.use_datrans = true;
        se.net.use_gfem = true;
        se.net.gfem_nonlocal = false;
        se.net.gfem_se = true;
        AblationVariant both{"nonlocal_se", base(), "4.04", "0.9493", "0.9739", "", ""};
        both.net.use_datrans = true;
        both.net.use_gfem = true;
        both.net.gfem_nonlocal = true;
        both.net.gfem_se = true;
        variants = {none, nl, se, both};
    } else {
        throw ConfigError("unknown ablation grid '" + grid +
                          "' (expected components, dilations or gfem)");
    }
    return variants;
}

AblationRow run_variant(const RunConfig& config, const AblationVariant& variant,
                        const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set) {
    variant.net.validate();
    DATransNet net(variant.net);
    TrainResult result = fit(net, train_set, val_set, config.train);
    const EpochRecord& best = result.log[static_cast<size_t>(result.best_epoch)];

    AblationRow row;
    row.variant = variant.name;
    row.params = net.param_count();
    row.miou = best.miou;
    row.f1 = best.f1;
    row.pd = best.pd;
    row.fa_1e6 = best.fa * 1e6;
    row.ref_params = variant.ref_params;
    row.ref_miou = variant.ref_miou;
    row.ref_f1 = variant.ref_f1;
    row.ref_pd = variant.ref_pd;
    row.ref_fa_1e6 = variant.ref_fa;
    return row;
}

}  // namespace

std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::string& grid,
                                    const std::string& out_csv, int workers) {
    config.validate();
    if (config.train_dir.empty() || config.val_dir.empty()) {
        throw ConfigError("paths.train_dir and paths.val_dir are required for ablate");
    }
    if (workers < 1) throw ConfigError("--workers must be >= 1");

    std::vector<AblationVariant> variants = make_grid(config, grid);
    std::vector<Sample> train_set = load_dataset_dir(config.train_dir);
    std::vector<Sample> val_set = load_dataset_dir(config.val_dir);

    std::vector<AblationRow> rows(variants.size());
    if (workers <= 1) {
        for (size_t i = 0; i < variants.size(); ++i) {
            rows[i] = run_variant(config, variants[i], train_set, val_set);
        }
    } else {
        // Each variant trains its own network on its own tape; threads share
        // only the read-only datasets. Results land in grid order.
        std::vector<std::thread> pool;
        size_t next = 0;
        std::exception_ptr failure;
        std::mutex mu;
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= variants.size() || failure) return;
                        i = next++;
                    }
                    try {
                        AblationRow row = run_variant(config, variants[i], train_set, val_set);
                        std::lock_guard<std::mutex> lock(mu);
                        rows[i] = std::move(row);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(mu);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    if (!out_csv.empty()) {
        fs::path parent = fs::path(out_csv).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        std::ofstream os(out_csv);
        if (!os) throw IoError("cannot write ablation csv: " + out_csv);
        os << "variant,params,miou,f1,pd,fa_1e6,ref_params_m,ref_miou,ref_f1,ref_pd,ref_fa_1e6\n";
        for (const AblationRow& r : rows) {
            os << r.variant << "," << r.params << "," << fmt(r.miou) << "," << fmt(r.f1) << ","
               << fmt(r.pd) << "," << fmt(r.fa_1e6) << "," << r.ref_params << "," << r.ref_miou
               << "," << r.ref_f1 << "," << r.ref_pd << "," << r.ref_fa_1e6 << "\n";
        }
        if (!os) throw IoError("failed writing ablation csv: " + out_csv);
    }
    return rows;
}

}  // namespace datn
