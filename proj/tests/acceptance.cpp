// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs single-threaded unless DATN_THREADS is set.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "datn/commands.hpp"
#include "datn/datrans.hpp"
#include "datn/edgecdc.hpp"
#include "datn/metrics.hpp"
#include "datn/network.hpp"
#include "datn/training.hpp"
#include "gradcheck.hpp"

using namespace datn;
using datn::testing::gradcheck;
using datn::testing::gradcheck_spots;
using datn::testing::random_tensor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

std::string fmt(const char* pattern, double v) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

// ---- 1: the attention head is a CDC with input-dependent weights ------------

CriterionResult check_equivalence_identity() {
    CriterionResult r{"equivalence identity (head_forward == M_mix · T)"};
    Rng rng(2024);
    double worst = 0.0;
    int cases = 0;
    const int dilations[4] = {1, 2, 3, 5};
    while (cases < 100) {
        int n = dilations[cases % 4];
        int64_t c_in = rng.uniform_int(1, 4);
        int64_t m = rng.uniform_int(1, 2);
        int64_t c_out = m * rng.uniform_int(1, 4);
        int64_t h = rng.uniform_int(4, 16);
        int64_t w = rng.uniform_int(4, 16);
        DATransHead head(c_in, c_out, m, n, rng);
        Tensor x = random_tensor({c_in, h, w}, rng);
        Tensor direct = head.forward(x);
        Tensor tokens = flatten_tokens(diff(x, EdgeKernelBank(n)));
        Tensor via_mix = matmul(head.dynamic_matrix(x), tokens);
        worst = std::max(worst, max_abs_diff(direct, via_mix));
        ++cases;
    }
    r.pass = worst < 1e-8;
    r.detail = "100 head/input pairs, dilations {1,2,3,5}, max |diff| = " + fmt("%.3g", worst) +
               " (limit 1e-8)";
    return r;
}

// ---- 2: Diff/Flatten/weight-matrix pipeline equals the literal CDC ----------

CriterionResult check_cdc_decomposition() {
    CriterionResult r{"CDC decomposition (diff -> flatten -> weights == direct)"};
    Rng rng(2025);
    double worst = 0.0;
    const int dilations[4] = {1, 2, 3, 5};
    for (int c = 0; c < 100; ++c) {
        int n = dilations[c % 4];
        int64_t c_in = rng.uniform_int(1, 3);
        int64_t c_out = rng.uniform_int(1, 4);
        int64_t h = rng.uniform_int(3, 12);
        int64_t w = rng.uniform_int(3, 12);
        Tensor x = random_tensor({c_in, h, w}, rng);
        StaticCdcWeights weights(random_tensor({c_out, 8 * c_in}, rng));
        Tensor pipeline =
            apply_static_cdc(weights, flatten_tokens(diff(x, EdgeKernelBank(n))), h, w);
        Tensor direct = cdc_direct(x, weights, n);
        worst = std::max(worst, max_abs_diff(pipeline, direct));
    }
    r.pass = worst < 1e-10;
    r.detail = "100 random cases, max |diff| = " + fmt("%.3g", worst) + " (limit 1e-10)";
    return r;
}

// ---- 3: gradient suite -------------------------------------------------------

CriterionResult check_gradients() {
    CriterionResult r{"gradient suite (ops + full network vs finite differences)"};
    const double h = 1e-3, floor = 1e-8, tol = 1e-4, refine = 1e-5;
    double worst = 0.0;
    std::string worst_op;
    auto track = [&](const char* op, const datn::testing::GradCheck& g) {
        if (g.max_rel_err > worst) {
            worst = g.max_rel_err;
            worst_op = op;
        }
    };
    Rng rng(77);

    {
        Tensor a = random_tensor({4, 5}, rng).set_requires_grad(true);
        Tensor b = random_tensor({5, 3}, rng).set_requires_grad(true);
        track("matmul", gradcheck([&] { return sum(matmul(a, b)); }, {a, b}, h, floor, tol, refine));
        track("transpose",
              gradcheck([&] { return sum(matmul(transpose(b), transpose(a))); }, {a, b}, h, floor,
                        tol, refine));
    }
    {
        Tensor x = random_tensor({2, 6, 6}, rng).set_requires_grad(true);
        Tensor k = random_tensor({3, 2, 3, 3}, rng).set_requires_grad(true);
        Tensor b = random_tensor({3}, rng).set_requires_grad(true);
        track("conv2d",
              gradcheck([&] { return sum(conv2d(x, k, b, 2, 2, 2)); }, {x, k, b}, h, floor, tol,
                        refine));
    }
    {
        Tensor x = random_tensor({2, 5, 5}, rng).set_requires_grad(true);
        Tensor w = random_tensor({16, 5, 5}, rng);
        track("diff", gradcheck([&] { return sum(mul(diff(x, EdgeKernelBank(2)), w)); }, {x}, h,
                                floor, tol, refine));
    }
    {
        Tensor x = random_tensor({4, 6}, rng).set_requires_grad(true);
        Tensor w = random_tensor({4, 6}, rng);
        track("softmax", gradcheck([&] { return sum(mul(softmax(x, 1), w)); }, {x}, h, floor, tol,
                                   refine));
        track("instance_norm",
              gradcheck([&] { return sum(mul(instance_norm(x, 1e-5), w)); }, {x}, h, floor, tol,
                        refine));
    }
    {
        Tensor x = random_tensor({12}, rng).set_requires_grad(true);
        for (int64_t i = 0; i < 12; ++i) {
            if (std::fabs(x.data()[i]) < 0.05) x.data()[i] = 0.2;
        }
        Tensor w = random_tensor({12}, rng);
        track("relu", gradcheck([&] { return sum(mul(relu(x), w)); }, {x}, h, floor, tol, refine));
        track("sigmoid",
              gradcheck([&] { return sum(mul(sigmoid(x), w)); }, {x}, h, floor, tol, refine));
    }
    {
        Tensor a = random_tensor({6}, rng).set_requires_grad(true);
        Tensor b = random_tensor({6}, rng, 0.5, 1.5).set_requires_grad(true);
        track("add/sub/mul/div/scale",
              gradcheck([&] { return sum(add(sub(mul(a, b), div(a, b)), scale(a, 0.3))); }, {a, b},
                        h, floor, tol, refine));
    }
    {
        Tensor x = random_tensor({3, 4, 4}, rng).set_requires_grad(true);
        Tensor g = random_tensor({3}, rng, 0.2, 0.8).set_requires_grad(true);
        track("channel_scale",
              gradcheck([&] { return sum(channel_scale(x, g)); }, {x, g}, h, floor, tol, refine));
        Tensor w = random_tensor({3}, rng);
        track("global_avg_pool",
              gradcheck([&] { return sum(mul(global_avg_pool(x), w)); }, {x}, h, floor, tol,
                        refine));
        Tensor w2 = random_tensor({3, 2, 2}, rng);
        track("max_pool2",
              gradcheck([&] { return sum(mul(max_pool2(x), w2)); }, {x}, h, floor, tol, refine));
        Tensor w3 = random_tensor({3, 8, 8}, rng);
        track("upsample_nearest2",
              gradcheck([&] { return sum(mul(upsample_nearest2(x), w3)); }, {x}, h, floor, tol,
                        refine));
        track("reshape+concat+mean",
              gradcheck([&] { return mean(concat({reshape(x, {3, 16}), reshape(x, {3, 16})}, 1)); },
                        {x}, h, floor, tol, refine));
        track("reduce_max", gradcheck([&] { return reduce_max(x); }, {x}, h, floor, tol, refine));
    }
    {
        Tensor p = random_tensor({1, 6, 6}, rng, 0.05, 0.95).set_requires_grad(true);
        Tensor g = Tensor::zeros({1, 6, 6});
        for (int64_t i = 0; i < 36; ++i) g.data()[i] = rng.uniform() < 0.25 ? 1.0 : 0.0;
        track("soft_iou_loss",
              gradcheck([&] { return soft_iou_loss(p, g); }, {p}, h, floor, tol, refine));
    }
    // full network, every parameter
    {
        NetworkConfig cfg;
        cfg.depth = 1;
        cfg.base_channels = 4;
        cfg.dilations = {1};
        cfg.seed = 9;
        DATransNet net(cfg);
        Tensor x = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
        Tensor w = random_tensor({1, 16, 16}, rng);
        ParamList params = net.parameters();
        std::vector<Tensor> leaves;
        for (auto& p : params) leaves.push_back(p.tensor);
        track("full net (every param)",
              gradcheck([&] { return sum(mul(net.forward(x), w)); }, leaves, h, floor, tol,
                        refine));
    }
    // deeper network, spot checks
    {
        NetworkConfig cfg;
        cfg.depth = 2;
        cfg.base_channels = 8;
        cfg.dilations = {1, 3};
        cfg.seed = 13;
        DATransNet net(cfg);
        Tensor x = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
        Tensor w = random_tensor({1, 16, 16}, rng);
        ParamList params = net.parameters();
        std::vector<Tensor> leaves;
        for (auto& p : params) leaves.push_back(p.tensor);
        std::vector<std::pair<size_t, int64_t>> spots;
        Rng pick(3);
        for (int s = 0; s < 10; ++s) {
            size_t li =
                static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(leaves.size()) - 1));
            spots.emplace_back(li, pick.uniform_int(0, leaves[li].numel() - 1));
        }
        auto loss = [&] { return sum(mul(net.forward(x), w)); };
        // spot harness re-measures at the refine step by hand
        auto g1 = gradcheck_spots(loss, leaves, spots, h, floor);
        if (g1.max_rel_err > tol) {
            auto g2 = gradcheck_spots(loss, leaves, spots, refine, floor);
            track("deep net (spots)", g2);
        } else {
            track("deep net (spots)", g1);
        }
    }

    r.pass = worst < tol;
    r.detail = "max rel err = " + fmt("%.3g", worst) + " in " + worst_op +
               " (h=1e-3, limit 1e-4, floor 1e-8)";
    return r;
}

// ---- 4: normalization invariants ---------------------------------------------

CriterionResult check_normalization() {
    CriterionResult r{"normalization invariants (softmax sums, instance-norm moments)"};
    Rng rng(404);
    double worst_sum = 0.0, worst_mean = 0.0, worst_var = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_tensor({5, 7}, rng, -4.0, 4.0);
        for (int axis : {0, 1}) {
            Tensor y = softmax(x, axis);
            int64_t outer = axis == 0 ? 7 : 5;
            int64_t extent = axis == 0 ? 5 : 7;
            for (int64_t o = 0; o < outer; ++o) {
                double s = 0.0;
                for (int64_t e = 0; e < extent; ++e) {
                    s += axis == 0 ? y.at({e, o}) : y.at({o, e});
                }
                worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
            }
        }
        // instance norm: wide slices keep the eps contribution below 1e-6
        Tensor z = random_tensor({8, 8}, rng, -10.0, 10.0);
        Tensor y = instance_norm(z, 1e-5);
        double mean = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) mean += y.data()[i];
        mean /= static_cast<double>(y.numel());
        double var = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) {
            double d = y.data()[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(y.numel());
        worst_mean = std::max(worst_mean, std::fabs(mean));
        worst_var = std::max(worst_var, std::fabs(var - 1.0));
    }
    r.pass = worst_sum < 1e-12 && worst_mean < 1e-10 && worst_var < 1e-6;
    r.detail = "softmax sum err " + fmt("%.3g", worst_sum) + " (limit 1e-12), norm |mean| " +
               fmt("%.3g", worst_mean) + " (limit 1e-10), |var-1| " + fmt("%.3g", worst_var) +
               " (limit 1e-6)";
    return r;
}

// ---- 5: SoftIoU analytic cases -------------------------------------------------

CriterionResult check_soft_iou() {
    CriterionResult r{"SoftIoU analytic cases"};
    Tensor g = Tensor::zeros({1, 8, 8});
    for (int64_t i = 0; i < 10; ++i) g.data()[i * 3] = 1.0;
    double perfect = soft_iou_loss(g, g).value();

    Tensor ones = Tensor::full({1, 8, 8}, 1.0);
    Tensor half = Tensor::zeros({1, 8, 8});
    for (int64_t i = 0; i < 32; ++i) half.data()[i] = 1.0;
    double half_loss = soft_iou_loss(ones, half).value();

    Tensor empty = Tensor::zeros({1, 8, 8});
    double empty_loss = soft_iou_loss(empty, empty).value();

    r.pass = perfect == 0.0 && std::fabs(half_loss - 0.5) < 1e-6 && empty_loss == 0.0;
    r.detail = "perfect -> " + fmt("%.3g", perfect) + ", all-ones vs half-mask -> " +
               fmt("%.9g", half_loss) + " (0.5 ± 1e-6), empty vs empty -> " +
               fmt("%.3g", empty_loss);
    return r;
}

// ---- 6: metrics against independent oracles -------------------------------------

std::vector<int> flood_fill_labels(const Tensor& mask, int64_t h, int64_t w) {
    const double* data = mask.data();
    std::vector<int> labels(static_cast<size_t>(h * w), 0);
    int next = 0;
    std::vector<int64_t> stack;
    for (int64_t start = 0; start < h * w; ++start) {
        if (data[start] < 0.5 || labels[static_cast<size_t>(start)] != 0) continue;
        ++next;
        stack.push_back(start);
        labels[static_cast<size_t>(start)] = next;
        while (!stack.empty()) {
            int64_t i = stack.back();
            stack.pop_back();
            int64_t y = i / w, x = i % w;
            for (int64_t dy = -1; dy <= 1; ++dy) {
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    int64_t ny = y + dy, nx = x + dx;
                    if ((dy | dx) == 0 || ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    int64_t ni = ny * w + nx;
                    if (data[ni] >= 0.5 && labels[static_cast<size_t>(ni)] == 0) {
                        labels[static_cast<size_t>(ni)] = next;
                        stack.push_back(ni);
                    }
                }
            }
        }
    }
    return labels;
}

CriterionResult check_metrics_oracle() {
    CriterionResult r{"metrics oracle (components vs flood fill, pixel metrics vs counts)"};
    Rng rng(606);
    int label_mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Tensor mask = Tensor::zeros({32, 32});
        double fill = rng.uniform(0.02, 0.7);
        for (int64_t i = 0; i < 32 * 32; ++i) mask.data()[i] = rng.uniform() < fill ? 1.0 : 0.0;
        ComponentLabeling ours = connected_components(mask);
        std::vector<int> oracle = flood_fill_labels(mask, 32, 32);
        for (size_t i = 0; i < oracle.size(); ++i) {
            if (ours.labels[i] != oracle[i]) ++label_mismatches;
        }
    }

    bool pixel_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor pred = Tensor::zeros({16, 16});
        Tensor gt = Tensor::zeros({16, 16});
        for (int64_t i = 0; i < 256; ++i) {
            pred.data()[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
            gt.data()[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        }
        PixelConfusion acc;
        acc.add(pred, gt);
        uint64_t tp = 0, fp = 0, fn = 0;
        for (int64_t i = 0; i < 256; ++i) {
            bool p = pred.data()[i] > 0.5, g = gt.data()[i] > 0.5;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        PixelMetrics got = pixel_metrics(acc);
        double miou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        if (got.miou != miou || got.f1 != f1) pixel_ok = false;
    }

    r.pass = label_mismatches == 0 && pixel_ok;
    r.detail = "1000 random 32x32 masks, label mismatches = " +
               std::to_string(label_mismatches) + "; pixel metrics " +
               (pixel_ok ? "exact" : "DIFFER");
    return r;
}

// ---- 7 + 8: convergence run, comparison, then ROC on the converged model ---------

struct ConvergenceOutcome {
    CriterionResult convergence;
    CriterionResult roc_monotone;
};

ConvergenceOutcome check_convergence_and_roc() {
    ConvergenceOutcome outcome;
    outcome.convergence.name =
        "convergence smoke test (miou >= 0.5 within 50 epochs and the attention variant wins)";
    outcome.roc_monotone.name = "ROC monotonicity on the converged model (50 thresholds)";

    SyntheticSceneSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.seed = 1;
    std::vector<Sample> train = generate_dataset(spec, 200);
    SyntheticSceneSpec vspec = spec;
    vspec.seed = 9001;
    std::vector<Sample> val = generate_dataset(vspec, 40);

    NetworkConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 8;
    cfg.dilations = {1, 3};
    cfg.datrans_in_decoder = false;  // keeps the 50-epoch budget on one core
    cfg.seed = 7;
    DATransNet net(cfg);

    TrainConfig tc;
    tc.epochs = 50;
    tc.drop1_epoch = 40;
    tc.drop2_epoch = 45;
    tc.batch_size = 4;
    tc.seed = 7;

    fs::path root = fs::temp_directory_path() / "datn_acceptance_conv";
    fs::remove_all(root);
    fs::create_directories(root);

    auto t0 = Clock::now();
    int reached_epoch = -1;
    FitOptions opts;
    opts.best_checkpoint_path = (root / "best.datn").string();
    opts.on_epoch = [&](const EpochRecord& rec) {
        if (rec.miou >= 0.5 && reached_epoch < 0) reached_epoch = rec.epoch;
        return reached_epoch < 0;  // stop once the bar is met
    };
    TrainResult result = fit(net, train, val, tc, opts);
    double train_secs = std::chrono::duration<double>(Clock::now() - t0).count();
    bool converged = reached_epoch >= 0 && reached_epoch < 50;
    bool in_budget = train_secs < 600.0;

    // the saved checkpoint must evaluate above the bar through the CLI path
    // as well (fresh network, f32 round trip, quantized PGM inputs)
    RunConfig eval_cfg;
    eval_cfg.net = cfg;
    eval_cfg.data = vspec;
    cmd_synth(eval_cfg, (root / "val").string(), 40);
    EvalSummary eval_summary =
        cmd_eval(eval_cfg, (root / "best.datn").string(), (root / "val").string(),
                 (root / "eval").string(), 10, false);
    bool eval_ok = eval_summary.miou >= 0.5;

    // the attention stage must beat the plain-conv baseline on mean best mIoU
    double base_mean = 0.0, attn_mean = 0.0;
    std::string per_seed;
    for (uint64_t seed : {11ull, 22ull, 33ull}) {
        double scores[2];
        for (int arm = 0; arm < 2; ++arm) {
            NetworkConfig acfg;
            acfg.depth = 2;
            acfg.base_channels = 8;
            acfg.dilations = {1, 3};
            acfg.use_datrans = arm == 1;
            acfg.use_gfem = false;
            acfg.datrans_in_decoder = false;
            acfg.seed = seed;
            DATransNet anet(acfg);
            TrainConfig atc;
            atc.epochs = 5;
            atc.drop1_epoch = 3;
            atc.drop2_epoch = 4;
            atc.batch_size = 4;
            atc.seed = seed;
            scores[arm] = fit(anet, train, val, atc).best_miou;
        }
        base_mean += scores[0] / 3.0;
        attn_mean += scores[1] / 3.0;
        per_seed += fmt(" %.3f", scores[0]) + "/" + fmt("%.3f", scores[1]);
    }
    bool attn_wins = attn_mean > base_mean;

    outcome.convergence.pass = converged && in_budget && attn_wins && eval_ok;
    outcome.convergence.detail =
        "miou 0.5 reached at epoch " + std::to_string(reached_epoch) + " in " +
        fmt("%.0f", train_secs) + "s (limit 600s); checkpoint re-eval miou " +
        fmt("%.3f", eval_summary.miou) + "; baseline/attention best miou per seed:" + per_seed +
        ", means " + fmt("%.3f", base_mean) + " vs " + fmt("%.3f", attn_mean);
    fs::remove_all(root);

    // ROC over the converged model's validation outputs
    std::vector<Tensor> probs, masks;
    for (const Sample& s : val) {
        probs.push_back(net.forward(s.image));
        masks.push_back(s.mask);
    }
    RocCurve curve = roc(probs, masks, 50);
    bool monotone = curve.points.size() == 50;
    double max_pd_drop = 0.0, max_fa_drop = 0.0;
    for (size_t i = 1; i < curve.points.size(); ++i) {
        max_pd_drop = std::max(max_pd_drop, curve.points[i - 1].pd - curve.points[i].pd);
        max_fa_drop = std::max(max_fa_drop, curve.points[i - 1].fa - curve.points[i].fa);
        if (curve.points[i].pd < curve.points[i - 1].pd - 1e-12) monotone = false;
        if (curve.points[i].fa < curve.points[i - 1].fa - 1e-12) monotone = false;
    }
    outcome.roc_monotone.pass = monotone;
    outcome.roc_monotone.detail = "50 thresholds over 40 validation maps; largest pd drop " +
                                  fmt("%.3g", max_pd_drop) + ", largest fa drop " +
                                  fmt("%.3g", max_fa_drop);
    return outcome;
}

// ---- 9: determinism of cmd_train ---------------------------------------------------

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

CriterionResult check_determinism() {
    CriterionResult r{"determinism (identical config+seed -> identical checkpoints and logs)"};
    fs::path root = fs::temp_directory_path() / "datn_acceptance_det";
    fs::remove_all(root);

    RunConfig cfg;
    cfg.apply_seed(31);
    cfg.data.height = 16;
    cfg.data.width = 16;
    cfg.net.depth = 2;
    cfg.net.base_channels = 8;
    cfg.net.dilations = {1, 3};
    cfg.train.epochs = 2;
    cfg.train.drop1_epoch = 0;
    cfg.train.drop2_epoch = 1;
    cfg.train.batch_size = 4;
    cmd_synth(cfg, (root / "train").string(), 12);
    RunConfig vcfg = cfg;
    vcfg.apply_seed(32);
    cmd_synth(vcfg, (root / "val").string(), 4);
    cfg.train_dir = (root / "train").string();
    cfg.val_dir = (root / "val").string();

    cfg.out_dir = (root / "run_a").string();
    cmd_train(cfg);
    cfg.out_dir = (root / "run_b").string();
    cmd_train(cfg);

    bool best_same = file_bytes(root / "run_a" / "best.datn") == file_bytes(root / "run_b" / "best.datn");
    bool final_same =
        file_bytes(root / "run_a" / "final.datn") == file_bytes(root / "run_b" / "final.datn");
    bool log_same = file_bytes(root / "run_a" / "log.csv") == file_bytes(root / "run_b" / "log.csv");
    r.pass = best_same && final_same && log_same;
    r.detail = std::string("best.datn ") + (best_same ? "identical" : "DIFFER") + ", final.datn " +
               (final_same ? "identical" : "DIFFER") + ", log.csv " +
               (log_same ? "identical" : "DIFFER");
    fs::remove_all(root);
    return r;
}

// ---- 10: ablation grids -------------------------------------------------------------

CriterionResult check_ablation_grids() {
    CriterionResult r{"ablation grids (row sets and parameter ordering)"};
    fs::path root = fs::temp_directory_path() / "datn_acceptance_abl";
    fs::remove_all(root);

    RunConfig cfg;
    cfg.apply_seed(41);
    cfg.data.height = 16;
    cfg.data.width = 16;
    cfg.net.depth = 2;
    cfg.net.base_channels = 8;
    cfg.net.dilations = {1, 3};
    cfg.train.epochs = 2;
    cfg.train.drop1_epoch = 0;
    cfg.train.drop2_epoch = 1;
    cfg.train.batch_size = 4;
    cmd_synth(cfg, (root / "train").string(), 12);
    RunConfig vcfg = cfg;
    vcfg.apply_seed(42);
    cmd_synth(vcfg, (root / "val").string(), 4);
    cfg.train_dir = (root / "train").string();
    cfg.val_dir = (root / "val").string();
    cfg.out_dir = root.string();

    auto names = [](const std::vector<AblationRow>& rows) {
        std::vector<std::string> out;
        for (const auto& row : rows) out.push_back(row.variant);
        return out;
    };

    auto components = cmd_ablate(cfg, "components", (root / "components.csv").string(), 1);
    bool comp_rows = names(components) == std::vector<std::string>{"unet", "unet_datrans",
                                                                   "unet_gfem",
                                                                   "unet_datrans_gfem"};
    bool comp_params = components[0].params < components[1].params &&
                       components[0].params < components[2].params &&
                       components[1].params < components[3].params &&
                       components[2].params < components[3].params;

    auto dilations = cmd_ablate(cfg, "dilations", (root / "dilations.csv").string(), 1);
    bool dil_rows =
        names(dilations) == std::vector<std::string>{"1", "1,2", "1,3", "1,5", "1,2,3,4"};
    cmd_ablate(cfg, "dilations", (root / "dilations_w2.csv").string(), 2);
    bool workers_same =
        file_bytes(root / "dilations.csv") == file_bytes(root / "dilations_w2.csv");

    auto gfem = cmd_ablate(cfg, "gfem", (root / "gfem.csv").string(), 1);
    bool gfem_rows = names(gfem) == std::vector<std::string>{"none", "nonlocal", "se",
                                                             "nonlocal_se"};
    bool gfem_params = gfem[0].params < gfem[2].params && gfem[2].params <= gfem[1].params &&
                       gfem[1].params < gfem[3].params;

    bool csvs = fs::exists(root / "components.csv") && fs::exists(root / "dilations.csv") &&
                fs::exists(root / "gfem.csv");

    r.pass = comp_rows && comp_params && dil_rows && gfem_rows && gfem_params && csvs &&
             workers_same;
    r.detail = std::string("components rows ") + (comp_rows ? "ok" : "BAD") + ", params chain " +
               (comp_params ? "ok" : "BAD") + "; dilations rows " + (dil_rows ? "ok" : "BAD") +
               " (1 vs 2 workers " + (workers_same ? "identical" : "DIFFER") + "); gfem rows " +
               (gfem_rows ? "ok" : "BAD") + ", ordering none<se<=nonlocal<both " +
               (gfem_params ? "ok" : "BAD");
    fs::remove_all(root);
    return r;
}

}  // namespace

int main() {
    std::vector<std::function<CriterionResult()>> checks = {
        check_equivalence_identity, check_cdc_decomposition, check_gradients,
        check_normalization,        check_soft_iou,          check_metrics_oracle,
    };

    const double budgets[6] = {30.0, 10.0, 300.0, 0.0, 0.0, 0.0};
    std::vector<CriterionResult> results;
    for (size_t i = 0; i < checks.size(); ++i) {
        auto t0 = Clock::now();
        CriterionResult r = checks[i]();
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (budgets[i] > 0.0 && r.seconds > budgets[i]) {
            r.pass = false;
            r.detail += " [over the " + fmt("%.0f", budgets[i]) + "s budget]";
        }
        results.push_back(std::move(r));
    }

    {
        auto t0 = Clock::now();
        ConvergenceOutcome outcome = check_convergence_and_roc();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        outcome.roc_monotone.seconds = 0.0;
        outcome.convergence.seconds = secs;
        results.push_back(std::move(outcome.roc_monotone));
        results.push_back(std::move(outcome.convergence));
    }
    {
        auto t0 = Clock::now();
        CriterionResult r = check_determinism();
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        results.push_back(std::move(r));
    }
    {
        auto t0 = Clock::now();
        CriterionResult r = check_ablation_grids();
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        results.push_back(std::move(r));
    }

    int failures = 0;
    for (size_t i = 0; i < results.size(); ++i) {
        const CriterionResult& r = results[i];
        if (!r.pass) ++failures;
        std::printf("[%2zu/%zu] %s  %s — %s (%.1fs)\n", i + 1, results.size(),
                    r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}
