#include "datn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace datn {

namespace {

// Accepts h×w or 1×h×w; returns (h, w, data pointer).
struct MaskView {
    int64_t h = 0, w = 0;
    const double* data = nullptr;
};

MaskView mask_view(const Tensor& mask) {
    if (mask.rank() == 2) return {mask.dim(0), mask.dim(1), mask.data()};
    if (mask.rank() == 3 && mask.dim(0) == 1) return {mask.dim(1), mask.dim(2), mask.data()};
    throw ShapeError("mask must be h×w or 1×h×w, got " + shape_str(mask.shape()));
}

inline bool set_at(const MaskView& m, int64_t i) { return m.data[i] >= 0.5; }

}  // namespace

void PixelConfusion::add(const Tensor& pred, const Tensor& gt) {
    MaskView p = mask_view(pred);
    MaskView g = mask_view(gt);
    if (p.h != g.h || p.w != g.w) {
        throw ShapeError("confusion masks differ: " + shape_str(pred.shape()) + " vs " +
                         shape_str(gt.shape()));
    }
    for (int64_t i = 0; i < p.h * p.w; ++i) {
        bool pv = set_at(p, i), gv = set_at(g, i);
        if (pv && gv) ++tp;
        else if (pv) ++fp;
        else if (gv) ++fn;
        else ++tn;
    }
}

void PixelConfusion::merge(const PixelConfusion& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
}

PixelMetrics pixel_metrics(const PixelConfusion& acc) {
    PixelMetrics m;
    uint64_t denom = acc.tp + acc.fp + acc.fn;
    if (denom == 0) return m;  // defined = false, everything 0
    m.defined = true;
    m.miou = static_cast<double>(acc.tp) / static_cast<double>(denom);
    m.f1 = 2.0 * static_cast<double>(acc.tp) / static_cast<double>(2 * acc.tp + acc.fp + acc.fn);
    m.precision = acc.tp + acc.fp == 0
                      ? 0.0
                      : static_cast<double>(acc.tp) / static_cast<double>(acc.tp + acc.fp);
    m.recall = acc.tp + acc.fn == 0
                   ? 0.0
                   : static_cast<double>(acc.tp) / static_cast<double>(acc.tp + acc.fn);
    return m;
}

ComponentLabeling connected_components(const Tensor& mask) {
    MaskView m = mask_view(mask);
    ComponentLabeling out;
    out.height = m.h;
    out.width = m.w;
    out.labels.assign(static_cast<size_t>(m.h * m.w), 0);

    // Two-pass union-find over the 4 already-scanned 8-neighbors.
    std::vector<int> parent(1, 0);  // parent[0] unused
    auto find = [&parent](int a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    };
    auto unite = [&parent, &find](int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);
        parent[static_cast<size_t>(b)] = a;
    };

    int next = 1;
    for (int64_t y = 0; y < m.h; ++y) {
        for (int64_t x = 0; x < m.w; ++x) {
            int64_t i = y * m.w + x;
            if (!set_at(m, i)) continue;
            int label = 0;
            const int64_t neigh[4][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}};
            for (auto [dy, dx] : neigh) {
                int64_t ny = y + dy, nx = x + dx;
                if (ny < 0 || nx < 0 || nx >= m.w) continue;
                int nl = out.labels[static_cast<size_t>(ny * m.w + nx)];
                if (nl == 0) continue;
                if (label == 0) label = nl;
                else unite(label, nl);
            }
            if (label == 0) {
                label = next++;
                parent.push_back(label);
            }
            out.labels[static_cast<size_t>(i)] = label;
        }
    }

    // Compact roots to 1..n in scanline first-touch order.
    std::vector<int> compact(static_cast<size_t>(next), 0);
    int count = 0;
    for (int64_t i = 0; i < m.h * m.w; ++i) {
        int& l = out.labels[static_cast<size_t>(i)];
        if (l == 0) continue;
        int root = find(l);
        if (compact[static_cast<size_t>(root)] == 0) compact[static_cast<size_t>(root)] = ++count;
        l = compact[static_cast<size_t>(root)];
    }

    out.components.assign(static_cast<size_t>(count), Component{});
    for (int64_t y = 0; y < m.h; ++y) {
        for (int64_t x = 0; x < m.w; ++x) {
            int l = out.labels[static_cast<size_t>(y * m.w + x)];
            if (l == 0) continue;
            Component& c = out.components[static_cast<size_t>(l - 1)];
            ++c.size;
            c.centroid_row += static_cast<double>(y);
            c.centroid_col += static_cast<double>(x);
        }
    }
    for (Component& c : out.components) {
        c.centroid_row /= static_cast<double>(c.size);
        c.centroid_col /= static_cast<double>(c.size);
    }
    return out;
}

void TargetMatchReport::merge(const TargetMatchReport& other) {
    gt_targets += other.gt_targets;
    detected += other.detected;
    false_alarm_pixels += other.false_alarm_pixels;
    total_pixels += other.total_pixels;
}

TargetMatchReport target_metrics(const Tensor& pred, const Tensor& gt, double match_radius) {
    MaskView pv = mask_view(pred);
    MaskView gv = mask_view(gt);
    if (pv.h != gv.h || pv.w != gv.w) {
        throw ShapeError("target_metrics masks differ: " + shape_str(pred.shape()) + " vs " +
                         shape_str(gt.shape()));
    }
    ComponentLabeling pl = connected_components(pred);
    ComponentLabeling gl = connected_components(gt);

    size_t np = pl.components.size();
    size_t ng = gl.components.size();

    // overlap[p][g] = true when components share at least one pixel
    std::vector<std::vector<bool>> overlap(np, std::vector<bool>(ng, false));
    for (int64_t i = 0; i < pv.h * pv.w; ++i) {
        int p = pl.labels[static_cast<size_t>(i)];
        int g = gl.labels[static_cast<size_t>(i)];
        if (p > 0 && g > 0) overlap[static_cast<size_t>(p - 1)][static_cast<size_t>(g - 1)] = true;
    }

    auto matches = [&](size_t p, size_t g) {
        if (overlap[p][g]) return true;
        double dr = pl.components[p].centroid_row - gl.components[g].centroid_row;
        double dc = pl.components[p].centroid_col - gl.components[g].centroid_col;
        return dr * dr + dc * dc <= match_radius * match_radius;
    };

    TargetMatchReport report;
    report.gt_targets = static_cast<int64_t>(ng);
    report.total_pixels = static_cast<uint64_t>(pv.h * pv.w);

    std::vector<bool> pred_matched(np, false);
    for (size_t g = 0; g < ng; ++g) {
        bool hit = false;
        for (size_t p = 0; p < np; ++p) {
            if (matches(p, g)) {
                hit = true;
                pred_matched[p] = true;
            }
        }
        if (hit) ++report.detected;
    }
    for (size_t p = 0; p < np; ++p) {
        if (!pred_matched[p]) {
            report.false_alarm_pixels += static_cast<uint64_t>(pl.components[p].size);
        }
    }
    return report;
}

RocCurve roc(const std::vector<Tensor>& prob_maps, const std::vector<Tensor>& gt_masks,
             int n_thresholds) {
    if (prob_maps.size() != gt_masks.size()) {
        throw ValueError("roc: map and mask counts differ");
    }
    if (n_thresholds < 1) throw ValueError("roc: n_thresholds must be >= 1");

    RocCurve curve;
    curve.points.reserve(static_cast<size_t>(n_thresholds));
    for (int k = n_thresholds; k >= 1; --k) {
        double threshold = static_cast<double>(k) / static_cast<double>(n_thresholds + 1);
        TargetMatchReport agg;
        for (size_t i = 0; i < prob_maps.size(); ++i) {
            const Tensor& prob = prob_maps[i];
            Tensor pred = Tensor::zeros(prob.shape());
            for (int64_t j = 0; j < prob.numel(); ++j) {
                pred.data()[j] = prob.data()[j] >= threshold ? 1.0 : 0.0;
            }
            agg.merge(target_metrics(pred, gt_masks[i]));
        }
        curve.points.push_back({threshold, agg.pd(), agg.fa()});
    }
    return curve;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open roc csv for writing: " + path);
    os << "threshold,pd,fa\n";
    char buf[160];
    for (const RocPoint& p : curve.points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.pd, p.fa);
        os << buf;
    }
    if (!os) throw IoError("failed writing roc csv: " + path);
}

}  // namespace datn
