#pragma once

#include <cstdint>
#include <vector>

#include "datn/tensor.hpp"

namespace datn {

// Pixel-level confusion accumulated across a dataset (micro averaging).
struct PixelConfusion {
    uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    // pred and gt are binary h×w (or 1×h×w) masks.
    void add(const Tensor& pred, const Tensor& gt);
    void merge(const PixelConfusion& other);
    uint64_t total() const { return tp + fp + fn + tn; }
};

struct PixelMetrics {
    double miou = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool defined = false;  // false when tp+fp+fn == 0
};

PixelMetrics pixel_metrics(const PixelConfusion& acc);

struct Component {
    int64_t size = 0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
};

// 8-connectivity labeling; labels are 1-based in scanline first-touch order,
// 0 is background.
struct ComponentLabeling {
    int64_t height = 0, width = 0;
    std::vector<int> labels;  // h·w
    std::vector<Component> components;
};

ComponentLabeling connected_components(const Tensor& mask);

// Target-level bookkeeping. A ground-truth component counts as detected when
// some predicted component overlaps it by at least one pixel or has its
// centroid within match_radius; predicted components matched to nothing
// contribute every pixel to the false-alarm count.
struct TargetMatchReport {
    int64_t gt_targets = 0;
    int64_t detected = 0;
    uint64_t false_alarm_pixels = 0;
    uint64_t total_pixels = 0;

    double pd() const { return gt_targets == 0 ? 1.0 : static_cast<double>(detected) / static_cast<double>(gt_targets); }
    double fa() const { return total_pixels == 0 ? 0.0 : static_cast<double>(false_alarm_pixels) / static_cast<double>(total_pixels); }
    void merge(const TargetMatchReport& other);
};

TargetMatchReport target_metrics(const Tensor& pred, const Tensor& gt,
                                 double match_radius = 3.0);

struct RocPoint {
    double threshold = 0.0;
    double pd = 0.0;
    double fa = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // thresholds strictly descending
};

// Sweeps n_thresholds equally spaced thresholds k/(n+1), k = n..1, binarizes
// each probability map at p >= t and aggregates target metrics per threshold.
RocCurve roc(const std::vector<Tensor>& prob_maps, const std::vector<Tensor>& gt_masks,
             int n_thresholds);

void write_roc_csv(const RocCurve& curve, const std::string& path);

}  // namespace datn
