#pragma once

#include <optional>
#include <string>
#include <vector>

#include "datn/datrans.hpp"
#include "datn/gfem.hpp"
#include "datn/nn.hpp"
#include "datn/tensor.hpp"

namespace datn {

struct NetworkConfig {
    int depth = 4;
    int64_t base_channels = 16;
    std::vector<int> dilations = {1, 3};
    bool use_datrans = true;
    bool use_gfem = true;
    bool gfem_nonlocal = true;
    bool gfem_se = true;
    bool gfem_residual = true;
    int64_t gfem_reduce = 2;
    int64_t se_ratio = 4;
    bool datrans_in_decoder = true;
    uint64_t seed = 0;

    // Throws ConfigError naming the failing field.
    void validate() const;
    int64_t channels_at(int level) const;  // base_channels · 2^level
};

// U-Net over difference-attention stages: encoder stages of a feature block
// followed by a 2×2 max pool, a global-feature bottleneck on the deepest map,
// decoder stages of nearest ×2 upsample + 1×1 conv, skip concatenation and
// another feature block, and a 1×1 conv + sigmoid head producing a 1×h×w
// probability map. Feature blocks are DATrans layers, or 3×3 conv + relu when
// the attention path is disabled.
class DATransNet {
public:
    explicit DATransNet(const NetworkConfig& config);

    // 1×h×w -> 1×h×w probability map in (0,1); h, w divisible by 2^depth.
    Tensor forward(const Tensor& image) const;

    int64_t param_count() const;
    ParamList parameters() const;
    const NetworkConfig& config() const { return config_; }

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

private:
    struct FeatureBlock {
        std::optional<DATransLayer> datrans;
        std::optional<Conv2dLayer> conv;  // 3×3, pad 1, relu after

        Tensor forward(const Tensor& x) const;
        void collect_params(ParamList& out, const std::string& prefix) const;
    };
    struct UpStage {
        Conv2dLayer up_conv;  // 1×1 after nearest ×2 upsample
        FeatureBlock block;
    };

    FeatureBlock make_block(int64_t c_in, int64_t c_out, bool allow_datrans, Rng& rng) const;

    NetworkConfig config_;
    std::vector<FeatureBlock> encoder_;
    std::optional<GfemLayer> bottleneck_;
    std::vector<UpStage> decoder_;  // deepest first
    Conv2dLayer head_;
};

// Checkpoint container format, independent of the network: magic "DATN",
// version, then count-prefixed named f32 tensors.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> values;
};
void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

}  // namespace datn
