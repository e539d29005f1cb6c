#pragma once

#include <optional>

#include "datn/nn.hpp"
#include "datn/tensor.hpp"

namespace datn {

// Embedded-Gaussian non-local attention over all spatial positions of one
// feature map. 1×1 convs reduce c to c_reduced for Q/K/V; the (h·w)×(h·w)
// attention A = softmax((Q')ᵀ·K') is applied as V'·Aᵀ, expanded back to c
// channels by a 1×1 conv, with an optional residual add of the input.
class NonLocalBlock {
public:
    NonLocalBlock(int64_t channels, int64_t reduced, bool residual, Rng& rng);

    Tensor forward(const Tensor& x) const;

    void collect_params(ParamList& out, const std::string& prefix) const;
    int64_t param_count() const;

    Conv2dLayer reduce_q, reduce_k, reduce_v, expand;
    bool residual;

private:
    int64_t channels_;
    int64_t reduced_;
};

// Squeeze-and-excitation channel gate: global average pool, two fully
// connected layers with a relu between, sigmoid, per-channel rescale.
class SEBlock {
public:
    SEBlock(int64_t channels, int64_t ratio, Rng& rng);

    Tensor gate(const Tensor& x) const;     // length-c vector in (0,1)
    Tensor forward(const Tensor& x) const;  // x scaled per channel by gate(x)

    void collect_params(ParamList& out, const std::string& prefix) const;
    int64_t param_count() const;

    LinearLayer fc1, fc2;

private:
    int64_t channels_;
};

struct GfemOptions {
    bool enable_nonlocal = true;
    bool enable_se = true;
    bool nonlocal_residual = true;
    int64_t nonlocal_reduce = 2;  // c' = c / nonlocal_reduce
    int64_t se_ratio = 4;
};

// Global feature extraction: the non-local spatial branch and the SE channel
// branch run on the same input, are concatenated (non-local first) and fused
// by a 1×1 conv from 2c back to c. A disabled branch passes the input
// through unchanged and owns no parameters; disabling both is rejected.
class GfemLayer {
public:
    GfemLayer(int64_t channels, const GfemOptions& options, Rng& rng);

    Tensor forward(const Tensor& x) const;

    void collect_params(ParamList& out, const std::string& prefix) const;
    int64_t param_count() const;

    std::optional<NonLocalBlock> non_local;
    std::optional<SEBlock> se;
    Conv2dLayer fuse;  // 1×1, 2c -> c

private:
    int64_t channels_;
};

}  // namespace datn
