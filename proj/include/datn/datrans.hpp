#pragma once

#include <vector>

#include "datn/edgecdc.hpp"
#include "datn/nn.hpp"
#include "datn/tensor.hpp"

namespace datn {

// One attention head of the dynamic-attention transformer. Queries come from
// the flattened input, keys and values from the eight-direction difference
// tokens at this head's dilation. The attention matrix lives over
// channel-direction tokens, not pixels: its shape is (c_out/m)×(8·c_in/m),
// and softmax(norm(Q·Kᵀ/w))·V is algebraically a central difference
// convolution whose weight matrix M_mix = M·W_V depends on the input.
class DATransHead {
public:
    DATransHead(int64_t c_in, int64_t c_out, int64_t head_count, int dilation, Rng& rng);

    // image c_in×h×w -> (c_out/m)×(h·w)
    Tensor forward(const Tensor& image) const;
    // Input-dependent CDC weights of this head: (c_out/m)×(8·c_in).
    Tensor dynamic_matrix(const Tensor& image) const;

    int dilation() const { return dilation_; }
    int64_t out_rows() const { return wq.dim(0); }

    void collect_params(ParamList& out, const std::string& prefix) const;
    int64_t param_count() const;

    Tensor wq;  // (c_out/m)×c_in
    Tensor wk;  // (8·c_in/m)×(8·c_in)
    Tensor wv;  // (8·c_in/m)×(8·c_in)

private:
    // softmax(instance_norm(Q·Kᵀ/w)) for the given image.
    Tensor attention(const Tensor& image, const Tensor& tokens) const;

    int64_t c_in_;
    int dilation_;
};

// Multi-head layer: heads with distinct dilations run on the same input,
// their outputs are concatenated along channels, reshaped to c_out×h×w and
// fused by a 1×1 convolution.
class DATransLayer {
public:
    DATransLayer(int64_t c_in, int64_t c_out, const std::vector<int>& dilations, Rng& rng);

    Tensor forward(const Tensor& image) const;

    void collect_params(ParamList& out, const std::string& prefix) const;
    int64_t param_count() const;

    std::vector<DATransHead> heads;
    Conv2dLayer fuse;  // 1×1, c_out -> c_out

private:
    int64_t c_out_;
};

}  // namespace datn
