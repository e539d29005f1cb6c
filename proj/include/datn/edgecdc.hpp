#pragma once

#include <array>
#include <utility>

#include "datn/tensor.hpp"

namespace datn {

// The eight fixed directional difference kernels at one dilation. Kernel j is
// (2n+1)×(2n+1) with +1 at the j-th dilated neighbor offset and -1 at the
// center; every kernel sums to zero. Direction order is row-major over the
// 3×3 neighborhood with the center excluded:
//   j: 0 (-n,-n)  1 (-n,0)  2 (-n,+n)  3 (0,-n)
//      4 (0,+n)   5 (+n,-n) 6 (+n,0)   7 (+n,+n)
class EdgeKernelBank {
public:
    static constexpr int kDirections = 8;

    explicit EdgeKernelBank(int dilation);

    int dilation() const { return dilation_; }
    // Neighbor offset (drow, dcol) of direction j, in pixels (already scaled
    // by the dilation).
    std::pair<int, int> offset(int j) const;
    // Offsets in units of the dilation.
    static const std::array<std::pair<int, int>, kDirections>& unit_offsets();

    // Explicit (2n+1)×(2n+1) kernel for direction j.
    Tensor kernel(int j) const;
    // Full conv2d filter bank of shape (8·c_in)×c_in×(2n+1)×(2n+1); output
    // channel i*8+j applies kernel j to input channel i.
    Tensor conv_kernels(int64_t c_in) const;

private:
    int dilation_;
};

// Spatially uniform CDC weight matrix, c_out × 8·c_in. Column i*8+j weights
// the difference along direction j of input channel i.
struct StaticCdcWeights {
    Tensor matrix;

    explicit StaticCdcWeights(Tensor m);
    int64_t out_channels() const { return matrix.dim(0); }
    int64_t in_channels() const { return matrix.dim(1) / EdgeKernelBank::kDirections; }
};

// Eight-direction difference features: input c×h×w to output (8c)×h×w where
// channel i*8+j holds neighbor(i,j) - center(i) with zero padding of size n.
// Differentiable.
Tensor diff(const Tensor& image, const EdgeKernelBank& bank);

// (8c)×h×w -> (8c)×(h·w), row-major spatial flattening.
Tensor flatten_tokens(const Tensor& d);

// Weight-matrix form: matmul then reshape back to c_out×h×w.
Tensor apply_static_cdc(const StaticCdcWeights& weights, const Tensor& tokens,
                        int64_t h, int64_t w);

// Literal double sum over channels and directions of w·(neighbor - center),
// zero-padded. Reference path only; does not record gradients.
Tensor cdc_direct(const Tensor& image, const StaticCdcWeights& weights, int dilation);

}  // namespace datn
