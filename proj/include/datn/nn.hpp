#pragma once

#include <string>
#include <vector>

#include "datn/tensor.hpp"

namespace datn {

struct NamedParam {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

inline Tensor init_uniform(Shape shape, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::uniform(std::move(shape), rng, -bound, bound);
    t.set_requires_grad(true);
    return t;
}

// Plain convolution layer (stride 1, square kernel, zero padding).
struct Conv2dLayer {
    Tensor weight;  // co×ci×k×k
    Tensor bias;    // co
    int dilation = 1;
    int pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int64_t c_in, int64_t c_out, int64_t k, int dilation_, int pad_, Rng& rng)
        : dilation(dilation_), pad(pad_) {
        weight = init_uniform({c_out, c_in, k, k}, c_in * k * k, rng);
        bias = Tensor::zeros({c_out});
        bias.set_requires_grad(true);
    }

    Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, dilation, pad, pad); }

    void collect_params(ParamList& out, const std::string& prefix) const {
        out.push_back({prefix + ".w", weight});
        out.push_back({prefix + ".b", bias});
    }
    int64_t param_count() const { return weight.numel() + bias.numel(); }
};

// Fully connected layer on a rank-1 vector.
struct LinearLayer {
    Tensor weight;  // out×in
    Tensor bias;    // out

    LinearLayer() = default;
    LinearLayer(int64_t in, int64_t out_features, Rng& rng) {
        weight = init_uniform({out_features, in}, in, rng);
        bias = Tensor::zeros({out_features});
        bias.set_requires_grad(true);
    }

    Tensor forward(const Tensor& x) const {
        Tensor col = reshape(x, {x.numel(), 1});
        Tensor y = matmul(weight, col);
        Tensor b = reshape(bias, {bias.numel(), 1});
        return reshape(add(y, b), {weight.dim(0)});
    }

    void collect_params(ParamList& out, const std::string& prefix) const {
        out.push_back({prefix + ".w", weight});
        out.push_back({prefix + ".b", bias});
    }
    int64_t param_count() const { return weight.numel() + bias.numel(); }
};

}  // namespace datn
