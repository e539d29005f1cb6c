#include "datn/gfem.hpp"

namespace datn {

NonLocalBlock::NonLocalBlock(int64_t channels, int64_t reduced, bool residual_, Rng& rng)
    : residual(residual_), channels_(channels), reduced_(reduced) {
    if (reduced < 1 || reduced > channels) {
        throw ConfigError("NonLocalBlock reduced channels must be in [1, c], got " +
                          std::to_string(reduced) + " for c = " + std::to_string(channels));
    }
    reduce_q = Conv2dLayer(channels, reduced, 1, 1, 0, rng);
    reduce_k = Conv2dLayer(channels, reduced, 1, 1, 0, rng);
    reduce_v = Conv2dLayer(channels, reduced, 1, 1, 0, rng);
    expand = Conv2dLayer(reduced, channels, 1, 1, 0, rng);
}

Tensor NonLocalBlock::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != channels_) {
        throw ShapeError("NonLocalBlock expects " + std::to_string(channels_) +
                         "×h×w input, got " + shape_str(x.shape()));
    }
    int64_t h = x.dim(1), w = x.dim(2);
    int64_t hw = h * w;
    Tensor q = reshape(reduce_q.forward(x), {reduced_, hw});
    Tensor k = reshape(reduce_k.forward(x), {reduced_, hw});
    Tensor v = reshape(reduce_v.forward(x), {reduced_, hw});
    // A[p, q] attends query position p to key position q; rows sum to 1.
    Tensor attn = softmax(matmul(transpose(q), k), 1);
    Tensor y = expand.forward(reshape(matmul(v, transpose(attn)), {reduced_, h, w}));
    return residual ? add(y, x) : y;
}

void NonLocalBlock::collect_params(ParamList& out, const std::string& prefix) const {
    reduce_q.collect_params(out, prefix + ".q");
    reduce_k.collect_params(out, prefix + ".k");
    reduce_v.collect_params(out, prefix + ".v");
    expand.collect_params(out, prefix + ".expand");
}

int64_t NonLocalBlock::param_count() const {
    return reduce_q.param_count() + reduce_k.param_count() + reduce_v.param_count() +
           expand.param_count();
}

SEBlock::SEBlock(int64_t channels, int64_t ratio, Rng& rng) : channels_(channels) {
    if (ratio < 1 || channels % ratio != 0) {
        throw ConfigError("SEBlock: channels = " + std::to_string(channels) +
                          " must be divisible by ratio = " + std::to_string(ratio));
    }
    fc1 = LinearLayer(channels, channels / ratio, rng);
    fc2 = LinearLayer(channels / ratio, channels, rng);
}

Tensor SEBlock::gate(const Tensor& x) const {
    return sigmoid(fc2.forward(relu(fc1.forward(global_avg_pool(x)))));
}

Tensor SEBlock::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != channels_) {
        throw ShapeError("SEBlock expects " + std::to_string(channels_) + "×h×w input, got " +
                         shape_str(x.shape()));
    }
    return channel_scale(x, gate(x));
}

void SEBlock::collect_params(ParamList& out, const std::string& prefix) const {
    fc1.collect_params(out, prefix + ".fc1");
    fc2.collect_params(out, prefix + ".fc2");
}

int64_t SEBlock::param_count() const { return fc1.param_count() + fc2.param_count(); }

GfemLayer::GfemLayer(int64_t channels, const GfemOptions& options, Rng& rng)
    : channels_(channels) {
    if (!options.enable_nonlocal && !options.enable_se) {
        throw ConfigError("GfemLayer requires at least one enabled branch");
    }
    if (options.enable_nonlocal) {
        int64_t reduced = std::max<int64_t>(1, channels / options.nonlocal_reduce);
        non_local.emplace(channels, reduced, options.nonlocal_residual, rng);
    }
    if (options.enable_se) se.emplace(channels, options.se_ratio, rng);
    fuse = Conv2dLayer(2 * channels, channels, 1, 1, 0, rng);
}

Tensor GfemLayer::forward(const Tensor& x) const {
    Tensor spatial = non_local ? non_local->forward(x) : x;
    Tensor channel = se ? se->forward(x) : x;
    return fuse.forward(concat({spatial, channel}, 0));
}

void GfemLayer::collect_params(ParamList& out, const std::string& prefix) const {
    if (non_local) non_local->collect_params(out, prefix + ".nl");
    if (se) se->collect_params(out, prefix + ".se");
    fuse.collect_params(out, prefix + ".fuse");
}

int64_t GfemLayer::param_count() const {
    int64_t n = fuse.param_count();
    if (non_local) n += non_local->param_count();
    if (se) n += se->param_count();
    return n;
}

}  // namespace datn
