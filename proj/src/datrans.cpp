#include "datn/datrans.hpp"

namespace datn {

namespace {
constexpr double kNormEps = 1e-5;
}

DATransHead::DATransHead(int64_t c_in, int64_t c_out, int64_t head_count, int dilation,
                         Rng& rng)
    : c_in_(c_in), dilation_(dilation) {
    if (c_in < 1 || c_out < 1 || head_count < 1) {
        throw ConfigError("DATransHead channel and head counts must be positive");
    }
    if (dilation < 1) throw ConfigError("DATransHead dilation must be positive");
    if (c_out % head_count != 0) {
        throw ConfigError("DATransHead: c_out = " + std::to_string(c_out) +
                          " not divisible by head count " + std::to_string(head_count));
    }
    int64_t tokens = EdgeKernelBank::kDirections * c_in;
    if (tokens % head_count != 0) {
        throw ConfigError("DATransHead: 8·c_in = " + std::to_string(tokens) +
                          " not divisible by head count " + std::to_string(head_count));
    }
    wq = init_uniform({c_out / head_count, c_in}, c_in, rng);
    wk = init_uniform({tokens / head_count, tokens}, tokens, rng);
    wv = init_uniform({tokens / head_count, tokens}, tokens, rng);
}

Tensor DATransHead::attention(const Tensor& image, const Tensor& tokens) const {
    int64_t w = image.dim(2);
    Tensor queries = matmul(wq, reshape(image, {c_in_, image.dim(1) * image.dim(2)}));
    Tensor keys = matmul(wk, tokens);
    Tensor sim = scale(matmul(queries, transpose(keys)), 1.0 / static_cast<double>(w));
    return softmax(instance_norm(sim, kNormEps), 1);
}

Tensor DATransHead::forward(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != c_in_) {
        throw ShapeError("DATransHead expects " + std::to_string(c_in_) +
                         "×h×w input, got " + shape_str(image.shape()));
    }
    Tensor tokens = flatten_tokens(diff(image, EdgeKernelBank(dilation_)));
    Tensor attn = attention(image, tokens);
    Tensor values = matmul(wv, tokens);
    return matmul(attn, values);
}

Tensor DATransHead::dynamic_matrix(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != c_in_) {
        throw ShapeError("DATransHead expects " + std::to_string(c_in_) +
                         "×h×w input, got " + shape_str(image.shape()));
    }
    Tensor tokens = flatten_tokens(diff(image, EdgeKernelBank(dilation_)));
    return matmul(attention(image, tokens), wv);
}

void DATransHead::collect_params(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".wq", wq});
    out.push_back({prefix + ".wk", wk});
    out.push_back({prefix + ".wv", wv});
}

int64_t DATransHead::param_count() const {
    return wq.numel() + wk.numel() + wv.numel();
}

DATransLayer::DATransLayer(int64_t c_in, int64_t c_out, const std::vector<int>& dilations,
                           Rng& rng)
    : c_out_(c_out) {
    if (dilations.empty()) throw ConfigError("DATransLayer needs at least one head dilation");
    int64_t m = static_cast<int64_t>(dilations.size());
    heads.reserve(dilations.size());
    for (int d : dilations) heads.emplace_back(c_in, c_out, m, d, rng);
    fuse = Conv2dLayer(c_out, c_out, 1, 1, 0, rng);
}

Tensor DATransLayer::forward(const Tensor& image) const {
    int64_t h = image.dim(1), w = image.dim(2);
    std::vector<Tensor> outs;
    outs.reserve(heads.size());
    for (const DATransHead& head : heads) outs.push_back(head.forward(image));
    Tensor merged = concat(outs, 0);
    return fuse.forward(reshape(merged, {c_out_, h, w}));
}

void DATransLayer::collect_params(ParamList& out, const std::string& prefix) const {
    for (size_t i = 0; i < heads.size(); ++i) {
        heads[i].collect_params(out, prefix + ".head" + std::to_string(i));
    }
    fuse.collect_params(out, prefix + ".fuse");
}

int64_t DATransLayer::param_count() const {
    int64_t n = fuse.param_count();
    for (const DATransHead& head : heads) n += head.param_count();
    return n;
}

}  // namespace datn
