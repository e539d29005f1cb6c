#include "datn/edgecdc.hpp"

#include <cmath>

namespace datn {

namespace {
constexpr std::array<std::pair<int, int>, EdgeKernelBank::kDirections> kUnitOffsets = {{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};
}

EdgeKernelBank::EdgeKernelBank(int dilation) : dilation_(dilation) {
    if (dilation < 1) throw ValueError("EdgeKernelBank dilation must be >= 1");
}

const std::array<std::pair<int, int>, EdgeKernelBank::kDirections>&
EdgeKernelBank::unit_offsets() {
    return kUnitOffsets;
}

std::pair<int, int> EdgeKernelBank::offset(int j) const {
    if (j < 0 || j >= kDirections) throw ValueError("direction index out of range");
    return {kUnitOffsets[static_cast<size_t>(j)].first * dilation_,
            kUnitOffsets[static_cast<size_t>(j)].second * dilation_};
}

Tensor EdgeKernelBank::kernel(int j) const {
    int k = 2 * dilation_ + 1;
    Tensor t = Tensor::zeros({k, k});
    auto [dr, dc] = offset(j);
    t.data()[(dilation_ + dr) * k + (dilation_ + dc)] += 1.0;
    t.data()[dilation_ * k + dilation_] -= 1.0;
    return t;
}

Tensor EdgeKernelBank::conv_kernels(int64_t c_in) const {
    int64_t k = 2 * dilation_ + 1;
    Tensor t = Tensor::zeros({kDirections * c_in, c_in, k, k});
    for (int64_t ci = 0; ci < c_in; ++ci) {
        for (int j = 0; j < kDirections; ++j) {
            auto [dr, dc] = offset(j);
            int64_t out_ch = ci * kDirections + j;
            double* plane = t.data() + ((out_ch * c_in + ci) * k) * k;
            plane[(dilation_ + dr) * k + (dilation_ + dc)] += 1.0;
            plane[dilation_ * k + dilation_] -= 1.0;
        }
    }
    return t;
}

StaticCdcWeights::StaticCdcWeights(Tensor m) : matrix(std::move(m)) {
    if (!matrix.defined() || matrix.rank() != 2) {
        throw ShapeError("StaticCdcWeights matrix must be rank 2");
    }
    if (matrix.dim(1) % EdgeKernelBank::kDirections != 0) {
        throw ShapeError("StaticCdcWeights column count must be a multiple of 8, got " +
                         shape_str(matrix.shape()));
    }
    if (!matrix.all_finite()) throw ValueError("StaticCdcWeights entries must be finite");
}

Tensor diff(const Tensor& image, const EdgeKernelBank& bank) {
    if (image.rank() != 3) {
        throw ShapeError("diff input must be c×h×w, got " + shape_str(image.shape()));
    }
    int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    constexpr int kd = EdgeKernelBank::kDirections;
    Tensor out = Tensor::zeros({kd * c, h, w});
    const double* xp = image.data();
    double* op = out.data();

    parallel_for(c, [&, xp, op, h, w](int64_t lo, int64_t hi) {
        for (int64_t ci = lo; ci < hi; ++ci) {
            const double* plane = xp + ci * h * w;
            for (int j = 0; j < kd; ++j) {
                auto [dr, dc] = bank.offset(j);
                double* oplane = op + (ci * kd + j) * h * w;
                for (int64_t y = 0; y < h; ++y) {
                    int64_t ny = y + dr;
                    bool row_in = ny >= 0 && ny < h;
                    for (int64_t x = 0; x < w; ++x) {
                        int64_t nx = x + dc;
                        double b = (row_in && nx >= 0 && nx < w) ? plane[ny * w + nx] : 0.0;
                        oplane[y * w + x] = b - plane[y * w + x];
                    }
                }
            }
        }
    });

    if (Tape::active() && image.requires_grad()) {
        auto xi = image.impl();
        auto oi = out.impl();
        std::array<std::pair<int, int>, kd> offs;
        for (int j = 0; j < kd; ++j) offs[static_cast<size_t>(j)] = bank.offset(j);
        out.set_requires_grad(true);
        Tape::active()->record([xi, oi, offs, c, h, w] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            if (xi->grad.empty()) xi->grad.assign(xi->data.size(), 0.0);
            double* gx = xi->grad.data();
            const double* g = oi->grad.data();
            for (int64_t ci = 0; ci < c; ++ci) {
                double* gplane = gx + ci * h * w;
                for (int j = 0; j < kd; ++j) {
                    auto [dr, dc] = offs[static_cast<size_t>(j)];
                    const double* go = g + (ci * kd + j) * h * w;
                    for (int64_t y = 0; y < h; ++y) {
                        for (int64_t x = 0; x < w; ++x) {
                            double gv = go[y * w + x];
                            gplane[y * w + x] -= gv;
                            int64_t ny = y + dr, nx = x + dc;
                            if (ny >= 0 && ny < h && nx >= 0 && nx < w) {
                                gplane[ny * w + nx] += gv;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor flatten_tokens(const Tensor& d) {
    if (d.rank() != 3) {
        throw ShapeError("flatten_tokens input must be c×h×w, got " + shape_str(d.shape()));
    }
    return reshape(d, {d.dim(0), d.dim(1) * d.dim(2)});
}

Tensor apply_static_cdc(const StaticCdcWeights& weights, const Tensor& tokens,
                        int64_t h, int64_t w) {
    if (tokens.rank() != 2) {
        throw ShapeError("apply_static_cdc tokens must be rank 2, got " +
                         shape_str(tokens.shape()));
    }
    if (weights.matrix.dim(1) != tokens.dim(0)) {
        throw ShapeError("apply_static_cdc: weight columns " + shape_str(weights.matrix.shape()) +
                         " do not match token rows " + shape_str(tokens.shape()));
    }
    if (tokens.dim(1) != h * w) {
        throw ShapeError("apply_static_cdc: token columns " + std::to_string(tokens.dim(1)) +
                         " do not match h·w = " + std::to_string(h * w));
    }
    return reshape(matmul(weights.matrix, tokens), {weights.out_channels(), h, w});
}

Tensor cdc_direct(const Tensor& image, const StaticCdcWeights& weights, int dilation) {
    if (image.rank() != 3) {
        throw ShapeError("cdc_direct input must be c×h×w, got " + shape_str(image.shape()));
    }
    EdgeKernelBank bank(dilation);
    int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    constexpr int kd = EdgeKernelBank::kDirections;
    if (weights.in_channels() != c) {
        throw ShapeError("cdc_direct: weights expect " + std::to_string(weights.in_channels()) +
                         " input channels, image has " + std::to_string(c));
    }
    int64_t co = weights.out_channels();
    Tensor out = Tensor::zeros({co, h, w});
    const double* xp = image.data();
    const double* mw = weights.matrix.data();
    double* op = out.data();

    for (int64_t oc = 0; oc < co; ++oc) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int64_t ci = 0; ci < c; ++ci) {
                    const double* plane = xp + ci * h * w;
                    double center = plane[y * w + x];
                    for (int j = 0; j < kd; ++j) {
                        auto [dr, dc] = bank.offset(j);
                        int64_t ny = y + dr, nx = x + dc;
                        double b = (ny >= 0 && ny < h && nx >= 0 && nx < w)
                                       ? plane[ny * w + nx]
                                       : 0.0;
                        acc += mw[oc * (kd * c) + ci * kd + j] * (b - center);
                    }
                }
                op[(oc * h + y) * w + x] = acc;
            }
        }
    }
    return out;
}

}  // namespace datn
