#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "datn/errors.hpp"
#include "datn/rng.hpp"

namespace datn {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;   // row-major
    std::vector<double> grad;   // empty until a gradient is accumulated
    bool requires_grad = false;
};

// Dense row-major f64 tensor. A Tensor is a cheap handle onto a shared
// buffer; forward ops produce fresh buffers, gradients accumulate in place.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);  // shape {1}
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& vec() { return impl_->data; }
    const std::vector<double>& vec() const { return impl_->data; }

    // Scalar extraction; requires numel() == 1.
    double value() const;
    // Test convenience: element by multi-index.
    double at(std::initializer_list<int64_t> idx) const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    // Gradient element; 0 when no gradient was ever accumulated.
    double grad_at(int64_t flat) const;
    // Full gradient as a plain tensor (zeros when untouched).
    Tensor grad_tensor() const;
    void zero_grad();

    bool all_finite() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode tape. Constructing a Tape makes it the active recorder for the
// current thread; destruction restores the previous one. Ops append a
// backward closure per recorded node; backward() replays them exactly once in
// reverse order, which is a valid reverse-topological order because nodes are
// appended in execution order.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn);
    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs every node backward once. The loss
    // must be scalar and should have been computed under this tape.
    void backward(const Tensor& loss);

    static Tape* active();

private:
    std::vector<std::function<void()>> nodes_;
    Tape* prev_ = nullptr;
};

// ---- differentiable ops ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Cross-correlation, stride 1, zero padding. Output height is
// h + 2*pad_h - dilation*(kh-1); bias may be an undefined Tensor.
Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& bias,
              int dilation, int pad_h, int pad_w);
Tensor conv2d(const Tensor& x, const Tensor& k, int dilation, int pad);

Tensor softmax(const Tensor& x, int axis);
// Normalizes the whole tensor to mean 0 / variance 1 (one instance slice):
// y = (x - mean) / sqrt(var + eps). Constant input maps to zeros.
Tensor instance_norm(const Tensor& x, double eps);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

// Per-channel multiply: x is c×h×w, gate is length-c. The explicit form of
// broadcasting a channel gate over space.
Tensor channel_scale(const Tensor& x, const Tensor& gate);

Tensor reshape(const Tensor& x, Shape target);
Tensor concat(const std::vector<Tensor>& parts, int axis);

Tensor sum(const Tensor& x);         // -> shape {1}
Tensor mean(const Tensor& x);        // -> shape {1}
Tensor reduce_max(const Tensor& x);  // -> shape {1}; grad routes to first max

Tensor global_avg_pool(const Tensor& x);   // c×h×w -> c
Tensor max_pool2(const Tensor& x);         // c×h×w -> c×h/2×w/2, h,w even
Tensor upsample_nearest2(const Tensor& x); // c×h×w -> c×2h×2w

// ---- op-internal parallelism ----------------------------------------------

// Thread cap for internal op parallelism, from DATN_THREADS (default 1).
int op_threads();
// Splits [0,n) into contiguous ranges over at most op_threads() threads.
// Callers must only write disjoint outputs per range, so results are
// identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace datn
