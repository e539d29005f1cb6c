#include "datn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace datn {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

static void check_shape_valid(const Shape& s) {
    for (int64_t e : s) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(s));
    }
}

Tensor Tensor::zeros(Shape shape) {
    check_shape_valid(shape);
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
    impl->shape = std::move(shape);
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.vec().begin(), t.vec().end(), value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    check_shape_valid(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

double Tensor::value() const {
    if (numel() != 1) {
        throw ValueError("value() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    const Shape& s = impl_->shape;
    if (idx.size() != s.size()) throw ShapeError("index rank mismatch");
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : idx) {
        flat = flat * s[d] + i;
        ++d;
    }
    return impl_->data[static_cast<size_t>(flat)];
}

double Tensor::grad_at(int64_t flat) const {
    if (impl_->grad.empty()) return 0.0;
    return impl_->grad[static_cast<size_t>(flat)];
}

Tensor Tensor::grad_tensor() const {
    if (impl_->grad.empty()) return Tensor::zeros(impl_->shape);
    return Tensor::from(impl_->shape, impl_->grad);
}

void Tensor::zero_grad() { impl_->grad.clear(); }

bool Tensor::all_finite() const {
    for (double v : impl_->data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---- tape ------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;

std::vector<double>& grad_buf(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
    return t.grad;
}
}  // namespace

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ValueError("backward requires a scalar loss, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    grad_buf(*loss.impl())[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// ---- parallel helpers --------------------------------------------------------

int op_threads() {
    static int n = [] {
        const char* e = std::getenv("DATN_THREADS");
        int v = e ? std::atoi(e) : 1;
        return std::clamp(v, 1, 64);
    }();
    return n;
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    int threads = op_threads();
    if (threads <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    int64_t workers = std::min<int64_t>(threads, n);
    int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int64_t w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

// ---- op plumbing -------------------------------------------------------------

namespace {

bool should_trace(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

void mark_and_record(Tensor& out, std::function<void()> fn) {
    out.set_requires_grad(true);
    Tape::active()->record(std::move(fn));
}

// C[m×n] += A[m×k] · B[k×n]
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    parallel_for(m, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const double* arow = a + i * k;
            double* crow = c + i * n;
            for (int64_t p = 0; p < k; ++p) {
                double av = arow[p];
                const double* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[m×k] += G[m×n] · B[k×n]^T
void mm_nt(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k) {
    parallel_for(m, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const double* grow = g + i * n;
            double* crow = c + i * k;
            for (int64_t p = 0; p < k; ++p) {
                const double* brow = b + p * n;
                double acc = 0.0;
                for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                crow[p] += acc;
            }
        }
    });
}

// C[k×n] += A[m×k]^T · G[m×n]
void mm_tn(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n) {
    parallel_for(k, [=](int64_t lo, int64_t hi) {
        for (int64_t p = lo; p < hi; ++p) {
            double* crow = c + p * n;
            for (int64_t i = 0; i < m; ++i) {
                double av = a[i * k + p];
                const double* grow = g + i * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * grow[j];
            }
        }
    });
}

}  // namespace

// ---- matmul / transpose -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    mm_nn(a.data(), b.data(), out.data(), m, k, n);

    if (should_trace({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        mark_and_record(out, [ai, bi, oi, m, k, n] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (ai->requires_grad) mm_nt(g, bi->data.data(), grad_buf(*ai).data(), m, n, k);
            if (bi->requires_grad) mm_tn(ai->data.data(), g, grad_buf(*bi).data(), m, k, n);
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects rank-2, got " + shape_str(a.shape()));
    int64_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    const double* src = a.data();
    double* dst = out.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];

    if (should_trace({&a})) {
        auto ai = a.impl(), oi = out.impl();
        mark_and_record(out, [ai, oi, m, n] {
            if (oi->grad.empty()) return;
            if (!ai->requires_grad) return;
            double* ga = grad_buf(*ai).data();
            const double* go = oi->grad.data();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
        });
    }
    return out;
}

// ---- conv2d -------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& bias,
              int dilation, int pad_h, int pad_w) {
    if (x.rank() != 3) throw ShapeError("conv2d input must be c×h×w, got " + shape_str(x.shape()));
    if (k.rank() != 4) {
        throw ShapeError("conv2d kernel must be co×ci×kh×kw, got " + shape_str(k.shape()));
    }
    if (dilation < 1) throw ValueError("conv2d dilation must be >= 1");
    if (pad_h < 0 || pad_w < 0) throw ValueError("conv2d padding must be >= 0");
    int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
    int64_t co = k.dim(0), kci = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    if (ci != kci) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                         " vs kernel " + shape_str(k.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co)) {
        throw ShapeError("conv2d bias must be length " + std::to_string(co) + ", got " +
                         shape_str(bias.shape()));
    }
    int64_t ho = h + 2 * pad_h - static_cast<int64_t>(dilation) * (kh - 1);
    int64_t wo = w + 2 * pad_w - static_cast<int64_t>(dilation) * (kw - 1);
    if (ho < 1 || wo < 1) {
        throw ShapeError("conv2d kernel footprint exceeds padded input: input " +
                         shape_str(x.shape()) + ", kernel " + shape_str(k.shape()) +
                         ", dilation " + std::to_string(dilation));
    }

    Tensor out = Tensor::zeros({co, ho, wo});
    const double* xp = x.data();
    const double* kp = k.data();
    const double* bp = bias.defined() ? bias.data() : nullptr;
    double* op = out.data();
    int64_t d = dilation;

    parallel_for(co, [=](int64_t lo, int64_t hi) {
        for (int64_t o = lo; o < hi; ++o) {
            double b = bp ? bp[o] : 0.0;
            for (int64_t oy = 0; oy < ho; ++oy) {
                for (int64_t ox = 0; ox < wo; ++ox) {
                    double acc = b;
                    for (int64_t c = 0; c < ci; ++c) {
                        const double* xc = xp + c * h * w;
                        const double* kc = kp + ((o * ci + c) * kh) * kw;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            int64_t iy = oy - pad_h + d * ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                int64_t ix = ox - pad_w + d * kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += xc[iy * w + ix] * kc[ky * kw + kx];
                            }
                        }
                    }
                    op[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
    });

    if (should_trace({&x, &k, &bias})) {
        auto xi = x.impl(), ki = k.impl(), oi = out.impl();
        auto bi = bias.defined() ? bias.impl() : nullptr;
        mark_and_record(out, [=] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (xi->requires_grad) {
                double* gx = grad_buf(*xi).data();
                const double* kp2 = ki->data.data();
                parallel_for(ci, [=](int64_t clo, int64_t chi) {
                    for (int64_t c = clo; c < chi; ++c) {
                        double* gxc = gx + c * h * w;
                        for (int64_t o = 0; o < co; ++o) {
                            const double* go = g + o * ho * wo;
                            const double* kc = kp2 + ((o * ci + c) * kh) * kw;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    double kv = kc[ky * kw + kx];
                                    if (kv == 0.0) continue;
                                    for (int64_t oy = 0; oy < ho; ++oy) {
                                        int64_t iy = oy - pad_h + d * ky;
                                        if (iy < 0 || iy >= h) continue;
                                        for (int64_t ox = 0; ox < wo; ++ox) {
                                            int64_t ix = ox - pad_w + d * kx;
                                            if (ix < 0 || ix >= w) continue;
                                            gxc[iy * w + ix] += kv * go[oy * wo + ox];
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
            }
            if (ki->requires_grad) {
                double* gk = grad_buf(*ki).data();
                const double* xp2 = xi->data.data();
                parallel_for(co, [=](int64_t olo, int64_t ohi) {
                    for (int64_t o = olo; o < ohi; ++o) {
                        const double* go = g + o * ho * wo;
                        for (int64_t c = 0; c < ci; ++c) {
                            const double* xc = xp2 + c * h * w;
                            double* gkc = gk + ((o * ci + c) * kh) * kw;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    double acc = 0.0;
                                    for (int64_t oy = 0; oy < ho; ++oy) {
                                        int64_t iy = oy - pad_h + d * ky;
                                        if (iy < 0 || iy >= h) continue;
                                        for (int64_t ox = 0; ox < wo; ++ox) {
                                            int64_t ix = ox - pad_w + d * kx;
                                            if (ix < 0 || ix >= w) continue;
                                            acc += go[oy * wo + ox] * xc[iy * w + ix];
                                        }
                                    }
                                    gkc[ky * kw + kx] += acc;
                                }
                            }
                        }
                    }
                });
            }
            if (bi && bi->requires_grad) {
                double* gb = grad_buf(*bi).data();
                for (int64_t o = 0; o < co; ++o) {
                    const double* go = g + o * ho * wo;
                    double acc = 0.0;
                    for (int64_t i = 0; i < ho * wo; ++i) acc += go[i];
                    gb[o] += acc;
                }
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& k, int dilation, int pad) {
    return conv2d(x, k, Tensor(), dilation, pad, pad);
}

// ---- softmax / instance norm ---------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    int64_t extent = s[static_cast<size_t>(axis)];
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= s[static_cast<size_t>(i)];
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];

    Tensor out = Tensor::zeros(s);
    const double* xp = x.data();
    double* op = out.data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * extent * inner + in;
            double mx = xp[base];
            for (int64_t e = 1; e < extent; ++e) mx = std::max(mx, xp[base + e * inner]);
            double denom = 0.0;
            for (int64_t e = 0; e < extent; ++e) {
                double v = std::exp(xp[base + e * inner] - mx);
                op[base + e * inner] = v;
                denom += v;
            }
            for (int64_t e = 0; e < extent; ++e) op[base + e * inner] /= denom;
        }
    }

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, outer, inner, extent] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            const double* y = oi->data.data();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    int64_t base = o * extent * inner + in;
                    double dot = 0.0;
                    for (int64_t e = 0; e < extent; ++e) {
                        int64_t i = base + e * inner;
                        dot += g[i] * y[i];
                    }
                    for (int64_t e = 0; e < extent; ++e) {
                        int64_t i = base + e * inner;
                        gx[i] += y[i] * (g[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor instance_norm(const Tensor& x, double eps) {
    int64_t n = x.numel();
    if (n < 2) {
        throw ShapeError("instance_norm needs at least 2 elements, got shape " +
                         shape_str(x.shape()));
    }
    if (eps <= 0.0) throw ValueError("instance_norm eps must be positive");
    const double* xp = x.data();
    double mu = 0.0;
    for (int64_t i = 0; i < n; ++i) mu += xp[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double dv = xp[i] - mu;
        var += dv * dv;
    }
    var /= static_cast<double>(n);
    double inv_std = 1.0 / std::sqrt(var + eps);

    Tensor out = Tensor::zeros(x.shape());
    double* op = out.data();
    for (int64_t i = 0; i < n; ++i) op[i] = (xp[i] - mu) * inv_std;

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n, inv_std] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            const double* y = oi->data.data();
            double gbar = 0.0, gy = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                gbar += g[i];
                gy += g[i] * y[i];
            }
            gbar /= static_cast<double>(n);
            gy /= static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) gx[i] += inv_std * (g[i] - gbar - y[i] * gy);
        });
    }
    return out;
}

// ---- activations ----------------------------------------------------------------

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    int64_t n = x.numel();
    const double* xp = x.data();
    double* op = out.data();
    for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > 0.0 ? xp[i] : 0.0;

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            const double* xp2 = xi->data.data();
            for (int64_t i = 0; i < n; ++i) {
                if (xp2[i] > 0.0) gx[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    int64_t n = x.numel();
    const double* xp = x.data();
    double* op = out.data();
    for (int64_t i = 0; i < n; ++i) {
        double v = xp[i];
        op[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                         : std::exp(v) / (1.0 + std::exp(v));
    }

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            const double* y = oi->data.data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }
    return out;
}

// ---- elementwise binary/scalar ----------------------------------------------------

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " requires equal shapes, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];

    if (should_trace({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        mark_and_record(out, [ai, bi, oi, n] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (ai->requires_grad) {
                double* ga = grad_buf(*ai).data();
                for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (bi->requires_grad) {
                double* gb = grad_buf(*bi).data();
                for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];

    if (should_trace({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        mark_and_record(out, [ai, bi, oi, n] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (ai->requires_grad) {
                double* ga = grad_buf(*ai).data();
                for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (bi->requires_grad) {
                double* gb = grad_buf(*bi).data();
                for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];

    if (should_trace({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        mark_and_record(out, [ai, bi, oi, n] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (ai->requires_grad) {
                double* ga = grad_buf(*ai).data();
                const double* bp = bi->data.data();
                for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * bp[i];
            }
            if (bi->requires_grad) {
                double* gb = grad_buf(*bi).data();
                const double* ap = ai->data.data();
                for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * ap[i];
            }
        });
    }
    return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    Tensor out = Tensor::zeros(a.shape());
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] / b.data()[i];

    if (should_trace({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        mark_and_record(out, [ai, bi, oi, n] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            const double* ap = ai->data.data();
            const double* bp = bi->data.data();
            if (ai->requires_grad) {
                double* ga = grad_buf(*ai).data();
                for (int64_t i = 0; i < n; ++i) ga[i] += g[i] / bp[i];
            }
            if (bi->requires_grad) {
                double* gb = grad_buf(*bi).data();
                for (int64_t i = 0; i < n; ++i) gb[i] -= g[i] * ap[i] / (bp[i] * bp[i]);
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n, c] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * c;
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] + c;

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
    if (x.rank() != 3) {
        throw ShapeError("channel_scale input must be c×h×w, got " + shape_str(x.shape()));
    }
    if (gate.rank() != 1 || gate.dim(0) != x.dim(0)) {
        throw ShapeError("channel_scale gate must be length " + std::to_string(x.dim(0)) +
                         ", got " + shape_str(gate.shape()));
    }
    int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t ch = 0; ch < c; ++ch) {
        double gv = gate.data()[ch];
        const double* xc = x.data() + ch * hw;
        double* oc = out.data() + ch * hw;
        for (int64_t i = 0; i < hw; ++i) oc[i] = xc[i] * gv;
    }

    if (should_trace({&x, &gate})) {
        auto xi = x.impl(), gi = gate.impl(), oi = out.impl();
        mark_and_record(out, [xi, gi, oi, c, hw] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (xi->requires_grad) {
                double* gx = grad_buf(*xi).data();
                const double* gv = gi->data.data();
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < hw; ++i) gx[ch * hw + i] += g[ch * hw + i] * gv[ch];
            }
            if (gi->requires_grad) {
                double* gg = grad_buf(*gi).data();
                const double* xp = xi->data.data();
                for (int64_t ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < hw; ++i) acc += g[ch * hw + i] * xp[ch * hw + i];
                    gg[ch] += acc;
                }
            }
        });
    }
    return out;
}

// ---- reshape / concat --------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape target) {
    check_shape_valid(target);
    if (shape_numel(target) != x.numel()) {
        throw ShapeError("reshape cannot map " + shape_str(x.shape()) + " (" +
                         std::to_string(x.numel()) + " elements) to " + shape_str(target));
    }
    Tensor out = Tensor::from(std::move(target), x.vec());

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        int64_t n = x.numel();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ValueError("concat requires at least one tensor");
    const Shape& s0 = parts[0].shape();
    int rank = parts[0].rank();
    if (axis < 0 || axis >= rank) {
        throw ShapeError("concat axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(s0));
    }
    int64_t axis_total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) throw ShapeError("concat rank mismatch");
        for (int i = 0; i < rank; ++i) {
            if (i != axis && p.dim(i) != s0[static_cast<size_t>(i)]) {
                throw ShapeError("concat shapes disagree off axis: " + shape_str(s0) + " vs " +
                                 shape_str(p.shape()));
            }
        }
        axis_total += p.dim(axis);
    }
    Shape out_shape = s0;
    out_shape[static_cast<size_t>(axis)] = axis_total;

    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= s0[static_cast<size_t>(i)];
    for (int i = 0; i < axis; ++i) outer *= s0[static_cast<size_t>(i)];

    Tensor out = Tensor::zeros(out_shape);
    double* op = out.data();
    int64_t offset = 0;
    for (const Tensor& p : parts) {
        int64_t ext = p.dim(axis);
        const double* pp = p.data();
        for (int64_t o = 0; o < outer; ++o) {
            std::copy(pp + o * ext * inner, pp + (o + 1) * ext * inner,
                      op + (o * axis_total + offset) * inner);
        }
        offset += ext;
    }

    bool trace = false;
    if (Tape::active()) {
        for (const Tensor& p : parts) trace = trace || p.requires_grad();
    }
    if (trace) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        std::vector<int64_t> extents;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            extents.push_back(p.dim(axis));
        }
        auto oi = out.impl();
        mark_and_record(out, [impls, extents, oi, outer, inner, axis_total] {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            int64_t off = 0;
            for (size_t pi = 0; pi < impls.size(); ++pi) {
                int64_t ext = extents[pi];
                if (impls[pi]->requires_grad) {
                    double* gp = grad_buf(*impls[pi]).data();
                    for (int64_t o = 0; o < outer; ++o) {
                        const double* src = g + (o * axis_total + off) * inner;
                        double* dst = gp + o * ext * inner;
                        for (int64_t i = 0; i < ext * inner; ++i) dst[i] += src[i];
                    }
                }
                off += ext;
            }
        });
    }
    return out;
}

// ---- reductions ------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc);

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double g = oi->grad[0];
            double* gx = grad_buf(*xi).data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    int64_t n = x.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, n] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double g = oi->grad[0] / static_cast<double>(n);
            double* gx = grad_buf(*xi).data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor reduce_max(const Tensor& x) {
    int64_t n = x.numel();
    int64_t arg = 0;
    double best = x.data()[0];
    for (int64_t i = 1; i < n; ++i) {
        if (x.data()[i] > best) {
            best = x.data()[i];
            arg = i;
        }
    }
    Tensor out = Tensor::scalar(best);

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, arg] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            grad_buf(*xi)[static_cast<size_t>(arg)] += oi->grad[0];
        });
    }
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("global_avg_pool input must be c×h×w, got " + shape_str(x.shape()));
    }
    int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = Tensor::zeros({c});
    for (int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* xc = x.data() + ch * hw;
        for (int64_t i = 0; i < hw; ++i) acc += xc[i];
        out.data()[ch] = acc / static_cast<double>(hw);
    }

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, c, hw] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            for (int64_t ch = 0; ch < c; ++ch) {
                double g = oi->grad[static_cast<size_t>(ch)] / static_cast<double>(hw);
                for (int64_t i = 0; i < hw; ++i) gx[ch * hw + i] += g;
            }
        });
    }
    return out;
}

Tensor max_pool2(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("max_pool2 input must be c×h×w, got " + shape_str(x.shape()));
    int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("max_pool2 requires even spatial extents (multiple of 2), got " +
                         shape_str(x.shape()));
    }
    int64_t ho = h / 2, wo = w / 2;
    Tensor out = Tensor::zeros({c, ho, wo});
    std::vector<int64_t> argmax(static_cast<size_t>(c * ho * wo));
    const double* xp = x.data();
    double* op = out.data();
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox) {
                int64_t best_idx = (ch * h + 2 * oy) * w + 2 * ox;
                double best = xp[best_idx];
                // scan the 2×2 window in row-major order; first max wins
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        int64_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                        if (xp[idx] > best) {
                            best = xp[idx];
                            best_idx = idx;
                        }
                    }
                }
                op[(ch * ho + oy) * wo + ox] = best;
                argmax[static_cast<size_t>((ch * ho + oy) * wo + ox)] = best_idx;
            }
        }
    }

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, argmax = std::move(argmax)] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            for (size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += oi->grad[i];
        });
    }
    return out;
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("upsample_nearest2 input must be c×h×w, got " + shape_str(x.shape()));
    }
    int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::zeros({c, 2 * h, 2 * w});
    const double* xp = x.data();
    double* op = out.data();
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t y = 0; y < 2 * h; ++y) {
            const double* xrow = xp + (ch * h + y / 2) * w;
            double* orow = op + (ch * 2 * h + y) * 2 * w;
            for (int64_t xcol = 0; xcol < 2 * w; ++xcol) orow[xcol] = xrow[xcol / 2];
        }
    }

    if (should_trace({&x})) {
        auto xi = x.impl(), oi = out.impl();
        mark_and_record(out, [xi, oi, c, h, w] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            double* gx = grad_buf(*xi).data();
            const double* g = oi->grad.data();
            for (int64_t ch = 0; ch < c; ++ch) {
                for (int64_t y = 0; y < 2 * h; ++y) {
                    double* grow = gx + (ch * h + y / 2) * w;
                    const double* orow = g + (ch * 2 * h + y) * 2 * w;
                    for (int64_t xcol = 0; xcol < 2 * w; ++xcol) grow[xcol / 2] += orow[xcol];
                }
            }
        });
    }
    return out;
}

}  // namespace datn
