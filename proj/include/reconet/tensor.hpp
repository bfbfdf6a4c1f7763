#pragma once

// Dense channels-first tensors with reverse-mode automatic differentiation.
// Single image per call; no batch dimension. Scalar type is a template
// parameter: float for training/inference, double for gradient checking.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reconet {

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// Assertable debug mode: when on, every op verifies its output is finite.
bool& finite_check_enabled();

template <typename S>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool tracked = false) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        std::size_t n = t.count();
        t.impl_->data.assign(n, S(0));
        t.impl_->tracked = tracked;
        if (tracked) t.impl_->grad.assign(n, S(0));
        return t;
    }

    static Tensor full(std::vector<int> shape, S value, bool tracked = false) {
        Tensor t = zeros(std::move(shape), tracked);
        std::fill(t.data().begin(), t.data().end(), value);
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<S> values, bool tracked = false) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        if (n != values.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " needs " +
                                        std::to_string(n) + " values, got " +
                                        std::to_string(values.size()));
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        t.impl_->tracked = tracked;
        if (tracked) t.impl_->grad.assign(n, S(0));
        return t;
    }

    static Tensor scalar(S value, bool tracked = false) {
        return from_data({1}, {value}, tracked);
    }

    bool valid() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    std::size_t count() const {
        std::size_t n = 1;
        for (int d : impl_->shape) n *= static_cast<std::size_t>(d);
        return n;
    }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    // Tensors are shared handles; data/grad stay mutable through const handles
    // so backward closures can scatter into captured copies.
    std::vector<S>& data() const { return impl_->data; }
    std::vector<S>& grad() const {
        if (!impl_->tracked) throw std::logic_error("tensor: grad requested on untracked tensor");
        return impl_->grad;
    }
    bool tracked() const { return impl_ && impl_->tracked; }

    void zero_grad() {
        if (impl_->tracked) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
    }

    S item() const {
        if (count() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape()));
        return impl_->data[0];
    }

    // Identity of the underlying buffer, used by optimizers as a stable key.
    const void* id() const { return impl_.get(); }

    bool same_shape(const Tensor& o) const { return impl_->shape == o.impl_->shape; }

    // Converts scalar type; result is untracked.
    template <typename T>
    Tensor<T> cast() const {
        std::vector<T> v(count());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(impl_->data[i]);
        return Tensor<T>::from_data(impl_->shape, std::move(v));
    }

private:
    struct Impl {
        std::vector<int> shape;
        std::vector<S> data;
        std::vector<S> grad;  // empty unless tracked
        bool tracked = false;
    };
    std::shared_ptr<Impl> impl_;
};

// Ordered record of differentiable ops executed while the tape was active.
// The newest Tape on a thread is the active one; execution order is already
// topological, so backward() is a single reverse sweep.
template <typename S>
class Tape {
public:
    Tape() : prev_(active_ptr()) { active_ptr() = this; }
    ~Tape() { active_ptr() = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_ptr(); }

    void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

    std::size_t size() const { return ops_.size(); }

    void backward(Tensor<S>& loss) {
        if (loss.count() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
        if (ops_.empty()) throw std::logic_error("backward: tape is empty");
        if (consumed_)
            throw std::logic_error("backward: tape already consumed; reset() before reusing");
        if (loss.tracked()) loss.grad()[0] += S(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        consumed_ = true;
    }

    void reset() {
        ops_.clear();
        consumed_ = false;
    }

private:
    static Tape*& active_ptr() {
        static thread_local Tape* active = nullptr;
        return active;
    }
    Tape* prev_;
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
};

namespace detail {

template <typename S>
bool recording(std::initializer_list<bool> tracked_inputs) {
    if (Tape<S>::active() == nullptr) return false;
    for (bool t : tracked_inputs)
        if (t) return true;
    return false;
}

template <typename S>
void check_finite(const Tensor<S>& t, const char* op) {
    if (!finite_check_enabled()) return;
    for (S v : t.data())
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
}

inline int reflect_index(int i, int n) {
    // Mirror without repeating the edge sample: -1 -> 1, n -> n-2.
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / reduction suite
// ---------------------------------------------------------------------------

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    require_same_shape(a, b, "add");
    bool rec = detail::recording<S>({a.tracked(), b.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (rec)
        Tape<S>::active()->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
            if (b.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i];
        });
    detail::check_finite(out, "add");
    return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    require_same_shape(a, b, "sub");
    bool rec = detail::recording<S>({a.tracked(), b.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (rec)
        Tape<S>::active()->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
            if (b.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] -= g[i];
        });
    detail::check_finite(out, "sub");
    return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    require_same_shape(a, b, "mul");
    bool rec = detail::recording<S>({a.tracked(), b.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (rec)
        Tape<S>::active()->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * b.data()[i];
            if (b.tracked())
                for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i] * a.data()[i];
        });
    detail::check_finite(out, "mul");
    return out;
}

template <typename S>
Tensor<S> mul_scalar(const Tensor<S>& a, S k) {
    bool rec = detail::recording<S>({a.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = a.data()[i] * k;
    if (rec)
        Tape<S>::active()->record([a, out, k]() mutable {
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * k;
        });
    detail::check_finite(out, "mul_scalar");
    return out;
}

template <typename S>
Tensor<S> square(const Tensor<S>& a) {
    return mul(a, a);
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
    bool rec = detail::recording<S>({a.tracked()});
    S acc = std::accumulate(a.data().begin(), a.data().end(), S(0));
    Tensor<S> out = Tensor<S>::from_data({1}, {acc}, rec);
    if (rec)
        Tape<S>::active()->record([a, out]() mutable {
            S g = out.grad()[0];
            for (auto& v : a.grad()) v += g;
        });
    detail::check_finite(out, "sum");
    return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
    return mul_scalar(sum(a), S(1) / static_cast<S>(a.count()));
}

// sum(t * mask) / numel(t); with an all-ones mask this equals mean(t).
template <typename S>
Tensor<S> masked_mean(const Tensor<S>& t, const Tensor<S>& mask) {
    require_same_shape(t, mask, "masked_mean");
    return mul_scalar(sum(mul(t, mask)), S(1) / static_cast<S>(t.count()));
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
    bool rec = detail::recording<S>({a.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = a.data()[i] > S(0) ? a.data()[i] : S(0);
    if (rec)
        Tape<S>::active()->record([a, out]() mutable {
            const auto& g = out.grad();
            // subgradient at 0 is 0
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a.data()[i] > S(0)) a.grad()[i] += g[i];
        });
    return out;
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& a) {
    bool rec = detail::recording<S>({a.tracked()});
    Tensor<S> out = Tensor<S>::zeros(a.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    if (rec)
        Tape<S>::active()->record([a, out]() mutable {
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                S y = out.data()[i];
                a.grad()[i] += g[i] * (S(1) - y * y);
            }
        });
    detail::check_finite(out, "tanh");
    return out;
}

// ---------------------------------------------------------------------------
// conv2d with reflection padding, stride 1 or 2, via im2col + GEMM
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias,
                 int stride) {
    if (input.rank() != 3)
        throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_str(input.shape()));
    if (weight.rank() != 4)
        throw std::invalid_argument("conv2d: weight must be [Cout,Cin,k,k], got " +
                                    shape_str(weight.shape()));
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c_in)
        throw std::invalid_argument("conv2d: weight input channels " + std::to_string(weight.dim(1)) +
                                    " != input channels " + std::to_string(c_in));
    if (weight.dim(2) != weight.dim(3))
        throw std::invalid_argument("conv2d: kernel must be square, got " + shape_str(weight.shape()));
    if (k % 2 == 0) throw std::invalid_argument("conv2d: even kernel size " + std::to_string(k) + " rejected");
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
    if (bias.rank() != 1 || bias.dim(0) != c_out)
        throw std::invalid_argument("conv2d: bias must be [" + std::to_string(c_out) + "], got " +
                                    shape_str(bias.shape()));
    if (h <= (k - 1) / 2 || w <= (k - 1) / 2)
        throw std::invalid_argument("conv2d: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                                    " too small to reflect-pad kernel " + std::to_string(k));
    if (h % stride != 0 || w % stride != 0)
        throw std::invalid_argument("conv2d: spatial size not divisible by stride");

    const int pad = (k - 1) / 2;
    const int h_out = h / stride, w_out = w / stride;
    const int patch = k * k;                     // spatial taps per channel
    const long cols_rows = static_cast<long>(c_in) * patch;
    const long n_px = static_cast<long>(h_out) * w_out;

    // Per-tap source pixel index (reflection resolved), shared by all channels.
    auto index_map = std::make_shared<std::vector<int>>(static_cast<std::size_t>(patch) * n_px);
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
            int* row = index_map->data() + static_cast<std::size_t>(ky * k + kx) * n_px;
            for (int oy = 0; oy < h_out; ++oy) {
                int sy = detail::reflect_index(oy * stride - pad + ky, h);
                for (int ox = 0; ox < w_out; ++ox) {
                    int sx = detail::reflect_index(ox * stride - pad + kx, w);
                    row[oy * w_out + ox] = sy * w + sx;
                }
            }
        }

    auto cols = std::make_shared<std::vector<S>>(static_cast<std::size_t>(cols_rows) * n_px);
    for (int ci = 0; ci < c_in; ++ci) {
        const S* src = input.data().data() + static_cast<std::size_t>(ci) * h * w;
        for (int t = 0; t < patch; ++t) {
            const int* idx = index_map->data() + static_cast<std::size_t>(t) * n_px;
            S* dst = cols->data() + (static_cast<std::size_t>(ci) * patch + t) * n_px;
            for (long p = 0; p < n_px; ++p) dst[p] = src[idx[p]];
        }
    }

    bool rec = detail::recording<S>({input.tracked(), weight.tracked(), bias.tracked()});
    Tensor<S> out = Tensor<S>::zeros({c_out, h_out, w_out}, rec);
    {
        detail::ConstMatMap<S> wm(weight.data().data(), c_out, cols_rows);
        detail::ConstMatMap<S> cm(cols->data(), cols_rows, n_px);
        detail::MatMap<S> om(out.data().data(), c_out, n_px);
        om.noalias() = wm * cm;
        for (int co = 0; co < c_out; ++co) om.row(co).array() += bias.data()[co];
    }

    if (rec)
        Tape<S>::active()->record([input, weight, bias, out, cols, index_map, c_in, c_out, h, w, k,
                                   n_px, cols_rows, patch]() mutable {
            detail::ConstMatMap<S> gom(out.grad().data(), c_out, n_px);
            if (weight.tracked()) {
                detail::ConstMatMap<S> cm(cols->data(), cols_rows, n_px);
                detail::MatMap<S> gwm(weight.grad().data(), c_out, cols_rows);
                gwm.noalias() += gom * cm.transpose();
            }
            if (bias.tracked())
                for (int co = 0; co < c_out; ++co) bias.grad()[co] += gom.row(co).sum();
            if (input.tracked()) {
                Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gcols(cols_rows, n_px);
                detail::ConstMatMap<S> wm(weight.data().data(), c_out, cols_rows);
                gcols.noalias() = wm.transpose() * gom;
                for (int ci = 0; ci < c_in; ++ci) {
                    S* gsrc = input.grad().data() + static_cast<std::size_t>(ci) * h * w;
                    for (int t = 0; t < patch; ++t) {
                        const int* idx = index_map->data() + static_cast<std::size_t>(t) * n_px;
                        const S* grow = gcols.data() + (static_cast<std::size_t>(ci) * patch + t) * n_px;
                        for (long p = 0; p < n_px; ++p) gsrc[idx[p]] += grow[p];
                    }
                }
            }
        });
    detail::check_finite(out, "conv2d");
    return out;
}

// ---------------------------------------------------------------------------
// instance_norm: per-channel zero mean / unit (biased) variance, then affine
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> instance_norm(const Tensor<S>& input, const Tensor<S>& scale, const Tensor<S>& shift,
                        S eps) {
    if (input.rank() != 3)
        throw std::invalid_argument("instance_norm: input must be [C,H,W], got " +
                                    shape_str(input.shape()));
    const int c = input.dim(0);
    const long n = static_cast<long>(input.dim(1)) * input.dim(2);
    if (n < 2) throw std::invalid_argument("instance_norm: needs H*W >= 2");
    if (eps <= S(0)) throw std::invalid_argument("instance_norm: eps must be positive");
    if (scale.rank() != 1 || scale.dim(0) != c || shift.rank() != 1 || shift.dim(0) != c)
        throw std::invalid_argument("instance_norm: scale/shift must be [" + std::to_string(c) + "]");

    bool rec = detail::recording<S>({input.tracked(), scale.tracked(), shift.tracked()});
    Tensor<S> out = Tensor<S>::zeros(input.shape(), rec);
    auto mean_c = std::make_shared<std::vector<S>>(c);
    auto inv_std = std::make_shared<std::vector<S>>(c);
    for (int ci = 0; ci < c; ++ci) {
        const S* x = input.data().data() + static_cast<std::size_t>(ci) * n;
        S m = std::accumulate(x, x + n, S(0)) / static_cast<S>(n);
        S var = S(0);
        for (long i = 0; i < n; ++i) var += (x[i] - m) * (x[i] - m);
        var /= static_cast<S>(n);
        S inv = S(1) / std::sqrt(var + eps);
        (*mean_c)[ci] = m;
        (*inv_std)[ci] = inv;
        S* y = out.data().data() + static_cast<std::size_t>(ci) * n;
        for (long i = 0; i < n; ++i) y[i] = (x[i] - m) * inv * scale.data()[ci] + shift.data()[ci];
    }

    if (rec)
        Tape<S>::active()->record([input, scale, shift, out, mean_c, inv_std, c, n]() mutable {
            for (int ci = 0; ci < c; ++ci) {
                const S* x = input.data().data() + static_cast<std::size_t>(ci) * n;
                const S* gy = out.grad().data() + static_cast<std::size_t>(ci) * n;
                const S m = (*mean_c)[ci], inv = (*inv_std)[ci];
                S sum_gy = S(0), sum_gy_xhat = S(0);
                for (long i = 0; i < n; ++i) {
                    sum_gy += gy[i];
                    sum_gy_xhat += gy[i] * (x[i] - m) * inv;
                }
                if (scale.tracked()) scale.grad()[ci] += sum_gy_xhat;
                if (shift.tracked()) shift.grad()[ci] += sum_gy;
                if (input.tracked()) {
                    S* gx = input.grad().data() + static_cast<std::size_t>(ci) * n;
                    const S g = scale.data()[ci] * inv / static_cast<S>(n);
                    for (long i = 0; i < n; ++i) {
                        S xhat = (x[i] - m) * inv;
                        gx[i] += g * (static_cast<S>(n) * gy[i] - sum_gy - xhat * sum_gy_xhat);
                    }
                }
            }
        });
    detail::check_finite(out, "instance_norm");
    return out;
}

// ---------------------------------------------------------------------------
// upsample_nearest2x: each pixel replicated to a 2x2 block
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> upsample_nearest2x(const Tensor<S>& input) {
    if (input.rank() != 3)
        throw std::invalid_argument("upsample_nearest2x: input must be [C,H,W], got " +
                                    shape_str(input.shape()));
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    bool rec = detail::recording<S>({input.tracked()});
    Tensor<S> out = Tensor<S>::zeros({c, 2 * h, 2 * w}, rec);
    for (int ci = 0; ci < c; ++ci) {
        const S* src = input.data().data() + static_cast<std::size_t>(ci) * h * w;
        S* dst = out.data().data() + static_cast<std::size_t>(ci) * 4 * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                S v = src[y * w + x];
                S* d = dst + (2 * y) * (2 * w) + 2 * x;
                d[0] = v;
                d[1] = v;
                d[2 * w] = v;
                d[2 * w + 1] = v;
            }
    }
    if (rec)
        Tape<S>::active()->record([input, out, c, h, w]() mutable {
            for (int ci = 0; ci < c; ++ci) {
                S* gsrc = input.grad().data() + static_cast<std::size_t>(ci) * h * w;
                const S* gdst = out.grad().data() + static_cast<std::size_t>(ci) * 4 * h * w;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const S* g = gdst + (2 * y) * (2 * w) + 2 * x;
                        gsrc[y * w + x] += g[0] + g[1] + g[2 * w] + g[2 * w + 1];
                    }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// maxpool2x2 (perceptual backbone downsampling)
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> maxpool2x2(const Tensor<S>& input) {
    if (input.rank() != 3)
        throw std::invalid_argument("maxpool2x2: input must be [C,H,W]");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("maxpool2x2: spatial size must be even, got " +
                                    shape_str(input.shape()));
    const int ho = h / 2, wo = w / 2;
    bool rec = detail::recording<S>({input.tracked()});
    Tensor<S> out = Tensor<S>::zeros({c, ho, wo}, rec);
    auto argmax = std::make_shared<std::vector<int>>(out.count());
    for (int ci = 0; ci < c; ++ci) {
        const S* src = input.data().data() + static_cast<std::size_t>(ci) * h * w;
        S* dst = out.data().data() + static_cast<std::size_t>(ci) * ho * wo;
        int* am = argmax->data() + static_cast<std::size_t>(ci) * ho * wo;
        for (int y = 0; y < ho; ++y)
            for (int x = 0; x < wo; ++x) {
                int base = (2 * y) * w + 2 * x;
                int cand[4] = {base, base + 1, base + w, base + w + 1};
                int best = cand[0];
                for (int i = 1; i < 4; ++i)
                    if (src[cand[i]] > src[best]) best = cand[i];
                dst[y * wo + x] = src[best];
                am[y * wo + x] = best;
            }
    }
    if (rec)
        Tape<S>::active()->record([input, out, argmax, c, h, w, ho, wo]() mutable {
            for (int ci = 0; ci < c; ++ci) {
                S* gsrc = input.grad().data() + static_cast<std::size_t>(ci) * h * w;
                const S* gdst = out.grad().data() + static_cast<std::size_t>(ci) * ho * wo;
                const int* am = argmax->data() + static_cast<std::size_t>(ci) * ho * wo;
                for (int i = 0; i < ho * wo; ++i) gsrc[am[i]] += gdst[i];
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Channel helpers (linear color maps, channel select/tile, per-channel affine)
// ---------------------------------------------------------------------------

// out[j] = sum_i M[j][i] * in[i] over channels; M is row-major j*cin+i.
template <typename S>
Tensor<S> channel_matrix(const Tensor<S>& input, const std::vector<S>& m, int c_out) {
    if (input.rank() != 3) throw std::invalid_argument("channel_matrix: input must be [C,H,W]");
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (static_cast<int>(m.size()) != c_out * c_in)
        throw std::invalid_argument("channel_matrix: matrix size mismatch");
    const long n = static_cast<long>(h) * w;
    bool rec = detail::recording<S>({input.tracked()});
    Tensor<S> out = Tensor<S>::zeros({c_out, h, w}, rec);
    for (int j = 0; j < c_out; ++j) {
        S* dst = out.data().data() + static_cast<std::size_t>(j) * n;
        for (int i = 0; i < c_in; ++i) {
            const S k = m[static_cast<std::size_t>(j) * c_in + i];
            const S* src = input.data().data() + static_cast<std::size_t>(i) * n;
            for (long p = 0; p < n; ++p) dst[p] += k * src[p];
        }
    }
    if (rec)
        Tape<S>::active()->record([input, out, m, c_out, c_in, n]() mutable {
            for (int i = 0; i < c_in; ++i) {
                S* gsrc = input.grad().data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < c_out; ++j) {
                    const S k = m[static_cast<std::size_t>(j) * c_in + i];
                    const S* gdst = out.grad().data() + static_cast<std::size_t>(j) * n;
                    for (long p = 0; p < n; ++p) gsrc[p] += k * gdst[p];
                }
            }
        });
    detail::check_finite(out, "channel_matrix");
    return out;
}

template <typename S>
Tensor<S> select_channel(const Tensor<S>& input, int ch) {
    std::vector<S> m(static_cast<std::size_t>(input.dim(0)), S(0));
    m[static_cast<std::size_t>(ch)] = S(1);
    return channel_matrix(input, m, 1);
}

// Replicates a [1,H,W] tensor to [C,H,W].
template <typename S>
Tensor<S> tile_channel(const Tensor<S>& input, int c) {
    if (input.rank() != 3 || input.dim(0) != 1)
        throw std::invalid_argument("tile_channel: input must be [1,H,W]");
    std::vector<S> m(static_cast<std::size_t>(c), S(1));
    return channel_matrix(input, m, c);
}

// (x - mean[c]) / stdev[c]; used for backbone input normalization.
template <typename S>
Tensor<S> channel_standardize(const Tensor<S>& input, const std::vector<S>& mean,
                              const std::vector<S>& stdev) {
    if (input.rank() != 3) throw std::invalid_argument("channel_standardize: input must be [C,H,W]");
    const int c = input.dim(0);
    if (static_cast<int>(mean.size()) != c || static_cast<int>(stdev.size()) != c)
        throw std::invalid_argument("channel_standardize: mean/std size mismatch");
    const long n = static_cast<long>(input.dim(1)) * input.dim(2);
    bool rec = detail::recording<S>({input.tracked()});
    Tensor<S> out = Tensor<S>::zeros(input.shape(), rec);
    for (int ci = 0; ci < c; ++ci) {
        const S* src = input.data().data() + static_cast<std::size_t>(ci) * n;
        S* dst = out.data().data() + static_cast<std::size_t>(ci) * n;
        const S inv = S(1) / stdev[static_cast<std::size_t>(ci)];
        const S mu = mean[static_cast<std::size_t>(ci)];
        for (long p = 0; p < n; ++p) dst[p] = (src[p] - mu) * inv;
    }
    if (rec)
        Tape<S>::active()->record([input, out, stdev, c, n]() mutable {
            for (int ci = 0; ci < c; ++ci) {
                S* gsrc = input.grad().data() + static_cast<std::size_t>(ci) * n;
                const S* gdst = out.grad().data() + static_cast<std::size_t>(ci) * n;
                const S inv = S(1) / stdev[static_cast<std::size_t>(ci)];
                for (long p = 0; p < n; ++p) gsrc[p] += gdst[p] * inv;
            }
        });
    return out;
}

// Affine remap k*x + b, used to map tanh output [-1,1] to [0,1].
template <typename S>
Tensor<S> affine(const Tensor<S>& input, S k, S b) {
    bool rec = detail::recording<S>({input.tracked()});
    Tensor<S> out = Tensor<S>::zeros(input.shape(), rec);
    for (std::size_t i = 0; i < out.count(); ++i) out.data()[i] = k * input.data()[i] + b;
    if (rec)
        Tape<S>::active()->record([input, out, k]() mutable {
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) input.grad()[i] += k * g[i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// Gram matrix: (C x HW) * (C x HW)^T / (C*H*W)
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> gram(const Tensor<S>& feat) {
    if (feat.rank() != 3) throw std::invalid_argument("gram: input must be [C,H,W]");
    const int c = feat.dim(0);
    const long n = static_cast<long>(feat.dim(1)) * feat.dim(2);
    const S norm = S(1) / (static_cast<S>(c) * static_cast<S>(n));
    bool rec = detail::recording<S>({feat.tracked()});
    Tensor<S> out = Tensor<S>::zeros({c, c}, rec);
    {
        detail::ConstMatMap<S> f(feat.data().data(), c, n);
        detail::MatMap<S> g(out.data().data(), c, c);
        g.noalias() = f * f.transpose() * norm;
    }
    if (rec)
        Tape<S>::active()->record([feat, out, c, n, norm]() mutable {
            detail::ConstMatMap<S> f(feat.data().data(), c, n);
            detail::ConstMatMap<S> gg(out.grad().data(), c, c);
            detail::MatMap<S> gf(feat.grad().data(), c, n);
            gf.noalias() += (gg + gg.transpose()) * f * norm;
        });
    detail::check_finite(out, "gram");
    return out;
}

}  // namespace reconet
