// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_AUTODIFF_HPP
#define FDIKP_AUTODIFF_HPP

// Reverse-mode differentiation over the operator set used by the model:
// an append-only tape of eagerly evaluated nodes, one backward pass per
// forward build. Complex planes travel as (re, im) channel pairs; FFT
// backward applies the adjoint transform with the matching normalization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fdikp/fft.hpp"
#include "fdikp/tensor.hpp"

namespace fdikp {

/// Named parameter tensors with stable ordering plus Adam moment buffers.
template <typename T>
class ParamStoreT {
public:
    struct Entry {
        std::string name;
        TensorT<T> value, m, v;
    };

    int add(const std::string& name, TensorT<T> init) {
        if (index_.count(name)) throw std::invalid_argument("param store: duplicate name " + name);
        const int id = static_cast<int>(entries_.size());
        Entry e;
        e.name = name;
        e.m = TensorT<T>(init.shape());
        e.v = TensorT<T>(init.shape());
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        index_.emplace(name, id);
        return id;
    }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    Entry& entry(int i) { return entries_[static_cast<size_t>(i)]; }
    const Entry& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
    int count() const { return static_cast<int>(entries_.size()); }

    std::int64_t scalar_count() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void reset_moments() {
        for (auto& e : entries_) {
            std::fill(e.m.vec().begin(), e.m.vec().end(), T(0));
            std::fill(e.v.vec().begin(), e.v.vec().end(), T(0));
        }
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

using ParamStore = ParamStoreT<double>;
using ParamStoreF = ParamStoreT<float>;

enum class Op {
    Input,
    Param,
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    Sigmoid,
    Tanh,
    Abs,
    Sin,
    Cos,
    Log1p,
    PowConst,
    SoftmaxInner,
    Conv2d,
    Pac,
    GridSample,
    Fft2,
    Ifft2Real,
    FftShift2,
    ComplexAbs,
    ComplexArg,
    ResizeBilinear,
    AdaptiveAvgPool,
    Concat,
    SliceChan,
    ChannelMean,
    SumAll,
    MeanAll,
    SumPerChan,
    AddChanBcast,
    MulChanBcast,
    MatmulNT,
    MatmulNN,
    WindowPartition,
    WindowMerge,
    Reshape
};

namespace addetail {

template <typename T>
inline T bilinear_clamped(const T* p, int h, int w, T y, T x) {
    y = std::clamp(y, T(0), T(h - 1));
    x = std::clamp(x, T(0), T(w - 1));
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const T wy = y - T(y0), wx = x - T(x0);
    const T v00 = p[static_cast<size_t>(y0) * w + x0];
    const T v01 = p[static_cast<size_t>(y0) * w + x1];
    const T v10 = p[static_cast<size_t>(y1) * w + x0];
    const T v11 = p[static_cast<size_t>(y1) * w + x1];
    return (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
}

// Corner weights plus the coordinate partials (zero when the raw coordinate
// left the valid region; the forward is clamped there).
template <typename T>
struct BilinearTaps {
    int y0, y1, x0, x1;
    T w00, w01, w10, w11;
    T dvdy, dvdx;
};

template <typename T>
inline BilinearTaps<T> bilinear_taps(const T* p, int h, int w, T yr, T xr) {
    const bool y_in = (yr >= T(0)) && (yr <= T(h - 1));
    const bool x_in = (xr >= T(0)) && (xr <= T(w - 1));
    const T y = std::clamp(yr, T(0), T(h - 1));
    const T x = std::clamp(xr, T(0), T(w - 1));
    BilinearTaps<T> t;
    t.y0 = static_cast<int>(y);
    t.x0 = static_cast<int>(x);
    t.y1 = std::min(t.y0 + 1, h - 1);
    t.x1 = std::min(t.x0 + 1, w - 1);
    const T wy = y - T(t.y0), wx = x - T(t.x0);
    t.w00 = (1 - wy) * (1 - wx);
    t.w01 = (1 - wy) * wx;
    t.w10 = wy * (1 - wx);
    t.w11 = wy * wx;
    const T v00 = p[static_cast<size_t>(t.y0) * w + t.x0];
    const T v01 = p[static_cast<size_t>(t.y0) * w + t.x1];
    const T v10 = p[static_cast<size_t>(t.y1) * w + t.x0];
    const T v11 = p[static_cast<size_t>(t.y1) * w + t.x1];
    t.dvdy = y_in ? ((1 - wx) * (v10 - v00) + wx * (v11 - v01)) : T(0);
    t.dvdx = x_in ? ((1 - wy) * (v01 - v00) + wy * (v11 - v10)) : T(0);
    return t;
}

inline int reflect_idx(int i, int n) {
    if (n == 1) return 0;
    int p = i % (2 * n);
    if (p < 0) p += 2 * n;
    return p < n ? p : 2 * n - 1 - p;
}

} // namespace addetail

template <typename T>
struct NodeT {
    Op op = Op::Input;
    std::vector<int> ins;
    TensorT<T> val;
    TensorT<T> grad;
    int ia = 0, ib = 0, ic = 0, id = 0;
    T fa = T(0), fb = T(0);
    int param = -1;
};

template <typename T>
class GraphT {
public:
    explicit GraphT(ParamStoreT<T>* store = nullptr) : store_(store) {}

    int input(TensorT<T> v) { return push(Op::Input, {}, std::move(v)); }

    /// Leaf bound to a store entry; repeated lookups share one node so
    /// gradients of shared weights accumulate across uses.
    int param(const std::string& name) {
        if (!store_) throw std::logic_error("graph: no parameter store bound");
        const int pi = store_->index_of(name);
        if (pi < 0) throw std::invalid_argument("graph: unknown parameter " + name);
        auto it = param_nodes_.find(pi);
        if (it != param_nodes_.end()) return it->second;
        const int id = push(Op::Param, {}, store_->entry(pi).value);
        nodes_[static_cast<size_t>(id)].param = pi;
        param_nodes_.emplace(pi, id);
        return id;
    }

    // ---- elementwise ----
    int add(int a, int b) { return binary(Op::Add, a, b); }
    int sub(int a, int b) { return binary(Op::Sub, a, b); }
    int mul(int a, int b) { return binary(Op::Mul, a, b); }

    int scale(int a, T mul_by, T add_c = T(0)) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] = mul_by * x[i] + add_c;
        int id = push(Op::Scale, {a}, std::move(out));
        node(id).fa = mul_by;
        return id;
    }

    int relu(int a) { return unary(Op::Relu, a, [](T x) { return x > T(0) ? x : T(0); }); }
    int sigmoid(int a) {
        return unary(Op::Sigmoid, a, [](T x) { return T(1) / (T(1) + std::exp(-x)); });
    }
    int tanh_(int a) { return unary(Op::Tanh, a, [](T x) { return std::tanh(x); }); }
    int abs_(int a) { return unary(Op::Abs, a, [](T x) { return std::abs(x); }); }
    int sin_(int a) { return unary(Op::Sin, a, [](T x) { return std::sin(x); }); }
    int cos_(int a) { return unary(Op::Cos, a, [](T x) { return std::cos(x); }); }
    int log1p_(int a) { return unary(Op::Log1p, a, [](T x) { return std::log1p(x); }); }

    int pow_const(int a, T p) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] = std::pow(x[i], p);
        int id = push(Op::PowConst, {a}, std::move(out));
        node(id).fa = p;
        return id;
    }

    /// Softmax over contiguous trailing blocks of length `inner`.
    int softmax_inner(int a, int inner) {
        const auto& x = val(a);
        if (inner < 1 || x.size() % inner != 0)
            throw std::invalid_argument("softmax: inner does not divide the size");
        TensorT<T> out(x.shape());
        const std::int64_t rows = x.size() / inner;
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* src = x.data() + r * inner;
            T* dst = out.data() + r * inner;
            T mx = src[0];
            for (int i = 1; i < inner; ++i) mx = std::max(mx, src[i]);
            T sum = T(0);
            for (int i = 0; i < inner; ++i) {
                dst[i] = std::exp(src[i] - mx);
                sum += dst[i];
            }
            for (int i = 0; i < inner; ++i) dst[i] /= sum;
        }
        int id = push(Op::SoftmaxInner, {a}, std::move(out));
        node(id).ia = inner;
        return id;
    }

    // ---- structure ----
    int concat(const std::vector<int>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat: no inputs");
        const auto& first = val(parts[0]);
        if (first.rank() != 3) throw std::invalid_argument("concat: expects (C,H,W) inputs");
        int ctotal = 0;
        for (int p : parts) {
            const auto& t = val(p);
            if (t.rank() != 3 || t.extent(1) != first.extent(1) || t.extent(2) != first.extent(2))
                throw std::invalid_argument("concat: spatial shape mismatch");
            ctotal += t.extent(0);
        }
        TensorT<T> out({ctotal, first.extent(1), first.extent(2)});
        std::int64_t off = 0;
        for (int p : parts) {
            const auto& t = val(p);
            std::copy(t.data(), t.data() + t.size(), out.data() + off);
            off += t.size();
        }
        return push(Op::Concat, parts, std::move(out));
    }

    int slice_chan(int a, int from, int count) {
        const auto& x = val(a);
        if (x.rank() != 3 || from < 0 || count < 1 || from + count > x.extent(0))
            throw std::invalid_argument("slice_chan: bad range");
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        TensorT<T> out({count, x.extent(1), x.extent(2)});
        std::copy(x.data() + from * plane, x.data() + (from + count) * plane, out.data());
        int id = push(Op::SliceChan, {a}, std::move(out));
        node(id).ia = from;
        node(id).ib = count;
        return id;
    }

    int channel_mean(int a) {
        const auto& x = val(a);
        if (x.rank() != 3) throw std::invalid_argument("channel_mean: expects (C,H,W)");
        const int c = x.extent(0);
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        TensorT<T> out({1, x.extent(1), x.extent(2)});
        for (std::int64_t i = 0; i < plane; ++i) {
            T acc = T(0);
            for (int ch = 0; ch < c; ++ch) acc += x[ch * plane + i];
            out[i] = acc / T(c);
        }
        return push(Op::ChannelMean, {a}, std::move(out));
    }

    int reshape(int a, std::vector<int> shape) {
        TensorT<T> out(shape);
        const auto& x = val(a);
        if (out.size() != x.size()) throw std::invalid_argument("reshape: size mismatch");
        std::copy(x.data(), x.data() + x.size(), out.data());
        return push(Op::Reshape, {a}, std::move(out));
    }

    // ---- reductions / broadcasts ----
    int sum_all(int a) {
        T acc = T(0);
        const auto& x = val(a);
        for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
        return push(Op::SumAll, {a}, TensorT<T>({1}, std::vector<T>{acc}));
    }

    int mean_all(int a) {
        const auto& x = val(a);
        if (x.size() == 0) throw std::invalid_argument("mean_all: empty input");
        T acc = T(0);
        for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
        return push(Op::MeanAll, {a}, TensorT<T>({1}, std::vector<T>{acc / T(x.size())}));
    }

    int sum_per_chan(int a) {
        const auto& x = val(a);
        if (x.rank() < 1) throw std::invalid_argument("sum_per_chan: scalar input");
        const int n = x.extent(0);
        const std::int64_t rest = x.size() / n;
        TensorT<T> out({n});
        for (int ch = 0; ch < n; ++ch) {
            T acc = T(0);
            for (std::int64_t i = 0; i < rest; ++i) acc += x[ch * rest + i];
            out[ch] = acc;
        }
        return push(Op::SumPerChan, {a}, std::move(out));
    }

    int add_chan_bcast(int a, int v) { return chan_bcast(Op::AddChanBcast, a, v); }
    int mul_chan_bcast(int a, int v) { return chan_bcast(Op::MulChanBcast, a, v); }

    // ---- convolution / sampling ----

    /// Zero-padded "same" convolution layer (correlation orientation), odd
    /// kernel, stride 1 or 2. x:(Cin,H,W) w:(Cout,Cin,kh,kw) b:(Cout).
    int conv2d(int x, int w, int b, int stride = 1);

    /// Dilated deconvolution gather: one K*K kernel per leading index of
    /// `kernels`, applied to every channel of x at per-pixel dilation D.
    /// Output channel n*C+c holds kernel n applied to channel c.
    int pac(int x, int kernels, int dmap);

    /// out[c,i,j] = bilinear(x[c], gy[0,i,j], gx[0,i,j]), clamped.
    int grid_sample(int x, int gy, int gx);

    int resize_bilinear_to(int a, int oh, int ow);
    int adaptive_avg_pool(int a, int oh, int ow);

    int global_avg_pool(int a) { // (C,H,W) -> (C)
        int pooled = adaptive_avg_pool(a, 1, 1);
        return reshape(pooled, {val(a).extent(0)});
    }

    // ---- spectral ----

    /// (C,H,W) -> (2C,H,W): channels [0,C) real parts, [C,2C) imaginary
    /// parts of the unnormalized forward DFT per channel.
    int fft2(int a);

    /// (2C,H,W) -> (C,H,W): real part of the normalized inverse DFT.
    int ifft2_real(int a);

    int fftshift2(int a);

    /// (2C,H,W) -> (C,H,W) modulus per (re, im) pair.
    int complex_abs(int a);

    /// (2C,H,W) -> (C,H,W) principal argument per pair; 0 at the origin.
    int complex_arg(int a);

    // ---- attention helpers ----
    int matmul_nt(int a, int b); // (B,I,K)x(B,J,K) -> (B,I,J)
    int matmul_nn(int a, int b); // (B,I,J)x(B,J,K) -> (B,I,K)

    /// (C,H,W) -> (nWin, win*win, C) over non-overlapping windows; extents
    /// are reflect-padded up to multiples of win.
    int window_partition(int a, int win);

    /// Inverse of window_partition for the given original extents.
    int window_merge(int a, int c, int h, int w, int win);

    // ---- access ----
    const TensorT<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    const TensorT<T>& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Reverse topological accumulation from a scalar loss node.
    void backward(int loss);

    /// Per-entry gradients aligned with the bound store; zero tensors for
    /// parameters the graph never touched. Requires a completed backward.
    std::vector<TensorT<T>> param_grads() const {
        if (!store_) throw std::logic_error("graph: no parameter store bound");
        if (!backward_done_) throw std::logic_error("graph: backward has not run");
        std::vector<TensorT<T>> out;
        out.reserve(static_cast<size_t>(store_->count()));
        for (int i = 0; i < store_->count(); ++i) {
            auto it = param_nodes_.find(i);
            if (it == param_nodes_.end())
                out.emplace_back(store_->entry(i).value.shape());
            else
                out.push_back(nodes_[static_cast<size_t>(it->second)].grad);
        }
        return out;
    }

private:
    NodeT<T>& node(int id) { return nodes_[static_cast<size_t>(id)]; }

    int push(Op op, std::vector<int> ins, TensorT<T> v) {
        NodeT<T> n;
        n.op = op;
        n.ins = std::move(ins);
        n.val = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int binary(Op op, int a, int b) {
        const auto& xa = val(a);
        const auto& xb = val(b);
        if (!xa.same_shape(xb))
            throw std::invalid_argument("elementwise op: shape mismatch " + shape_str(xa.shape()) +
                                        " vs " + shape_str(xb.shape()));
        TensorT<T> out(xa.shape());
        switch (op) {
        case Op::Add:
            for (std::int64_t i = 0; i < xa.size(); ++i) out[i] = xa[i] + xb[i];
            break;
        case Op::Sub:
            for (std::int64_t i = 0; i < xa.size(); ++i) out[i] = xa[i] - xb[i];
            break;
        case Op::Mul:
            for (std::int64_t i = 0; i < xa.size(); ++i) out[i] = xa[i] * xb[i];
            break;
        default:
            throw std::logic_error("binary: bad op");
        }
        return push(op, {a, b}, std::move(out));
    }

    template <typename F>
    int unary(Op op, int a, F f) {
        const auto& x = val(a);
        TensorT<T> out(x.shape());
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
        return push(op, {a}, std::move(out));
    }

    int chan_bcast(Op op, int a, int v) {
        const auto& x = val(a);
        const auto& w = val(v);
        if (x.rank() < 1 || w.rank() != 1 || w.extent(0) != x.extent(0))
            throw std::invalid_argument("chan_bcast: leading extent mismatch");
        const int n = x.extent(0);
        const std::int64_t rest = x.size() / n;
        TensorT<T> out(x.shape());
        for (int ch = 0; ch < n; ++ch)
            for (std::int64_t i = 0; i < rest; ++i)
                out[ch * rest + i] = (op == Op::AddChanBcast) ? x[ch * rest + i] + w[ch]
                                                              : x[ch * rest + i] * w[ch];
        return push(op, {a, v}, std::move(out));
    }

    void backward_node(int id);

    ParamStoreT<T>* store_;
    std::vector<NodeT<T>> nodes_;
    std::unordered_map<int, int> param_nodes_;
    bool backward_done_ = false;
};

using Graph = GraphT<double>;
using GraphF = GraphT<float>;

extern template class GraphT<float>;
extern template class GraphT<double>;

} // namespace fdikp

#endif
