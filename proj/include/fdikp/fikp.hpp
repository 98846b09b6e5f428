// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_FIKP_HPP
#define FDIKP_FIKP_HPP

// Frequency inverse kernel prediction: dual-branch amplitude/phase kernel
// estimation, the regularized analytic inverse, and position-adaptive
// convolution. Learnable pieces are graph builders over autodiff.hpp.

#include <string>

#include "fdikp/autodiff.hpp"
#include "fdikp/blur.hpp"
#include "fdikp/rng.hpp"
#include "fdikp/tensor.hpp"

namespace fdikp {

/// N signed spatial kernels with the polar spectrum they reconstruct from:
/// kernels == real(ifft2(amplitude * exp(i*phase))) per kernel.
struct KernelSet {
    int count = 0;
    int size = 0;
    Tensor kernels;   // (N,K,K)
    Tensor amplitude; // (N,K,K) >= 0
    Tensor phase;     // (N,K,K) radians
};

/// Per-pixel dilation rate field, (H,W), values in (d_min, d_max).
using DilatedMap = Tensor;

struct FikpConfig {
    int kernel_count = 5; // N
    int kernel_size = 5;  // K, odd
    int channels = 3;     // image channels fed to PAC
    int pred_c1 = 8, pred_c2 = 16;
    int dil_c = 8;
    double d_min = 0.5, d_max = 8.0;
    bool disable_pac = false;  // dilation pinned to 1
    bool disable_dikp = false; // fixed analytic-inverse bank instead of DIKP

    int feature_channels() const { return 2 * kernel_count * channels; }
};

/// Wiener-regularized inverse of a PSF: response conj(K)/(|K|^2 + eps) on a
/// pad*pad periodic grid, inverse-transformed and center-cropped to
/// support*support (support == pad keeps the full response; otherwise odd).
/// The returned kernel is center-origin: tap (support/2, support/2) is the
/// zero offset. eps == 0 with a spectral zero in |K| is an error.
Tensor analytic_inverse(const Tensor& kernel, int pad, double eps, int support = 0);

/// Deconvolution bank for the disable_dikp ablation: analytic inverses of
/// disk PSFs on a fixed radius ladder, cropped to (N,K,K).
Tensor analytic_kernel_bank(const FikpConfig& cfg);

/// Position-adaptive convolution of one plane by one kernel (correlation
/// orientation, clamped bilinear sampling): out(p) = sum_i k_i x(p + dp_i*D(p)).
Tensor pac_apply(const Tensor& plane, const Tensor& kernel, const DilatedMap& dmap);

// ---- parameter registration ----

template <typename T>
void fikp_init_params(ParamStoreT<T>& store, const FikpConfig& cfg, const std::string& prefix,
                      Rng& rng);

// ---- graph builders (parameters under `prefix`) ----

/// Predictor: two conv-relu-pool units shrinking toward K*K, a conv to N
/// channels at exactly K*K, then a per-kernel softmax over the K*K bins.
template <typename T>
int predictor_forward(GraphT<T>& g, int plane, const std::string& prefix, const FikpConfig& cfg);

/// Amplitude attention: window-normalized box residual, conv, global average
/// pooling, softmax over the N outputs.
template <typename T>
int attention_forward(GraphT<T>& g, int amp_plane, const std::string& prefix,
                      const FikpConfig& cfg);

/// Dual-branch inverse kernel prediction from the per-image spectrum;
/// returns an (N,K,K) node of unit-sum signed kernels. zero_phase pins the
/// constructed phase to 0 (analysis hook).
template <typename T>
int dikp_predict_node(GraphT<T>& g, int img, const std::string& prefix, const FikpConfig& cfg,
                      bool zero_phase = false);

/// Blur-aware dilation field in (d_min, d_max), node shape (1,H,W).
template <typename T>
int dilated_map_node(GraphT<T>& g, int img, const std::string& prefix, const FikpConfig& cfg);

/// Full FIKP stage: per input (img, prev) predict kernels + dilation, PAC
/// every (kernel, channel) pair, concatenate (2NC planes), refine with one
/// convolution. Returns the deconvolution feature node.
template <typename T>
int fikp_forward_node(GraphT<T>& g, int img, int prev, const std::string& prefix,
                      const FikpConfig& cfg);

// ---- value-level wrappers ----

KernelSet dikp_predict(const Tensor& img, ParamStore& store, const std::string& prefix,
                       const FikpConfig& cfg, bool zero_phase = false);
DilatedMap dilated_map(const Tensor& img, ParamStore& store, const std::string& prefix,
                       const FikpConfig& cfg);

// ---------------------------------------------------------------- impl

namespace fikpdetail {

template <typename T>
TensorT<T> he_conv(Rng& rng, int co, int ci, int kh, int kw) {
    TensorT<T> w({co, ci, kh, kw});
    const double std = std::sqrt(2.0 / (ci * kh * kw));
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(std * rng.normal());
    return w;
}

} // namespace fikpdetail

template <typename T>
void fikp_init_params(ParamStoreT<T>& store, const FikpConfig& cfg, const std::string& prefix,
                      Rng& rng) {
    using fikpdetail::he_conv;
    const int n = cfg.kernel_count, c1 = cfg.pred_c1, c2 = cfg.pred_c2;
    for (const char* branch : {"amp.", "pha."}) {
        const std::string p = prefix + branch;
        store.add(p + "c1.w", he_conv<T>(rng, c1, 1, 3, 3));
        store.add(p + "c1.b", TensorT<T>({c1}));
        store.add(p + "c2.w", he_conv<T>(rng, c2, c1, 3, 3));
        store.add(p + "c2.b", TensorT<T>({c2}));
        store.add(p + "c3.w", he_conv<T>(rng, n, c2, 3, 3));
        store.add(p + "c3.b", TensorT<T>({n}));
    }
    store.add(prefix + "att.w", he_conv<T>(rng, n, 1, 3, 3));
    store.add(prefix + "att.b", TensorT<T>({n}));
    store.add(prefix + "dil.c1.w", he_conv<T>(rng, cfg.dil_c, cfg.channels, 3, 3));
    store.add(prefix + "dil.c1.b", TensorT<T>({cfg.dil_c}));
    store.add(prefix + "dil.c2.w", he_conv<T>(rng, 1, cfg.dil_c, 3, 3));
    store.add(prefix + "dil.c2.b", TensorT<T>({1}));
    const int fc = cfg.feature_channels();
    store.add(prefix + "refine.w", he_conv<T>(rng, fc, fc, 3, 3));
    store.add(prefix + "refine.b", TensorT<T>({fc}));
}

template <typename T>
int predictor_forward(GraphT<T>& g, int plane, const std::string& prefix, const FikpConfig& cfg) {
    const auto& x = g.val(plane);
    const int k = cfg.kernel_size, n = cfg.kernel_count;
    if (x.rank() != 3 || x.extent(0) != 1)
        throw std::invalid_argument("predictor: expects a (1,H,W) plane");
    if (x.extent(1) < k || x.extent(2) < k)
        throw std::invalid_argument("predictor: plane smaller than the kernel grid");

    int t = g.conv2d(plane, g.param(prefix + "c1.w"), g.param(prefix + "c1.b"));
    t = g.relu(t);
    const int h1 = std::max(k, (g.val(t).extent(1) + 1) / 2);
    const int w1 = std::max(k, (g.val(t).extent(2) + 1) / 2);
    t = g.adaptive_avg_pool(t, h1, w1);

    t = g.conv2d(t, g.param(prefix + "c2.w"), g.param(prefix + "c2.b"));
    t = g.relu(t);
    t = g.adaptive_avg_pool(t, k, k);

    t = g.conv2d(t, g.param(prefix + "c3.w"), g.param(prefix + "c3.b"));
    (void)n;
    return g.softmax_inner(t, k * k);
}

template <typename T>
int attention_forward(GraphT<T>& g, int amp_plane, const std::string& prefix,
                      const FikpConfig& cfg) {
    const auto& a = g.val(amp_plane);
    if (a.rank() != 3 || a.extent(0) != 1)
        throw std::invalid_argument("attention: expects a (1,H,W) plane");
    const int h = a.extent(1), w = a.extent(2);

    // window-count-normalized 5x5 box mean so constant planes give an
    // exactly zero residual at the borders too
    TensorT<T> box({1, 1, 5, 5}, T(1));
    TensorT<T> zero_b({1});
    int sums = g.conv2d(amp_plane, g.input(box), g.input(zero_b));
    TensorT<T> ones({1, h, w}, T(1));
    GraphT<T>& gr = g;
    int counts = gr.conv2d(gr.input(ones), gr.input(box), gr.input(zero_b));
    TensorT<T> recip(g.val(counts).shape());
    for (std::int64_t i = 0; i < recip.size(); ++i) recip[i] = T(1) / g.val(counts)[i];
    int mean_map = g.mul(sums, g.input(recip));
    int residual = g.sub(amp_plane, mean_map);

    int t = g.conv2d(residual, g.param(prefix + "att.w"), g.param(prefix + "att.b"));
    t = g.global_avg_pool(t); // (N)
    return g.softmax_inner(t, cfg.kernel_count);
}

template <typename T>
int dikp_predict_node(GraphT<T>& g, int img, const std::string& prefix, const FikpConfig& cfg,
                      bool zero_phase) {
    constexpr double kPi = 3.14159265358979323846;
    const int k = cfg.kernel_size;

    int luma = g.channel_mean(img);
    int spec = g.fft2(luma);
    int amp = g.fftshift2(g.log1p_(g.complex_abs(spec)));
    int pha = g.fftshift2(g.complex_arg(spec));

    int k_amp = predictor_forward(g, amp, prefix + "amp.", cfg); // (N,K,K), bins sum to 1
    int kernels_spec_re, kernels_spec_im;
    if (zero_phase) {
        kernels_spec_re = k_amp;
        kernels_spec_im = g.scale(k_amp, T(0));
    } else {
        int k_pha_raw = predictor_forward(g, pha, prefix + "pha.", cfg);
        int att = attention_forward(g, amp, prefix, cfg); // (N)
        // affine map: uniform softmax (t = 1/K^2) lands on phase 0, range [-pi, pi]
        int k_pha = g.scale(k_pha_raw, T(2.0 * kPi * k * k), T(-kPi));
        int k_pha_mod = g.mul_chan_bcast(k_pha, att);
        kernels_spec_re = g.mul(k_amp, g.cos_(k_pha_mod));
        kernels_spec_im = g.mul(k_amp, g.sin_(k_pha_mod));
    }
    int spec_pair = g.concat({kernels_spec_re, kernels_spec_im}); // (2N,K,K)
    int spatial = g.fftshift2(g.ifft2_real(spec_pair));           // origin bin centered
    // affine renormalization to unit gain
    int sums = g.sum_per_chan(spatial);
    int adjust = g.scale(sums, T(-1.0 / (k * k)), T(1.0 / (k * k)));
    return g.add_chan_bcast(spatial, adjust);
}

template <typename T>
int dilated_map_node(GraphT<T>& g, int img, const std::string& prefix, const FikpConfig& cfg) {
    int t = g.conv2d(img, g.param(prefix + "dil.c1.w"), g.param(prefix + "dil.c1.b"));
    t = g.relu(t);
    t = g.conv2d(t, g.param(prefix + "dil.c2.w"), g.param(prefix + "dil.c2.b"));
    t = g.sigmoid(t);
    return g.scale(t, T(cfg.d_max - cfg.d_min), T(cfg.d_min));
}

template <typename T>
int fikp_forward_node(GraphT<T>& g, int img, int prev, const std::string& prefix,
                      const FikpConfig& cfg) {
    if (!g.val(img).same_shape(g.val(prev)))
        throw std::invalid_argument("fikp_forward: img/prev shape mismatch");
    const int h = g.val(img).extent(1), w = g.val(img).extent(2);

    auto branch = [&](int input) {
        int kernels;
        if (cfg.disable_dikp)
            kernels = g.input(tensor_cast<T>(analytic_kernel_bank(cfg)));
        else
            kernels = dikp_predict_node(g, input, prefix, cfg);
        int dmap;
        if (cfg.disable_pac)
            dmap = g.input(TensorT<T>({1, h, w}, T(1)));
        else
            dmap = dilated_map_node(g, input, prefix, cfg);
        return g.pac(input, kernels, dmap); // (N*C,H,W)
    };

    int cat = g.concat({branch(img), branch(prev)});
    return g.conv2d(cat, g.param(prefix + "refine.w"), g.param(prefix + "refine.b"));
}

} // namespace fdikp

#endif
