// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_DSRM_HPP
#define FDIKP_DSRM_HPP

// Dual-domain scale recurrent module: ResBlock encoder with stride-2
// downsampling, a bottleneck block pairing windowed self-attention with a
// frequency-domain filter stage, a skip-connected decoder, and a
// convolutional GRU head emitting coefficient maps plus the hidden state.

#include <string>

#include "fdikp/autodiff.hpp"
#include "fdikp/rng.hpp"

namespace fdikp {

enum class DdmVariant { Full, SpatialOnly, FrequencyOnly, DualBranch };

inline const char* to_string(DdmVariant v) {
    switch (v) {
    case DdmVariant::Full: return "full";
    case DdmVariant::SpatialOnly: return "spatial_only";
    case DdmVariant::FrequencyOnly: return "frequency_only";
    case DdmVariant::DualBranch: return "dual_branch";
    }
    return "full";
}

inline DdmVariant ddm_variant_from(const std::string& s) {
    if (s == "full") return DdmVariant::Full;
    if (s == "spatial_only") return DdmVariant::SpatialOnly;
    if (s == "frequency_only") return DdmVariant::FrequencyOnly;
    if (s == "dual_branch") return DdmVariant::DualBranch;
    throw std::invalid_argument("unknown ddm variant: " + s);
}

struct DsrmConfig {
    int in_channels = 3;
    int w1 = 16, w2 = 32, w3 = 64; // encoder widths
    int window = 8;                // attention window
    int feature_channels = 30;     // coefficient map channels (matches FIKP)
    DdmVariant variant = DdmVariant::Full;
};

struct DsrmOut {
    int coeffs; // (feature_channels, H, W), sigmoid codomain
    int hidden; // (w1, H, W)
};

template <typename T>
void dsrm_init_params(ParamStoreT<T>& store, const DsrmConfig& cfg, const std::string& prefix,
                      Rng& rng);

/// conv-relu-conv with identity skip.
template <typename T>
int resblock(GraphT<T>& g, int x, const std::string& prefix);

/// Windowed single-head self-attention with residual add (DDM stage 1).
template <typename T>
int ddm_attention_stage(GraphT<T>& g, int x, const std::string& prefix, int window);

/// fft2 -> conv-relu-conv on stacked (re, im) planes -> real ifft2.
template <typename T>
int ddm_freq_path(GraphT<T>& g, int x, const std::string& prefix);

/// Bottleneck dual-domain block in the configured variant.
template <typename T>
int ddm(GraphT<T>& g, int x, const std::string& prefix, const DsrmConfig& cfg);

/// Convolutional GRU step followed by the sigmoid coefficient head. The
/// hidden state must already be at feature resolution.
template <typename T>
DsrmOut apu_step(GraphT<T>& g, int features, int hidden, const std::string& prefix);

/// Full encoder-DDM-decoder-APU pass; `hidden` may be -1 for a zero state
/// and is bilinearly resized to the stage resolution when it differs.
template <typename T>
DsrmOut dsrm_forward(GraphT<T>& g, int img, int hidden, const std::string& prefix,
                     const DsrmConfig& cfg);

// ---------------------------------------------------------------- impl

namespace dsrmdetail {

template <typename T>
TensorT<T> he_conv(Rng& rng, int co, int ci, int kh, int kw) {
    TensorT<T> w({co, ci, kh, kw});
    const double std = std::sqrt(2.0 / (ci * kh * kw));
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(std * rng.normal());
    return w;
}

template <typename T>
void add_conv(ParamStoreT<T>& store, Rng& rng, const std::string& name, int co, int ci, int k) {
    store.add(name + ".w", he_conv<T>(rng, co, ci, k, k));
    store.add(name + ".b", TensorT<T>({co}));
}

} // namespace dsrmdetail

template <typename T>
void dsrm_init_params(ParamStoreT<T>& store, const DsrmConfig& cfg, const std::string& prefix,
                      Rng& rng) {
    using dsrmdetail::add_conv;
    add_conv(store, rng, prefix + "enc.in", cfg.w1, cfg.in_channels, 3);
    add_conv(store, rng, prefix + "enc.rb1.c1", cfg.w1, cfg.w1, 3);
    add_conv(store, rng, prefix + "enc.rb1.c2", cfg.w1, cfg.w1, 3);
    add_conv(store, rng, prefix + "enc.down1", cfg.w2, cfg.w1, 3);
    add_conv(store, rng, prefix + "enc.rb2.c1", cfg.w2, cfg.w2, 3);
    add_conv(store, rng, prefix + "enc.rb2.c2", cfg.w2, cfg.w2, 3);
    add_conv(store, rng, prefix + "enc.down2", cfg.w3, cfg.w2, 3);
    add_conv(store, rng, prefix + "enc.rb3.c1", cfg.w3, cfg.w3, 3);
    add_conv(store, rng, prefix + "enc.rb3.c2", cfg.w3, cfg.w3, 3);

    const bool spatial = cfg.variant != DdmVariant::FrequencyOnly;
    const bool freq = cfg.variant != DdmVariant::SpatialOnly;
    if (spatial) {
        add_conv(store, rng, prefix + "ddm.q", cfg.w3, cfg.w3, 1);
        add_conv(store, rng, prefix + "ddm.k", cfg.w3, cfg.w3, 1);
        add_conv(store, rng, prefix + "ddm.v", cfg.w3, cfg.w3, 1);
        add_conv(store, rng, prefix + "ddm.proj", cfg.w3, cfg.w3, 1);
    }
    if (freq) {
        add_conv(store, rng, prefix + "ddm.freq.c1", 2 * cfg.w3, 2 * cfg.w3, 3);
        add_conv(store, rng, prefix + "ddm.freq.c2", 2 * cfg.w3, 2 * cfg.w3, 3);
        add_conv(store, rng, prefix + "ddm.rb.c1", cfg.w3, cfg.w3, 3);
        add_conv(store, rng, prefix + "ddm.rb.c2", cfg.w3, cfg.w3, 3);
    }
    if (cfg.variant == DdmVariant::DualBranch)
        add_conv(store, rng, prefix + "ddm.gate", cfg.w3, 2 * cfg.w3, 1);

    add_conv(store, rng, prefix + "dec.up1", cfg.w2, cfg.w3 + cfg.w2, 3);
    add_conv(store, rng, prefix + "dec.rb1.c1", cfg.w2, cfg.w2, 3);
    add_conv(store, rng, prefix + "dec.rb1.c2", cfg.w2, cfg.w2, 3);
    add_conv(store, rng, prefix + "dec.up2", cfg.w1, cfg.w2 + cfg.w1, 3);
    add_conv(store, rng, prefix + "dec.rb2.c1", cfg.w1, cfg.w1, 3);
    add_conv(store, rng, prefix + "dec.rb2.c2", cfg.w1, cfg.w1, 3);

    add_conv(store, rng, prefix + "apu.z", cfg.w1, 2 * cfg.w1, 3);
    add_conv(store, rng, prefix + "apu.r", cfg.w1, 2 * cfg.w1, 3);
    add_conv(store, rng, prefix + "apu.h", cfg.w1, 2 * cfg.w1, 3);
    add_conv(store, rng, prefix + "apu.head", cfg.feature_channels, cfg.w1, 3);
}

template <typename T>
int resblock(GraphT<T>& g, int x, const std::string& prefix) {
    int t = g.relu(g.conv2d(x, g.param(prefix + ".c1.w"), g.param(prefix + ".c1.b")));
    t = g.conv2d(t, g.param(prefix + ".c2.w"), g.param(prefix + ".c2.b"));
    return g.add(x, t);
}

template <typename T>
int ddm_attention_stage(GraphT<T>& g, int x, const std::string& prefix, int window) {
    const int c = g.val(x).extent(0), h = g.val(x).extent(1), w = g.val(x).extent(2);
    int q = g.conv2d(x, g.param(prefix + "ddm.q.w"), g.param(prefix + "ddm.q.b"));
    int k = g.conv2d(x, g.param(prefix + "ddm.k.w"), g.param(prefix + "ddm.k.b"));
    int v = g.conv2d(x, g.param(prefix + "ddm.v.w"), g.param(prefix + "ddm.v.b"));
    int qw = g.window_partition(q, window);
    int kw = g.window_partition(k, window);
    int vw = g.window_partition(v, window);
    int scores = g.scale(g.matmul_nt(qw, kw), T(1.0 / std::sqrt(static_cast<double>(c))));
    int attn = g.softmax_inner(scores, window * window);
    int mixed = g.window_merge(g.matmul_nn(attn, vw), c, h, w, window);
    int proj = g.conv2d(mixed, g.param(prefix + "ddm.proj.w"), g.param(prefix + "ddm.proj.b"));
    return g.add(x, proj);
}

template <typename T>
int ddm_freq_path(GraphT<T>& g, int x, const std::string& prefix) {
    int spec = g.fft2(x);
    int t = g.relu(g.conv2d(spec, g.param(prefix + "ddm.freq.c1.w"), g.param(prefix + "ddm.freq.c1.b")));
    t = g.conv2d(t, g.param(prefix + "ddm.freq.c2.w"), g.param(prefix + "ddm.freq.c2.b"));
    return g.ifft2_real(t);
}

namespace dsrmdetail {

// conv-relu-conv branch without the skip; the caller owns the residual term
template <typename T>
int rb_branch(GraphT<T>& g, int x, const std::string& prefix) {
    int t = g.relu(g.conv2d(x, g.param(prefix + ".c1.w"), g.param(prefix + ".c1.b")));
    return g.conv2d(t, g.param(prefix + ".c2.w"), g.param(prefix + ".c2.b"));
}

} // namespace dsrmdetail

template <typename T>
int ddm(GraphT<T>& g, int x, const std::string& prefix, const DsrmConfig& cfg) {
    switch (cfg.variant) {
    case DdmVariant::SpatialOnly:
        return ddm_attention_stage(g, x, prefix, cfg.window);
    case DdmVariant::FrequencyOnly: {
        int t = g.add(x, ddm_freq_path(g, x, prefix));
        return g.add(t, dsrmdetail::rb_branch(g, x, prefix + "ddm.rb"));
    }
    case DdmVariant::DualBranch: {
        int spat = ddm_attention_stage(g, x, prefix, cfg.window);
        int freq = g.add(x, ddm_freq_path(g, x, prefix));
        freq = g.add(freq, dsrmdetail::rb_branch(g, x, prefix + "ddm.rb"));
        int gate = g.sigmoid(g.conv2d(g.concat({spat, freq}), g.param(prefix + "ddm.gate.w"),
                                      g.param(prefix + "ddm.gate.b")));
        int one_minus = g.scale(gate, T(-1), T(1));
        return g.add(g.mul(gate, spat), g.mul(one_minus, freq));
    }
    case DdmVariant::Full:
    default: {
        // sequential: attention first, then the frequency stage with its
        // parallel conv branch sharing the residual term
        int s1 = ddm_attention_stage(g, x, prefix, cfg.window);
        int t = g.add(s1, ddm_freq_path(g, s1, prefix));
        return g.add(t, dsrmdetail::rb_branch(g, s1, prefix + "ddm.rb"));
    }
    }
}

template <typename T>
DsrmOut apu_step(GraphT<T>& g, int features, int hidden, const std::string& prefix) {
    if (!g.val(features).same_shape(g.val(hidden)))
        throw std::invalid_argument("apu_step: feature/hidden shape mismatch");
    int xh = g.concat({features, hidden});
    int z = g.sigmoid(g.conv2d(xh, g.param(prefix + "apu.z.w"), g.param(prefix + "apu.z.b")));
    int r = g.sigmoid(g.conv2d(xh, g.param(prefix + "apu.r.w"), g.param(prefix + "apu.r.b")));
    int xrh = g.concat({features, g.mul(r, hidden)});
    int cand = g.tanh_(g.conv2d(xrh, g.param(prefix + "apu.h.w"), g.param(prefix + "apu.h.b")));
    int one_minus_z = g.scale(z, T(-1), T(1));
    int hnew = g.add(g.mul(one_minus_z, hidden), g.mul(z, cand));
    int coeffs = g.sigmoid(
        g.conv2d(hnew, g.param(prefix + "apu.head.w"), g.param(prefix + "apu.head.b")));
    return {coeffs, hnew};
}

template <typename T>
DsrmOut dsrm_forward(GraphT<T>& g, int img, int hidden, const std::string& prefix,
                     const DsrmConfig& cfg) {
    const int h = g.val(img).extent(1), w = g.val(img).extent(2);

    int x1 = g.conv2d(img, g.param(prefix + "enc.in.w"), g.param(prefix + "enc.in.b"));
    x1 = resblock(g, x1, prefix + "enc.rb1");
    int x2 = g.relu(g.conv2d(x1, g.param(prefix + "enc.down1.w"), g.param(prefix + "enc.down1.b"), 2));
    x2 = resblock(g, x2, prefix + "enc.rb2");
    int x3 = g.relu(g.conv2d(x2, g.param(prefix + "enc.down2.w"), g.param(prefix + "enc.down2.b"), 2));
    x3 = resblock(g, x3, prefix + "enc.rb3");

    int b = ddm(g, x3, prefix, cfg);

    int u2 = g.resize_bilinear_to(b, g.val(x2).extent(1), g.val(x2).extent(2));
    u2 = g.conv2d(g.concat({u2, x2}), g.param(prefix + "dec.up1.w"), g.param(prefix + "dec.up1.b"));
    u2 = resblock(g, u2, prefix + "dec.rb1");
    int u1 = g.resize_bilinear_to(u2, h, w);
    u1 = g.conv2d(g.concat({u1, x1}), g.param(prefix + "dec.up2.w"), g.param(prefix + "dec.up2.b"));
    u1 = resblock(g, u1, prefix + "dec.rb2");

    if (hidden < 0) hidden = g.input(TensorT<T>({cfg.w1, h, w}));
    if (g.val(hidden).extent(0) != cfg.w1)
        throw std::invalid_argument("dsrm_forward: hidden channel mismatch");
    if (g.val(hidden).extent(1) != h || g.val(hidden).extent(2) != w)
        hidden = g.resize_bilinear_to(hidden, h, w);

    return apu_step(g, u1, hidden, prefix);
}

} // namespace fdikp

#endif
