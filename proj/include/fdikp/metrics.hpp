// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_METRICS_HPP
#define FDIKP_METRICS_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fdikp/autodiff.hpp"
#include "fdikp/tensor.hpp"

namespace fdikp {

/// Multi-scale and single-scale loss weights. The LPIPS slot (beta) is kept
/// so configurations stay shaped like the training recipe, but no perceptual
/// term is computed behind it.
struct LossWeights {
    double lambda1 = 1.0, lambda2 = 0.2, lambda3 = 0.1;
    double alpha = 1.0, beta = 0.2, gamma = 0.2;
};

double l2_loss(const Tensor& y, const Tensor& yhat);

/// Mean absolute difference of DFT coefficients, real and imaginary parts
/// separately, averaged per channel: (1/(C*H*W)) * sum(|d_re| + |d_im|).
double freq_loss(const Tensor& y, const Tensor& yhat);

double single_scale_loss(const Tensor& y, const Tensor& yhat, const LossWeights& w);

/// sum_s lambda_s * (alpha*l2 + gamma*freq) over full, 1/2 and 1/4 scales.
double multiscale_loss(const std::array<Tensor, 3>& targets,
                       const std::array<Tensor, 3>& outputs, const LossWeights& w);

/// 10*log10(peak^2/MSE); nullopt is the "identical" sentinel for MSE = 0.
std::optional<double> psnr(const Tensor& y, const Tensor& yhat, double peak = 1.0);

/// Windowed SSIM, 11x11 Gaussian window sigma 1.5, C1=0.01^2, C2=0.03^2 at
/// peak 1, averaged over valid window positions and channels.
double ssim(const Tensor& y, const Tensor& yhat);

double mae(const Tensor& y, const Tensor& yhat);

struct MetricsRow {
    std::string name;
    std::optional<double> psnr;
    double ssim = 0.0;
    double mae = 0.0;
};

/// Per-image rows plus an arithmetic mean row; serializes to CSV and JSON.
/// MAE and PSNR are computed on [0,1] intensities.
struct MetricsReport {
    std::vector<MetricsRow> rows;
    std::string config_echo;

    MetricsRow mean() const;
    std::string to_csv() const;
    std::string to_json() const;
};

// ---- graph-level losses (training path) ----

template <typename T>
int l2_loss_node(GraphT<T>& g, int y, int yhat) {
    int d = g.sub(y, yhat);
    return g.mean_all(g.mul(d, d));
}

template <typename T>
int freq_loss_node(GraphT<T>& g, int y, int yhat) {
    int d = g.fft2(g.sub(y, yhat));
    // mean over 2C*H*W halves the per-channel sum; fold the 2 back in
    return g.scale(g.mean_all(g.abs_(d)), T(2));
}

template <typename T>
int single_scale_loss_node(GraphT<T>& g, int y, int yhat, const LossWeights& w) {
    int l2 = g.scale(l2_loss_node(g, y, yhat), T(w.alpha));
    int fr = g.scale(freq_loss_node(g, y, yhat), T(w.gamma));
    return g.add(l2, fr);
}

template <typename T>
int multiscale_loss_node(GraphT<T>& g, const std::array<int, 3>& targets,
                         const std::array<int, 3>& outputs, const LossWeights& w) {
    int full = g.scale(single_scale_loss_node(g, targets[0], outputs[0], w), T(w.lambda1));
    int half = g.scale(single_scale_loss_node(g, targets[1], outputs[1], w), T(w.lambda2));
    int quarter = g.scale(single_scale_loss_node(g, targets[2], outputs[2], w), T(w.lambda3));
    return g.add(full, g.add(half, quarter));
}

} // namespace fdikp

#endif
