// SPDX-License-Identifier: Apache-2.0
#include "fdikp/fikp.hpp"

#include <algorithm>
#include <cmath>

#include "fdikp/fft.hpp"
#include "fdikp/image_ops.hpp"

namespace fdikp {

Tensor analytic_inverse(const Tensor& kernel, int pad, double eps, int support) {
    if (kernel.rank() != 2 || kernel.extent(0) % 2 == 0 || kernel.extent(1) % 2 == 0)
        throw std::invalid_argument("analytic_inverse: kernel extents must be odd");
    if (eps < 0.0) throw std::invalid_argument("analytic_inverse: eps must be >= 0");
    if (pad < std::max(kernel.extent(0), kernel.extent(1)))
        throw std::invalid_argument("analytic_inverse: pad must cover the kernel");
    if (support == 0) support = kernel.extent(0);
    if (support != pad && support % 2 == 0)
        throw std::invalid_argument("analytic_inverse: support must be odd or equal to pad");
    if (support > pad) throw std::invalid_argument("analytic_inverse: support exceeds pad");

    Spectrum kf = fft2(embed_kernel_circular(kernel, pad, pad));
    Spectrum resp(pad, pad);
    for (int u = 0; u < pad; ++u) {
        for (int v = 0; v < pad; ++v) {
            const std::complex<double> kz = kf.at(u, v);
            const double p2 = std::norm(kz);
            if (eps == 0.0 && p2 <= 1e-24)
                throw std::runtime_error("analytic_inverse: spectral zero at bin (" +
                                         std::to_string(u) + "," + std::to_string(v) +
                                         "); Eq. (3) is singular there, use eps > 0");
            resp.at(u, v) = std::conj(kz) / (p2 + eps);
        }
    }
    Tensor spatial = fftshift(ifft2(resp, 1e-6));
    if (support == pad) return spatial;
    const int c = pad / 2, half = support / 2;
    Tensor out({support, support});
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x) out(y + half, x + half) = spatial(c + y, c + x);
    return out;
}

Tensor analytic_kernel_bank(const FikpConfig& cfg) {
    const int n = cfg.kernel_count, k = cfg.kernel_size;
    // fixed disk ladder; eps large enough to keep compact crops stable
    const double r_lo = 0.5, r_hi = 4.0, eps = 1e-2;
    const int pad = 64;
    Tensor bank({n, k, k});
    for (int i = 0; i < n; ++i) {
        const double r = (n == 1) ? r_lo : r_lo + (r_hi - r_lo) * i / (n - 1);
        Tensor inv = analytic_inverse(disk_kernel(r).weights, pad, eps, k);
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x) bank(i, y, x) = inv(y, x);
    }
    return bank;
}

Tensor pac_apply(const Tensor& plane, const Tensor& kernel, const DilatedMap& dmap) {
    if (plane.rank() != 2 || kernel.rank() != 2 || dmap.rank() != 2)
        throw std::invalid_argument("pac_apply: expects 2-d plane, kernel and map");
    if (kernel.extent(0) != kernel.extent(1) || kernel.extent(0) % 2 == 0)
        throw std::invalid_argument("pac_apply: kernel must be odd square");
    if (dmap.extent(0) != plane.extent(0) || dmap.extent(1) != plane.extent(1))
        throw std::invalid_argument("pac_apply: dilation map shape mismatch");
    const int h = plane.extent(0), w = plane.extent(1);
    const int k = kernel.extent(0), r = k / 2;
    Tensor out({h, w});
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d = dmap(y, x);
            double acc = 0.0;
            for (int a = -r; a <= r; ++a)
                for (int b = -r; b <= r; ++b)
                    acc += kernel(a + r, b + r) * sample_bilinear(plane, y + a * d, x + b * d);
            out(y, x) = acc;
        }
    }
    return out;
}

namespace {

KernelSet kernel_set_from(const Tensor& kernels) {
    KernelSet ks;
    ks.count = kernels.extent(0);
    ks.size = kernels.extent(1);
    ks.kernels = kernels;
    ks.amplitude = Tensor(kernels.shape());
    ks.phase = Tensor(kernels.shape());
    const std::int64_t plane = static_cast<std::int64_t>(ks.size) * ks.size;
    for (int n = 0; n < ks.count; ++n) {
        Tensor one({ks.size, ks.size});
        for (std::int64_t i = 0; i < plane; ++i) one[i] = kernels[n * plane + i];
        PolarSpectrum polar = to_polar(fft2(one));
        for (std::int64_t i = 0; i < plane; ++i) {
            ks.amplitude[n * plane + i] = polar.amplitude[i];
            ks.phase[n * plane + i] = polar.phase[i];
        }
    }
    return ks;
}

} // namespace

KernelSet dikp_predict(const Tensor& img, ParamStore& store, const std::string& prefix,
                       const FikpConfig& cfg, bool zero_phase) {
    Graph g(&store);
    const int node = dikp_predict_node(g, g.input(img), prefix, cfg, zero_phase);
    return kernel_set_from(g.val(node));
}

DilatedMap dilated_map(const Tensor& img, ParamStore& store, const std::string& prefix,
                       const FikpConfig& cfg) {
    Graph g(&store);
    const int node = dilated_map_node(g, g.input(img), prefix, cfg);
    const Tensor& v = g.val(node);
    Tensor out({v.extent(1), v.extent(2)});
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = v[i];
    return out;
}

} // namespace fdikp
