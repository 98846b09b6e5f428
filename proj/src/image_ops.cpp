// SPDX-License-Identifier: Apache-2.0
#include "fdikp/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace fdikp {

int fold_index(int i, int n, Boundary b) {
    if (i >= 0 && i < n) return i;
    switch (b) {
    case Boundary::Clamp:
        return std::clamp(i, 0, n - 1);
    case Boundary::Periodic: {
        int m = i % n;
        return m < 0 ? m + n : m;
    }
    case Boundary::Reflect: {
        // period-2n triangle wave, edge-inclusive
        int p = i % (2 * n);
        if (p < 0) p += 2 * n;
        return p < n ? p : 2 * n - 1 - p;
    }
    }
    return 0;
}

namespace {

void conv_plane(const double* src, double* dst, int h, int w, const Tensor& k, Boundary boundary) {
    const int kh = k.extent(0), kw = k.extent(1);
    const int ry = kh / 2, rx = kw / 2;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        const bool y_edge = (y - ry < 0) || (y + ry >= h);
        for (int x = 0; x < w; ++x) {
            const bool edge = y_edge || (x - rx < 0) || (x + rx >= w);
            double acc = 0.0;
            if (!edge) {
                for (int a = -ry; a <= ry; ++a) {
                    const double* row = src + static_cast<size_t>(y - a) * w + x;
                    const double* krow = k.data() + static_cast<size_t>(a + ry) * kw;
                    for (int b = -rx; b <= rx; ++b) acc += krow[b + rx] * row[-b];
                }
            } else {
                for (int a = -ry; a <= ry; ++a) {
                    const int sy = fold_index(y - a, h, boundary);
                    const double* krow = k.data() + static_cast<size_t>(a + ry) * kw;
                    for (int b = -rx; b <= rx; ++b) {
                        const int sx = fold_index(x - b, w, boundary);
                        acc += krow[b + rx] * src[static_cast<size_t>(sy) * w + sx];
                    }
                }
            }
            dst[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

void resize_plane(const double* src, int ih, int iw, double* dst, int oh, int ow) {
    const double sy = static_cast<double>(ih) / oh;
    const double sx = static_cast<double>(iw) / ow;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, ih - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, iw - 1);
            const double wx = fx - x0;
            const double v00 = src[static_cast<size_t>(y0) * iw + x0];
            const double v01 = src[static_cast<size_t>(y0) * iw + x1];
            const double v10 = src[static_cast<size_t>(y1) * iw + x0];
            const double v11 = src[static_cast<size_t>(y1) * iw + x1];
            dst[static_cast<size_t>(y) * ow + x] =
                (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        }
    }
}

} // namespace

Tensor conv2d_same(const Tensor& img, const Tensor& kernel, Boundary boundary) {
    if (kernel.rank() != 2) throw std::invalid_argument("conv2d_same: kernel must be 2-d");
    if (kernel.extent(0) % 2 == 0 || kernel.extent(1) % 2 == 0)
        throw std::invalid_argument("conv2d_same: kernel extents must be odd");
    if (img.size() == 0) throw std::invalid_argument("conv2d_same: empty image");
    if (img.rank() == 2) {
        Tensor out({img.extent(0), img.extent(1)});
        conv_plane(img.data(), out.data(), img.extent(0), img.extent(1), kernel, boundary);
        return out;
    }
    if (img.rank() == 3) {
        const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
        Tensor out({c, h, w});
        for (int ch = 0; ch < c; ++ch)
            conv_plane(img.data() + static_cast<size_t>(ch) * h * w,
                       out.data() + static_cast<size_t>(ch) * h * w, h, w, kernel, boundary);
        return out;
    }
    throw std::invalid_argument("conv2d_same: image must be 2-d or 3-d");
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: output extents must be >= 1");
    if (img.size() == 0) throw std::invalid_argument("resize: empty input");
    if (img.rank() == 2) {
        Tensor out({out_h, out_w});
        resize_plane(img.data(), img.extent(0), img.extent(1), out.data(), out_h, out_w);
        return out;
    }
    if (img.rank() == 3) {
        const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
        Tensor out({c, out_h, out_w});
        for (int ch = 0; ch < c; ++ch)
            resize_plane(img.data() + static_cast<size_t>(ch) * h * w, h, w,
                         out.data() + static_cast<size_t>(ch) * out_h * out_w, out_h, out_w);
        return out;
    }
    throw std::invalid_argument("resize: image must be 2-d or 3-d");
}

namespace {

Tensor pad_to_even(const Tensor& img) {
    const bool plane = img.rank() == 2;
    const int c = plane ? 1 : img.extent(0);
    const int h = img.height(), w = img.width();
    const int ph = h + (h % 2), pw = w + (w % 2);
    if (ph == h && pw == w) return img;
    Tensor out(plane ? std::vector<int>{ph, pw} : std::vector<int>{c, ph, pw});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = img.data() + static_cast<size_t>(ch) * h * w;
        double* dst = out.data() + static_cast<size_t>(ch) * ph * pw;
        for (int y = 0; y < ph; ++y) {
            const int sy = fold_index(y, h, Boundary::Reflect);
            for (int x = 0; x < pw; ++x)
                dst[static_cast<size_t>(y) * pw + x] =
                    src[static_cast<size_t>(sy) * w + fold_index(x, w, Boundary::Reflect)];
        }
    }
    return out;
}

} // namespace

Tensor resize_half(const Tensor& img) {
    Tensor even = pad_to_even(img);
    return resize_bilinear(even, even.height() / 2, even.width() / 2);
}

Tensor resize_double(const Tensor& img) {
    if (img.size() == 0) throw std::invalid_argument("resize_double: empty input");
    return resize_bilinear(img, img.height() * 2, img.width() * 2);
}

Tensor embed_kernel_circular(const Tensor& kernel, int h, int w) {
    if (kernel.rank() != 2 || kernel.extent(0) % 2 == 0 || kernel.extent(1) % 2 == 0)
        throw std::invalid_argument("embed_kernel_circular: kernel extents must be odd");
    if (kernel.extent(0) > h || kernel.extent(1) > w)
        throw std::invalid_argument("embed_kernel_circular: kernel larger than grid");
    const int ry = kernel.extent(0) / 2, rx = kernel.extent(1) / 2;
    Tensor out({h, w});
    for (int a = -ry; a <= ry; ++a)
        for (int b = -rx; b <= rx; ++b)
            out(((a % h) + h) % h, ((b % w) + w) % w) += kernel(a + ry, b + rx);
    return out;
}

double sample_bilinear(const Tensor& plane, double y, double x) {
    const int h = plane.extent(0), w = plane.extent(1);
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double wy = y - y0, wx = x - x0;
    return (1 - wy) * ((1 - wx) * plane(y0, x0) + wx * plane(y0, x1)) +
           wy * ((1 - wx) * plane(y1, x0) + wx * plane(y1, x1));
}

} // namespace fdikp
