// SPDX-License-Identifier: Apache-2.0
#include "fdikp/reference.hpp"

#include <algorithm>
#include <cmath>

namespace fdikp::ref {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Spectrum dft2_naive(const Tensor& plane) {
    const int h = plane.extent(0), w = plane.extent(1);
    Spectrum s(h, w);
    for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc(0, 0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double ang = -2.0 * kPi * (static_cast<double>(u) * y / h +
                                                     static_cast<double>(v) * x / w);
                    acc += plane(y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            s.at(u, v) = acc;
        }
    }
    return s;
}

Spectrum idft2_naive(const Spectrum& spec) {
    const int h = spec.rows, w = spec.cols;
    Spectrum out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::complex<double> acc(0, 0);
            for (int u = 0; u < h; ++u) {
                for (int v = 0; v < w; ++v) {
                    const double ang = 2.0 * kPi * (static_cast<double>(u) * y / h +
                                                    static_cast<double>(v) * x / w);
                    acc += spec.at(u, v) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            out.at(y, x) = acc / static_cast<double>(h * w);
        }
    }
    return out;
}

Tensor conv2d_same_naive(const Tensor& plane, const Tensor& kernel, Boundary boundary) {
    const int h = plane.extent(0), w = plane.extent(1);
    const int ry = kernel.extent(0) / 2, rx = kernel.extent(1) / 2;
    Tensor out({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int a = -ry; a <= ry; ++a) {
                for (int b = -rx; b <= rx; ++b) {
                    const int sy = fold_index(y - a, h, boundary);
                    const int sx = fold_index(x - b, w, boundary);
                    acc += kernel(a + ry, b + rx) * plane(sy, sx);
                }
            }
            out(y, x) = acc;
        }
    }
    return out;
}

Tensor pac_gather_naive(const Tensor& plane, const Tensor& kernel, const Tensor& dmap) {
    const int h = plane.extent(0), w = plane.extent(1);
    const int kh = kernel.extent(0), kw = kernel.extent(1);
    const int ry = kh / 2, rx = kw / 2;
    Tensor out({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d = dmap(y, x);
            double acc = 0.0;
            for (int a = -ry; a <= ry; ++a)
                for (int b = -rx; b <= rx; ++b)
                    acc += kernel(a + ry, b + rx) * sample_bilinear(plane, y + a * d, x + b * d);
            out(y, x) = acc;
        }
    }
    return out;
}

Tensor disk_coverage_kernel(double radius, int ss) {
    const int half = static_cast<int>(std::ceil(radius));
    const int k = 2 * half + 1;
    Tensor out({k, k});
    if (radius <= 0.0) {
        out(half, half) = 1.0;
        return out;
    }
    const double r2 = radius * radius;
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            int inside = 0;
            for (int sy = 0; sy < ss; ++sy) {
                const double oy = i + (sy + 0.5) / ss - 0.5;
                for (int sx = 0; sx < ss; ++sx) {
                    const double ox = j + (sx + 0.5) / ss - 0.5;
                    if (oy * oy + ox * ox <= r2) ++inside;
                }
            }
            const double cov = static_cast<double>(inside) / (static_cast<double>(ss) * ss);
            out(i + half, j + half) = cov;
            total += cov;
        }
    }
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= total;
    return out;
}

double mse_naive(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double mae_naive(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

} // namespace fdikp::ref
