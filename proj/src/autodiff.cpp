// SPDX-License-Identifier: Apache-2.0
#include "fdikp/autodiff.hpp"

namespace fdikp {

using addetail::bilinear_clamped;
using addetail::bilinear_taps;
using addetail::reflect_idx;

// ---------------------------------------------------------------- conv2d

template <typename T>
int GraphT<T>::conv2d(int x, int w, int b, int stride) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    const auto& bv = val(b);
    if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
        throw std::invalid_argument("conv2d: expects x(C,H,W) w(Co,Ci,kh,kw) b(Co)");
    const int ci = xv.extent(0), h = xv.extent(1), ww = xv.extent(2);
    const int co = wv.extent(0), kh = wv.extent(2), kw = wv.extent(3);
    if (wv.extent(1) != ci || bv.extent(0) != co)
        throw std::invalid_argument("conv2d: channel mismatch");
    if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel extents must be odd");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    const int ph = kh / 2, pw = kw / 2;
    const int oh = (h + 2 * ph - kh) / stride + 1;
    const int ow = (ww + 2 * pw - kw) / stride + 1;

    TensorT<T> out({co, oh, ow});
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        T* dst = out.data() + static_cast<size_t>(o) * oh * ow;
        const T bias = bv[o];
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) dst[i] = bias;
        for (int c = 0; c < ci; ++c) {
            const T* src = xv.data() + static_cast<size_t>(c) * h * ww;
            const T* wk = wv.data() + (static_cast<size_t>(o) * ci + c) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const T wgt = wk[static_cast<size_t>(ky) * kw + kx];
                    if (wgt == T(0)) continue;
                    // output rows whose sampled input row stays in range
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - ph;
                        if (iy < 0 || iy >= h) continue;
                        const T* srow = src + static_cast<size_t>(iy) * ww;
                        T* drow = dst + static_cast<size_t>(oy) * ow;
                        int ox0 = 0, ox1 = ow - 1;
                        // ix = ox*stride + kx - pw must stay in [0, ww)
                        while (ox0 <= ox1 && ox0 * stride + kx - pw < 0) ++ox0;
                        while (ox1 >= ox0 && ox1 * stride + kx - pw >= ww) --ox1;
                        const int base = kx - pw;
                        if (stride == 1) {
                            for (int ox = ox0; ox <= ox1; ++ox) drow[ox] += wgt * srow[ox + base];
                        } else {
                            for (int ox = ox0; ox <= ox1; ++ox) drow[ox] += wgt * srow[2 * ox + base];
                        }
                    }
                }
            }
        }
    }
    int id = push(Op::Conv2d, {x, w, b}, std::move(out));
    node(id).ia = stride;
    return id;
}

namespace {

template <typename T>
void conv2d_backward(const TensorT<T>& xv, const TensorT<T>& wv, const TensorT<T>& g, int stride,
                     TensorT<T>& xg, TensorT<T>& wg, TensorT<T>& bg) {
    const int ci = xv.extent(0), h = xv.extent(1), ww = xv.extent(2);
    const int co = wv.extent(0), kh = wv.extent(2), kw = wv.extent(3);
    const int ph = kh / 2, pw = kw / 2;
    const int oh = g.extent(1), ow = g.extent(2);

#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        const T* gp = g.data() + static_cast<size_t>(o) * oh * ow;
        T acc = T(0);
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) acc += gp[i];
        bg[o] += acc;
    }

    // weight grads: one (o,c) pair per task, deterministic inner order
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co * ci; ++oc) {
        const int o = oc / ci, c = oc % ci;
        const T* gp = g.data() + static_cast<size_t>(o) * oh * ow;
        const T* src = xv.data() + static_cast<size_t>(c) * h * ww;
        T* wgp = wg.data() + (static_cast<size_t>(o) * ci + c) * kh * kw;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                T acc = T(0);
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - ph;
                    if (iy < 0 || iy >= h) continue;
                    const T* srow = src + static_cast<size_t>(iy) * ww;
                    const T* grow = gp + static_cast<size_t>(oy) * ow;
                    int ox0 = 0, ox1 = ow - 1;
                    while (ox0 <= ox1 && ox0 * stride + kx - pw < 0) ++ox0;
                    while (ox1 >= ox0 && ox1 * stride + kx - pw >= ww) --ox1;
                    const int base = kx - pw;
                    if (stride == 1) {
                        for (int ox = ox0; ox <= ox1; ++ox) acc += grow[ox] * srow[ox + base];
                    } else {
                        for (int ox = ox0; ox <= ox1; ++ox) acc += grow[ox] * srow[2 * ox + base];
                    }
                }
                wgp[static_cast<size_t>(ky) * kw + kx] += acc;
            }
        }
    }

    // input grads: each task owns one input channel plane
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ci; ++c) {
        T* xgp = xg.data() + static_cast<size_t>(c) * h * ww;
        for (int o = 0; o < co; ++o) {
            const T* gp = g.data() + static_cast<size_t>(o) * oh * ow;
            const T* wk = wv.data() + (static_cast<size_t>(o) * ci + c) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const T wgt = wk[static_cast<size_t>(ky) * kw + kx];
                    if (wgt == T(0)) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - ph;
                        if (iy < 0 || iy >= h) continue;
                        T* xrow = xgp + static_cast<size_t>(iy) * ww;
                        const T* grow = gp + static_cast<size_t>(oy) * ow;
                        int ox0 = 0, ox1 = ow - 1;
                        while (ox0 <= ox1 && ox0 * stride + kx - pw < 0) ++ox0;
                        while (ox1 >= ox0 && ox1 * stride + kx - pw >= ww) --ox1;
                        const int base = kx - pw;
                        if (stride == 1) {
                            for (int ox = ox0; ox <= ox1; ++ox) xrow[ox + base] += wgt * grow[ox];
                        } else {
                            for (int ox = ox0; ox <= ox1; ++ox) xrow[2 * ox + base] += wgt * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

} // namespace

// ------------------------------------------------------------------- pac

template <typename T>
int GraphT<T>::pac(int x, int kernels, int dmap) {
    const auto& xv = val(x);
    const auto& kv = val(kernels);
    const auto& dv = val(dmap);
    if (xv.rank() != 3 || kv.rank() != 3 || dv.rank() != 3)
        throw std::invalid_argument("pac: expects x(C,H,W) kernels(N,K,K) D(1,H,W)");
    const int c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    const int n = kv.extent(0), k = kv.extent(1);
    if (kv.extent(2) != k || k % 2 == 0) throw std::invalid_argument("pac: kernels must be odd square");
    if (dv.extent(0) != 1 || dv.extent(1) != h || dv.extent(2) != w)
        throw std::invalid_argument("pac: dilation map shape mismatch");
    const int r = k / 2;

    TensorT<T> out({n * c, h, w});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const int kn = nc / c, ch = nc % c;
        const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
        const T* kp = kv.data() + static_cast<size_t>(kn) * k * k;
        T* dst = out.data() + static_cast<size_t>(nc) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const T d = dv[static_cast<std::int64_t>(y) * w + xx];
                T acc = T(0);
                for (int a = -r; a <= r; ++a)
                    for (int b = -r; b <= r; ++b)
                        acc += kp[static_cast<size_t>(a + r) * k + (b + r)] *
                               bilinear_clamped(src, h, w, T(y) + T(a) * d, T(xx) + T(b) * d);
                dst[static_cast<std::int64_t>(y) * w + xx] = acc;
            }
        }
    }
    return push(Op::Pac, {x, kernels, dmap}, std::move(out));
}

namespace {

template <typename T>
void pac_backward(const TensorT<T>& xv, const TensorT<T>& kv, const TensorT<T>& dv,
                  const TensorT<T>& g, TensorT<T>& xg, TensorT<T>& kg, TensorT<T>& dg) {
    const int c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    const int n = kv.extent(0), k = kv.extent(1);
    const int r = k / 2;

    // kernel grads: one kernel per task
#pragma omp parallel for schedule(static)
    for (int kn = 0; kn < n; ++kn) {
        T* kgp = kg.data() + static_cast<size_t>(kn) * k * k;
        for (int ch = 0; ch < c; ++ch) {
            const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
            const T* gp = g.data() + (static_cast<size_t>(kn) * c + ch) * h * w;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const T gv = gp[static_cast<std::int64_t>(y) * w + xx];
                    if (gv == T(0)) continue;
                    const T d = dv[static_cast<std::int64_t>(y) * w + xx];
                    for (int a = -r; a <= r; ++a)
                        for (int b = -r; b <= r; ++b)
                            kgp[static_cast<size_t>(a + r) * k + (b + r)] +=
                                gv * bilinear_clamped(src, h, w, T(y) + T(a) * d, T(xx) + T(b) * d);
                }
        }
    }

    // image grads: each task owns one image channel plane
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
        T* xgp = xg.data() + static_cast<size_t>(ch) * h * w;
        for (int kn = 0; kn < n; ++kn) {
            const T* kp = kv.data() + static_cast<size_t>(kn) * k * k;
            const T* gp = g.data() + (static_cast<size_t>(kn) * c + ch) * h * w;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const T gv = gp[static_cast<std::int64_t>(y) * w + xx];
                    if (gv == T(0)) continue;
                    const T d = dv[static_cast<std::int64_t>(y) * w + xx];
                    for (int a = -r; a <= r; ++a)
                        for (int b = -r; b <= r; ++b) {
                            const T wgt = kp[static_cast<size_t>(a + r) * k + (b + r)] * gv;
                            auto t = bilinear_taps(src, h, w, T(y) + T(a) * d, T(xx) + T(b) * d);
                            xgp[static_cast<size_t>(t.y0) * w + t.x0] += wgt * t.w00;
                            xgp[static_cast<size_t>(t.y0) * w + t.x1] += wgt * t.w01;
                            xgp[static_cast<size_t>(t.y1) * w + t.x0] += wgt * t.w10;
                            xgp[static_cast<size_t>(t.y1) * w + t.x1] += wgt * t.w11;
                        }
                }
        }
    }

    // dilation grads: per output pixel
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            const T d = dv[static_cast<std::int64_t>(y) * w + xx];
            T acc = T(0);
            for (int kn = 0; kn < n; ++kn) {
                const T* kp = kv.data() + static_cast<size_t>(kn) * k * k;
                for (int ch = 0; ch < c; ++ch) {
                    const T gv = g[(static_cast<std::int64_t>(kn) * c + ch) * h * w +
                                   static_cast<std::int64_t>(y) * w + xx];
                    if (gv == T(0)) continue;
                    const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
                    for (int a = -r; a <= r; ++a)
                        for (int b = -r; b <= r; ++b) {
                            auto t = bilinear_taps(src, h, w, T(y) + T(a) * d, T(xx) + T(b) * d);
                            acc += gv * kp[static_cast<size_t>(a + r) * k + (b + r)] *
                                   (t.dvdy * T(a) + t.dvdx * T(b));
                        }
                }
            }
            dg[static_cast<std::int64_t>(y) * w + xx] += acc;
        }
    }
}

} // namespace

// ----------------------------------------------------------- grid_sample

template <typename T>
int GraphT<T>::grid_sample(int x, int gy, int gx) {
    const auto& xv = val(x);
    const auto& yv = val(gy);
    const auto& xv2 = val(gx);
    if (xv.rank() != 3 || yv.rank() != 3 || xv2.rank() != 3 || yv.extent(0) != 1 ||
        !yv.same_shape(xv2))
        throw std::invalid_argument("grid_sample: expects x(C,H,W) gy(1,h,w) gx(1,h,w)");
    const int c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    const int oh = yv.extent(1), ow = yv.extent(2);
    TensorT<T> out({c, oh, ow});
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
        T* dst = out.data() + static_cast<size_t>(ch) * oh * ow;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i)
            dst[i] = bilinear_clamped(src, h, w, yv[i], xv2[i]);
    }
    return push(Op::GridSample, {x, gy, gx}, std::move(out));
}

// ---------------------------------------------------------------- resize

template <typename T>
int GraphT<T>::resize_bilinear_to(int a, int oh, int ow) {
    const auto& x = val(a);
    if (x.rank() != 3) throw std::invalid_argument("resize: expects (C,H,W)");
    if (oh < 1 || ow < 1) throw std::invalid_argument("resize: bad output extents");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    TensorT<T> out({c, oh, ow});
    const T sy = T(h) / T(oh), sx = T(w) / T(ow);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const T* src = x.data() + static_cast<size_t>(ch) * h * w;
        T* dst = out.data() + static_cast<size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                dst[static_cast<std::int64_t>(y) * ow + xx] = bilinear_clamped(
                    src, h, w, (T(y) + T(0.5)) * sy - T(0.5), (T(xx) + T(0.5)) * sx - T(0.5));
    }
    int id = push(Op::ResizeBilinear, {a}, std::move(out));
    node(id).ia = oh;
    node(id).ib = ow;
    return id;
}

// ------------------------------------------------------------------ pool

template <typename T>
int GraphT<T>::adaptive_avg_pool(int a, int oh, int ow) {
    const auto& x = val(a);
    if (x.rank() != 3) throw std::invalid_argument("pool: expects (C,H,W)");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    if (oh < 1 || ow < 1 || oh > h || ow > w)
        throw std::invalid_argument("pool: output extents must be in [1, input extents]");
    TensorT<T> out({c, oh, ow});
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const T* src = x.data() + static_cast<size_t>(ch) * h * w;
        T* dst = out.data() + static_cast<size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const int y0 = (y * h) / oh;
            const int y1 = ((y + 1) * h + oh - 1) / oh;
            for (int xx = 0; xx < ow; ++xx) {
                const int x0 = (xx * w) / ow;
                const int x1 = ((xx + 1) * w + ow - 1) / ow;
                T acc = T(0);
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) acc += src[static_cast<size_t>(iy) * w + ix];
                dst[static_cast<std::int64_t>(y) * ow + xx] = acc / T((y1 - y0) * (x1 - x0));
            }
        }
    }
    int id = push(Op::AdaptiveAvgPool, {a}, std::move(out));
    node(id).ia = oh;
    node(id).ib = ow;
    return id;
}

// -------------------------------------------------------------- spectral

template <typename T>
int GraphT<T>::fft2(int a) {
    const auto& x = val(a);
    if (x.rank() != 3) throw std::invalid_argument("fft2: expects (C,H,W)");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    TensorT<T> out({2 * c, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        std::vector<std::complex<T>> buf(static_cast<size_t>(plane));
        const T* src = x.data() + ch * plane;
        for (std::int64_t i = 0; i < plane; ++i) buf[static_cast<size_t>(i)] = {src[i], T(0)};
        fftcore::transform2d(buf.data(), h, w, false);
        T* re = out.data() + ch * plane;
        T* im = out.data() + (c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            re[i] = buf[static_cast<size_t>(i)].real();
            im[i] = buf[static_cast<size_t>(i)].imag();
        }
    }
    return push(Op::Fft2, {a}, std::move(out));
}

template <typename T>
int GraphT<T>::ifft2_real(int a) {
    const auto& x = val(a);
    if (x.rank() != 3 || x.extent(0) % 2 != 0)
        throw std::invalid_argument("ifft2_real: expects (2C,H,W)");
    const int c = x.extent(0) / 2, h = x.extent(1), w = x.extent(2);
    TensorT<T> out({c, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const T inv = T(1) / T(plane);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        std::vector<std::complex<T>> buf(static_cast<size_t>(plane));
        const T* re = x.data() + ch * plane;
        const T* im = x.data() + (c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) buf[static_cast<size_t>(i)] = {re[i], im[i]};
        fftcore::transform2d(buf.data(), h, w, true);
        T* dst = out.data() + ch * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] = buf[static_cast<size_t>(i)].real() * inv;
    }
    return push(Op::Ifft2Real, {a}, std::move(out));
}

template <typename T>
int GraphT<T>::fftshift2(int a) {
    const auto& x = val(a);
    if (x.rank() != 3) throw std::invalid_argument("fftshift2: expects (C,H,W)");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    TensorT<T> out(x.shape());
    const int sy = h / 2, sx = w / 2;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                out(ch, (y + sy) % h, (xx + sx) % w) = x(ch, y, xx);
    return push(Op::FftShift2, {a}, std::move(out));
}

template <typename T>
int GraphT<T>::complex_abs(int a) {
    const auto& x = val(a);
    if (x.rank() != 3 || x.extent(0) % 2 != 0)
        throw std::invalid_argument("complex_abs: expects (2C,H,W)");
    const int c = x.extent(0) / 2;
    const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
    TensorT<T> out({c, x.extent(1), x.extent(2)});
    for (int ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < plane; ++i)
            out[ch * plane + i] = std::hypot(x[ch * plane + i], x[(c + ch) * plane + i]);
    return push(Op::ComplexAbs, {a}, std::move(out));
}

template <typename T>
int GraphT<T>::complex_arg(int a) {
    const auto& x = val(a);
    if (x.rank() != 3 || x.extent(0) % 2 != 0)
        throw std::invalid_argument("complex_arg: expects (2C,H,W)");
    const int c = x.extent(0) / 2;
    const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
    TensorT<T> out({c, x.extent(1), x.extent(2)});
    for (int ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < plane; ++i) {
            const T re = x[ch * plane + i], im = x[(c + ch) * plane + i];
            out[ch * plane + i] = (re == T(0) && im == T(0)) ? T(0) : std::atan2(im, re);
        }
    return push(Op::ComplexArg, {a}, std::move(out));
}

// --------------------------------------------------------------- matmuls

template <typename T>
int GraphT<T>::matmul_nt(int a, int b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.extent(0) != bv.extent(0) ||
        av.extent(2) != bv.extent(2))
        throw std::invalid_argument("matmul_nt: expects (B,I,K) x (B,J,K)");
    const int bb = av.extent(0), ii = av.extent(1), kk = av.extent(2), jj = bv.extent(1);
    TensorT<T> out({bb, ii, jj});
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < bb; ++bi) {
        const T* ap = av.data() + static_cast<size_t>(bi) * ii * kk;
        const T* bp = bv.data() + static_cast<size_t>(bi) * jj * kk;
        T* op = out.data() + static_cast<size_t>(bi) * ii * jj;
        for (int i = 0; i < ii; ++i)
            for (int j = 0; j < jj; ++j) {
                T acc = T(0);
                for (int k = 0; k < kk; ++k)
                    acc += ap[static_cast<size_t>(i) * kk + k] * bp[static_cast<size_t>(j) * kk + k];
                op[static_cast<size_t>(i) * jj + j] = acc;
            }
    }
    return push(Op::MatmulNT, {a, b}, std::move(out));
}

template <typename T>
int GraphT<T>::matmul_nn(int a, int b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.extent(0) != bv.extent(0) ||
        av.extent(2) != bv.extent(1))
        throw std::invalid_argument("matmul_nn: expects (B,I,J) x (B,J,K)");
    const int bb = av.extent(0), ii = av.extent(1), jj = av.extent(2), kk = bv.extent(2);
    TensorT<T> out({bb, ii, kk});
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < bb; ++bi) {
        const T* ap = av.data() + static_cast<size_t>(bi) * ii * jj;
        const T* bp = bv.data() + static_cast<size_t>(bi) * jj * kk;
        T* op = out.data() + static_cast<size_t>(bi) * ii * kk;
        for (int i = 0; i < ii; ++i)
            for (int k = 0; k < kk; ++k) {
                T acc = T(0);
                for (int j = 0; j < jj; ++j)
                    acc += ap[static_cast<size_t>(i) * jj + j] * bp[static_cast<size_t>(j) * kk + k];
                op[static_cast<size_t>(i) * kk + k] = acc;
            }
    }
    return push(Op::MatmulNN, {a, b}, std::move(out));
}

// --------------------------------------------------------------- windows

template <typename T>
int GraphT<T>::window_partition(int a, int win) {
    const auto& x = val(a);
    if (x.rank() != 3 || win < 1) throw std::invalid_argument("window_partition: bad input");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    const int hp = ((h + win - 1) / win) * win;
    const int wp = ((w + win - 1) / win) * win;
    const int nwy = hp / win, nwx = wp / win;
    TensorT<T> out({nwy * nwx, win * win, c});
    for (int wy = 0; wy < nwy; ++wy)
        for (int wx = 0; wx < nwx; ++wx) {
            const int wi = wy * nwx + wx;
            for (int ty = 0; ty < win; ++ty)
                for (int tx = 0; tx < win; ++tx) {
                    const int sy = reflect_idx(wy * win + ty, h);
                    const int sx = reflect_idx(wx * win + tx, w);
                    const int t = ty * win + tx;
                    for (int ch = 0; ch < c; ++ch)
                        out(wi, t, ch) = x(ch, sy, sx);
                }
        }
    int id = push(Op::WindowPartition, {a}, std::move(out));
    node(id).ia = win;
    node(id).ib = h;
    node(id).ic = w;
    return id;
}

template <typename T>
int GraphT<T>::window_merge(int a, int c, int h, int w, int win) {
    const auto& x = val(a);
    const int hp = ((h + win - 1) / win) * win;
    const int wp = ((w + win - 1) / win) * win;
    const int nwx = wp / win;
    if (x.rank() != 3 || x.extent(0) != (hp / win) * nwx || x.extent(1) != win * win ||
        x.extent(2) != c)
        throw std::invalid_argument("window_merge: shape mismatch");
    TensorT<T> out({c, h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const int wi = (y / win) * nwx + (xx / win);
            const int t = (y % win) * win + (xx % win);
            for (int ch = 0; ch < c; ++ch) out(ch, y, xx) = x(wi, t, ch);
        }
    int id = push(Op::WindowMerge, {a}, std::move(out));
    node(id).ia = win;
    node(id).ib = h;
    node(id).ic = w;
    node(id).id = c;
    return id;
}

// -------------------------------------------------------------- backward

template <typename T>
void GraphT<T>::backward(int loss) {
    if (backward_done_) throw std::logic_error("graph: one backward pass per forward build");
    if (loss < 0 || loss >= size()) throw std::invalid_argument("backward: bad node id");
    if (val(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = TensorT<T>(n.val.shape());
    node(loss).grad[0] = T(1);
    for (int id = loss; id >= 0; --id) backward_node(id);
    backward_done_ = true;
}

template <typename T>
void GraphT<T>::backward_node(int id) {
    NodeT<T>& n = node(id);
    const TensorT<T>& g = n.grad;
    bool any = false;
    for (std::int64_t i = 0; i < g.size() && !any; ++i) any = g[i] != T(0);
    if (!any) return;

    auto gin = [&](int k) -> TensorT<T>& { return node(n.ins[static_cast<size_t>(k)]).grad; };
    auto vin = [&](int k) -> const TensorT<T>& { return val(n.ins[static_cast<size_t>(k)]); };

    switch (n.op) {
    case Op::Input:
    case Op::Param:
        return;
    case Op::Add:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gin(0)[i] += g[i];
            gin(1)[i] += g[i];
        }
        return;
    case Op::Sub:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gin(0)[i] += g[i];
            gin(1)[i] -= g[i];
        }
        return;
    case Op::Mul:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gin(0)[i] += g[i] * vin(1)[i];
            gin(1)[i] += g[i] * vin(0)[i];
        }
        return;
    case Op::Scale:
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * n.fa;
        return;
    case Op::Relu:
        for (std::int64_t i = 0; i < g.size(); ++i)
            if (vin(0)[i] > T(0)) gin(0)[i] += g[i];
        return;
    case Op::Sigmoid:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const T s = n.val[i];
            gin(0)[i] += g[i] * s * (T(1) - s);
        }
        return;
    case Op::Tanh:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const T t = n.val[i];
            gin(0)[i] += g[i] * (T(1) - t * t);
        }
        return;
    case Op::Abs:
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const T x = vin(0)[i];
            gin(0)[i] += g[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
        }
        return;
    case Op::Sin:
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * std::cos(vin(0)[i]);
        return;
    case Op::Cos:
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[i] -= g[i] * std::sin(vin(0)[i]);
        return;
    case Op::Log1p:
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] / (T(1) + vin(0)[i]);
        return;
    case Op::PowConst:
        for (std::int64_t i = 0; i < g.size(); ++i)
            gin(0)[i] += g[i] * n.fa * std::pow(vin(0)[i], n.fa - T(1));
        return;
    case Op::SoftmaxInner: {
        const int inner = n.ia;
        const std::int64_t rows = g.size() / inner;
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* y = n.val.data() + r * inner;
            const T* gp = g.data() + r * inner;
            T dot = T(0);
            for (int i = 0; i < inner; ++i) dot += gp[i] * y[i];
            T* xg = gin(0).data() + r * inner;
            for (int i = 0; i < inner; ++i) xg[i] += y[i] * (gp[i] - dot);
        }
        return;
    }
    case Op::Conv2d: {
        TensorT<T>& bgrad = gin(2);
        conv2d_backward(vin(0), vin(1), g, n.ia, gin(0), gin(1), bgrad);
        return;
    }
    case Op::Pac:
        pac_backward(vin(0), vin(1), vin(2), g, gin(0), gin(1), gin(2));
        return;
    case Op::GridSample: {
        const auto& xv = vin(0);
        const auto& yv = vin(1);
        const auto& xv2 = vin(2);
        const int c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
        const std::int64_t npix = static_cast<std::int64_t>(yv.extent(1)) * yv.extent(2);
        for (int ch = 0; ch < c; ++ch) {
            const T* src = xv.data() + static_cast<size_t>(ch) * h * w;
            const T* gp = g.data() + ch * npix;
            T* xgp = gin(0).data() + static_cast<size_t>(ch) * h * w;
            for (std::int64_t i = 0; i < npix; ++i) {
                const T gv = gp[i];
                if (gv == T(0)) continue;
                auto t = bilinear_taps(src, h, w, yv[i], xv2[i]);
                xgp[static_cast<size_t>(t.y0) * w + t.x0] += gv * t.w00;
                xgp[static_cast<size_t>(t.y0) * w + t.x1] += gv * t.w01;
                xgp[static_cast<size_t>(t.y1) * w + t.x0] += gv * t.w10;
                xgp[static_cast<size_t>(t.y1) * w + t.x1] += gv * t.w11;
                gin(1)[i] += gv * t.dvdy;
                gin(2)[i] += gv * t.dvdx;
            }
        }
        return;
    }
    case Op::Fft2: {
        const auto& x = vin(0);
        const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
        const std::int64_t plane = static_cast<std::int64_t>(h) * w;
        for (int ch = 0; ch < c; ++ch) {
            std::vector<std::complex<T>> buf(static_cast<size_t>(plane));
            const T* gre = g.data() + ch * plane;
            const T* gim = g.data() + (c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) buf[static_cast<size_t>(i)] = {gre[i], gim[i]};
            // adjoint of the unnormalized forward transform
            fftcore::transform2d(buf.data(), h, w, true);
            T* xg = gin(0).data() + ch * plane;
            for (std::int64_t i = 0; i < plane; ++i) xg[i] += buf[static_cast<size_t>(i)].real();
        }
        return;
    }
    case Op::Ifft2Real: {
        const auto& x = vin(0);
        const int c = x.extent(0) / 2, h = x.extent(1), w = x.extent(2);
        const std::int64_t plane = static_cast<std::int64_t>(h) * w;
        const T inv = T(1) / T(plane);
        for (int ch = 0; ch < c; ++ch) {
            std::vector<std::complex<T>> buf(static_cast<size_t>(plane));
            const T* gp = g.data() + ch * plane;
            for (std::int64_t i = 0; i < plane; ++i) buf[static_cast<size_t>(i)] = {gp[i], T(0)};
            fftcore::transform2d(buf.data(), h, w, true);
            T* gre = gin(0).data() + ch * plane;
            T* gim = gin(0).data() + (c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                gre[i] += buf[static_cast<size_t>(i)].real() * inv;
                gim[i] -= buf[static_cast<size_t>(i)].imag() * inv;
            }
        }
        return;
    }
    case Op::FftShift2: {
        const auto& x = vin(0);
        const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
        const int sy = h / 2, sx = w / 2;
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    gin(0)[(static_cast<std::int64_t>(ch) * h + y) * w + xx] +=
                        g[(static_cast<std::int64_t>(ch) * h + (y + sy) % h) * w + (xx + sx) % w];
        return;
    }
    case Op::ComplexAbs: {
        const auto& x = vin(0);
        const int c = x.extent(0) / 2;
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        for (int ch = 0; ch < c; ++ch)
            for (std::int64_t i = 0; i < plane; ++i) {
                const T re = x[ch * plane + i], im = x[(c + ch) * plane + i];
                const T mag = n.val[ch * plane + i];
                if (mag == T(0)) continue;
                gin(0)[ch * plane + i] += g[ch * plane + i] * re / mag;
                gin(0)[(c + ch) * plane + i] += g[ch * plane + i] * im / mag;
            }
        return;
    }
    case Op::ComplexArg: {
        const auto& x = vin(0);
        const int c = x.extent(0) / 2;
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        for (int ch = 0; ch < c; ++ch)
            for (std::int64_t i = 0; i < plane; ++i) {
                const T re = x[ch * plane + i], im = x[(c + ch) * plane + i];
                const T d2 = re * re + im * im;
                if (d2 == T(0)) continue;
                gin(0)[ch * plane + i] += g[ch * plane + i] * (-im / d2);
                gin(0)[(c + ch) * plane + i] += g[ch * plane + i] * (re / d2);
            }
        return;
    }
    case Op::ResizeBilinear: {
        const auto& x = vin(0);
        const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
        const int oh = n.ia, ow = n.ib;
        const T sy = T(h) / T(oh), sx = T(w) / T(ow);
        for (int ch = 0; ch < c; ++ch) {
            const T* src = x.data() + static_cast<size_t>(ch) * h * w;
            const T* gp = g.data() + static_cast<std::int64_t>(ch) * oh * ow;
            T* xg = gin(0).data() + static_cast<size_t>(ch) * h * w;
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    const T gv = gp[static_cast<std::int64_t>(y) * ow + xx];
                    if (gv == T(0)) continue;
                    auto t = bilinear_taps(src, h, w, (T(y) + T(0.5)) * sy - T(0.5),
                                           (T(xx) + T(0.5)) * sx - T(0.5));
                    xg[static_cast<size_t>(t.y0) * w + t.x0] += gv * t.w00;
                    xg[static_cast<size_t>(t.y0) * w + t.x1] += gv * t.w01;
                    xg[static_cast<size_t>(t.y1) * w + t.x0] += gv * t.w10;
                    xg[static_cast<size_t>(t.y1) * w + t.x1] += gv * t.w11;
                }
        }
        return;
    }
    case Op::AdaptiveAvgPool: {
        const auto& x = vin(0);
        const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
        const int oh = n.ia, ow = n.ib;
        for (int ch = 0; ch < c; ++ch) {
            const T* gp = g.data() + static_cast<std::int64_t>(ch) * oh * ow;
            T* xg = gin(0).data() + static_cast<size_t>(ch) * h * w;
            for (int y = 0; y < oh; ++y) {
                const int y0 = (y * h) / oh, y1 = ((y + 1) * h + oh - 1) / oh;
                for (int xx = 0; xx < ow; ++xx) {
                    const int x0 = (xx * w) / ow, x1 = ((xx + 1) * w + ow - 1) / ow;
                    const T gv = gp[static_cast<std::int64_t>(y) * ow + xx] / T((y1 - y0) * (x1 - x0));
                    for (int iy = y0; iy < y1; ++iy)
                        for (int ix = x0; ix < x1; ++ix) xg[static_cast<size_t>(iy) * w + ix] += gv;
                }
            }
        }
        return;
    }
    case Op::Concat: {
        std::int64_t off = 0;
        for (size_t k = 0; k < n.ins.size(); ++k) {
            TensorT<T>& ig = gin(static_cast<int>(k));
            for (std::int64_t i = 0; i < ig.size(); ++i) ig[i] += g[off + i];
            off += ig.size();
        }
        return;
    }
    case Op::SliceChan: {
        const auto& x = vin(0);
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        const std::int64_t off = n.ia * plane;
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[off + i] += g[i];
        return;
    }
    case Op::ChannelMean: {
        const auto& x = vin(0);
        const int c = x.extent(0);
        const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
        for (int ch = 0; ch < c; ++ch)
            for (std::int64_t i = 0; i < plane; ++i) gin(0)[ch * plane + i] += g[i] / T(c);
        return;
    }
    case Op::SumAll:
        for (std::int64_t i = 0; i < gin(0).size(); ++i) gin(0)[i] += g[0];
        return;
    case Op::MeanAll: {
        const T gv = g[0] / T(gin(0).size());
        for (std::int64_t i = 0; i < gin(0).size(); ++i) gin(0)[i] += gv;
        return;
    }
    case Op::SumPerChan: {
        const int c = vin(0).extent(0);
        const std::int64_t rest = vin(0).size() / c;
        for (int ch = 0; ch < c; ++ch)
            for (std::int64_t i = 0; i < rest; ++i) gin(0)[ch * rest + i] += g[ch];
        return;
    }
    case Op::AddChanBcast: {
        const int c = vin(0).extent(0);
        const std::int64_t rest = vin(0).size() / c;
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (std::int64_t i = 0; i < rest; ++i) {
                gin(0)[ch * rest + i] += g[ch * rest + i];
                acc += g[ch * rest + i];
            }
            gin(1)[ch] += acc;
        }
        return;
    }
    case Op::MulChanBcast: {
        const int c = vin(0).extent(0);
        const std::int64_t rest = vin(0).size() / c;
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            const T wv = vin(1)[ch];
            for (std::int64_t i = 0; i < rest; ++i) {
                gin(0)[ch * rest + i] += g[ch * rest + i] * wv;
                acc += g[ch * rest + i] * vin(0)[ch * rest + i];
            }
            gin(1)[ch] += acc;
        }
        return;
    }
    case Op::MatmulNT: {
        const auto& a = vin(0);
        const auto& b = vin(1);
        const int bb = a.extent(0), ii = a.extent(1), kk = a.extent(2), jj = b.extent(1);
        for (int bi = 0; bi < bb; ++bi) {
            const T* ap = a.data() + static_cast<size_t>(bi) * ii * kk;
            const T* bp = b.data() + static_cast<size_t>(bi) * jj * kk;
            const T* gp = g.data() + static_cast<size_t>(bi) * ii * jj;
            T* agp = gin(0).data() + static_cast<size_t>(bi) * ii * kk;
            T* bgp = gin(1).data() + static_cast<size_t>(bi) * jj * kk;
            for (int i = 0; i < ii; ++i)
                for (int j = 0; j < jj; ++j) {
                    const T gv = gp[static_cast<size_t>(i) * jj + j];
                    if (gv == T(0)) continue;
                    for (int k = 0; k < kk; ++k) {
                        agp[static_cast<size_t>(i) * kk + k] += gv * bp[static_cast<size_t>(j) * kk + k];
                        bgp[static_cast<size_t>(j) * kk + k] += gv * ap[static_cast<size_t>(i) * kk + k];
                    }
                }
        }
        return;
    }
    case Op::MatmulNN: {
        const auto& a = vin(0);
        const auto& b = vin(1);
        const int bb = a.extent(0), ii = a.extent(1), jj = a.extent(2), kk = b.extent(2);
        for (int bi = 0; bi < bb; ++bi) {
            const T* ap = a.data() + static_cast<size_t>(bi) * ii * jj;
            const T* bp = b.data() + static_cast<size_t>(bi) * jj * kk;
            const T* gp = g.data() + static_cast<size_t>(bi) * ii * kk;
            T* agp = gin(0).data() + static_cast<size_t>(bi) * ii * jj;
            T* bgp = gin(1).data() + static_cast<size_t>(bi) * jj * kk;
            for (int i = 0; i < ii; ++i)
                for (int k = 0; k < kk; ++k) {
                    const T gv = gp[static_cast<size_t>(i) * kk + k];
                    if (gv == T(0)) continue;
                    for (int j = 0; j < jj; ++j) {
                        agp[static_cast<size_t>(i) * jj + j] += gv * bp[static_cast<size_t>(j) * kk + k];
                        bgp[static_cast<size_t>(j) * kk + k] += gv * ap[static_cast<size_t>(i) * jj + j];
                    }
                }
        }
        return;
    }
    case Op::WindowPartition: {
        const auto& x = vin(0);
        const int c = x.extent(0), h = n.ib, w = n.ic, win = n.ia;
        const int nwx = ((w + win - 1) / win);
        const int nwy = ((h + win - 1) / win);
        for (int wy = 0; wy < nwy; ++wy)
            for (int wx = 0; wx < nwx; ++wx) {
                const int wi = wy * nwx + wx;
                for (int ty = 0; ty < win; ++ty)
                    for (int tx = 0; tx < win; ++tx) {
                        const int sy = reflect_idx(wy * win + ty, h);
                        const int sx = reflect_idx(wx * win + tx, w);
                        const int t = ty * win + tx;
                        for (int ch = 0; ch < c; ++ch)
                            gin(0)[(static_cast<std::int64_t>(ch) * h + sy) * w + sx] +=
                                g[(static_cast<std::int64_t>(wi) * win * win + t) * c + ch];
                    }
            }
        return;
    }
    case Op::WindowMerge: {
        const int win = n.ia, h = n.ib, w = n.ic, c = n.id;
        const int nwx = ((w + win - 1) / win);
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const int wi = (y / win) * nwx + (xx / win);
                const int t = (y % win) * win + (xx % win);
                for (int ch = 0; ch < c; ++ch)
                    gin(0)[(static_cast<std::int64_t>(wi) * win * win + t) * c + ch] +=
                        g[(static_cast<std::int64_t>(ch) * h + y) * w + xx];
            }
        return;
    }
    case Op::Reshape:
        for (std::int64_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
        return;
    }
    throw std::logic_error("backward: unsupported op tag");
}

template class GraphT<float>;
template class GraphT<double>;

} // namespace fdikp
