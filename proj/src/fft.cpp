// SPDX-License-Identifier: Apache-2.0
#include "fdikp/fft.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace fdikp {
namespace fftcore {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
    int m = 1;
    while (m < n) m <<= 1;
    return m;
}

template <typename T>
void fft_pow2(std::complex<T>* x, int n, const std::vector<std::complex<T>>& tw, bool inverse) {
    // bit reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int step = n / len;
        const int half = len / 2;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                std::complex<T> w = tw[static_cast<size_t>(k) * step];
                if (inverse) w = std::conj(w);
                std::complex<T> u = x[i + k];
                std::complex<T> v = x[i + k + half] * w;
                x[i + k] = u + v;
                x[i + k + half] = u - v;
            }
        }
    }
}

template <typename T>
std::shared_ptr<const Plan<T>> make_plan(int n) {
    auto p = std::make_shared<Plan<T>>();
    p->n = n;
    p->pow2 = is_pow2(n);
    if (p->pow2) {
        p->tw.resize(static_cast<size_t>(std::max(1, n / 2)));
        for (int k = 0; k < n / 2; ++k) {
            double a = -2.0 * kPi * k / n;
            p->tw[static_cast<size_t>(k)] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
        }
        return p;
    }
    p->m = next_pow2(2 * n - 1);
    p->sub = make_plan<T>(p->m); // direct: plan() holds the cache lock
    p->chirp.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the chirp angle accurate for large k
        long long q = (static_cast<long long>(k) * k) % (2LL * n);
        double a = -kPi * static_cast<double>(q) / n;
        p->chirp[static_cast<size_t>(k)] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
    }
    std::vector<std::complex<T>> b(static_cast<size_t>(p->m), std::complex<T>(0, 0));
    b[0] = std::conj(p->chirp[0]);
    for (int k = 1; k < n; ++k) {
        b[static_cast<size_t>(k)] = std::conj(p->chirp[static_cast<size_t>(k)]);
        b[static_cast<size_t>(p->m - k)] = std::conj(p->chirp[static_cast<size_t>(k)]);
    }
    fft_pow2(b.data(), p->m, p->sub->tw, false);
    p->bfft = std::move(b);
    return p;
}

template <typename T>
void bluestein(std::complex<T>* x, const Plan<T>& p) {
    const int n = p.n, m = p.m;
    std::vector<std::complex<T>> a(static_cast<size_t>(m), std::complex<T>(0, 0));
    for (int k = 0; k < n; ++k) a[static_cast<size_t>(k)] = x[k] * p.chirp[static_cast<size_t>(k)];
    fft_pow2(a.data(), m, p.sub->tw, false);
    for (int k = 0; k < m; ++k) a[static_cast<size_t>(k)] *= p.bfft[static_cast<size_t>(k)];
    fft_pow2(a.data(), m, p.sub->tw, true);
    const T inv_m = T(1) / static_cast<T>(m);
    for (int k = 0; k < n; ++k) x[k] = a[static_cast<size_t>(k)] * inv_m * p.chirp[static_cast<size_t>(k)];
}

template <typename T>
std::map<int, std::shared_ptr<const Plan<T>>>& plan_cache() {
    static std::map<int, std::shared_ptr<const Plan<T>>> cache;
    return cache;
}

template <typename T>
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

template <typename T>
std::shared_ptr<const Plan<T>> plan(int n) {
    if (n < 1) throw std::invalid_argument("fft: length must be >= 1");
    std::lock_guard<std::mutex> lock(plan_mutex<T>());
    auto& cache = plan_cache<T>();
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto p = make_plan<T>(n);
    cache.emplace(n, p);
    return p;
}

template <typename T>
void transform(std::complex<T>* x, const Plan<T>& p, bool inverse) {
    if (p.n == 1) return;
    if (p.pow2) {
        fft_pow2(x, p.n, p.tw, inverse);
        return;
    }
    if (!inverse) {
        bluestein(x, p);
        return;
    }
    // unnormalized inverse = conj(forward(conj(x)))
    for (int k = 0; k < p.n; ++k) x[k] = std::conj(x[k]);
    bluestein(x, p);
    for (int k = 0; k < p.n; ++k) x[k] = std::conj(x[k]);
}

template <typename T>
void transform2d(std::complex<T>* data, int rows, int cols, bool inverse) {
    auto prow = plan<T>(cols);
    auto pcol = plan<T>(rows);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < rows; ++y)
        transform(data + static_cast<size_t>(y) * cols, *prow, inverse);
#pragma omp parallel for schedule(static)
    for (int x = 0; x < cols; ++x) {
        std::vector<std::complex<T>> col(static_cast<size_t>(rows));
        for (int y = 0; y < rows; ++y) col[static_cast<size_t>(y)] = data[static_cast<size_t>(y) * cols + x];
        transform(col.data(), *pcol, inverse);
        for (int y = 0; y < rows; ++y) data[static_cast<size_t>(y) * cols + x] = col[static_cast<size_t>(y)];
    }
}

template struct Plan<float>;
template struct Plan<double>;
template std::shared_ptr<const Plan<float>> plan<float>(int);
template std::shared_ptr<const Plan<double>> plan<double>(int);
template void transform<float>(std::complex<float>*, const Plan<float>&, bool);
template void transform<double>(std::complex<double>*, const Plan<double>&, bool);
template void transform2d<float>(std::complex<float>*, int, int, bool);
template void transform2d<double>(std::complex<double>*, int, int, bool);

} // namespace fftcore

Spectrum fft2(const Tensor& plane) {
    if (plane.rank() != 2) throw std::invalid_argument("fft2: expected a 2-d plane");
    if (plane.size() == 0) throw std::invalid_argument("fft2: empty plane");
    const int h = plane.extent(0), w = plane.extent(1);
    Spectrum s(h, w);
    for (std::int64_t i = 0; i < plane.size(); ++i) s.v[static_cast<size_t>(i)] = {plane[i], 0.0};
    fftcore::transform2d(s.v.data(), h, w, false);
    return s;
}

Spectrum ifft2_complex(const Spectrum& spec) {
    if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("ifft2: empty spectrum");
    Spectrum out = spec;
    fftcore::transform2d(out.v.data(), out.rows, out.cols, true);
    const double inv = 1.0 / (static_cast<double>(out.rows) * out.cols);
    for (auto& z : out.v) z *= inv;
    return out;
}

Tensor ifft2(const Spectrum& spec, double residue_tol) {
    Spectrum c = ifft2_complex(spec);
    double max_re = 0.0, max_im = 0.0;
    for (const auto& z : c.v) {
        max_re = std::max(max_re, std::abs(z.real()));
        max_im = std::max(max_im, std::abs(z.imag()));
    }
    if (max_im > residue_tol * std::max(1.0, max_re))
        throw std::runtime_error("ifft2: non-negligible imaginary residue (" + std::to_string(max_im) +
                                 "); spectrum is not Hermitian");
    Tensor out({c.rows, c.cols});
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = c.v[static_cast<size_t>(i)].real();
    return out;
}

PolarSpectrum to_polar(const Spectrum& spec) {
    PolarSpectrum p;
    p.amplitude = Tensor({spec.rows, spec.cols});
    p.phase = Tensor({spec.rows, spec.cols});
    for (size_t i = 0; i < spec.v.size(); ++i) {
        const double a = std::abs(spec.v[i]);
        p.amplitude[static_cast<std::int64_t>(i)] = a;
        // phase at zero amplitude is defined as 0
        p.phase[static_cast<std::int64_t>(i)] = (a == 0.0) ? 0.0 : std::arg(spec.v[i]);
    }
    return p;
}

Spectrum from_polar(const PolarSpectrum& polar) {
    if (!polar.amplitude.same_shape(polar.phase))
        throw std::invalid_argument("from_polar: amplitude/phase shape mismatch");
    Spectrum s(polar.amplitude.extent(0), polar.amplitude.extent(1));
    for (std::int64_t i = 0; i < polar.amplitude.size(); ++i) {
        const double a = polar.amplitude[i], ph = polar.phase[i];
        s.v[static_cast<size_t>(i)] = {a * std::cos(ph), a * std::sin(ph)};
    }
    return s;
}

Tensor fftshift(const Tensor& plane) {
    if (plane.rank() != 2) throw std::invalid_argument("fftshift: expected a 2-d plane");
    const int h = plane.extent(0), w = plane.extent(1);
    Tensor out({h, w});
    const int sy = h / 2, sx = w / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out((y + sy) % h, (x + sx) % w) = plane(y, x);
    return out;
}

} // namespace fdikp
