// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_FFT_HPP
#define FDIKP_FFT_HPP

#include <complex>
#include <memory>
#include <vector>

#include "fdikp/tensor.hpp"

namespace fdikp {

/// Complex 2-D frequency plane (one channel). Unnormalized forward
/// convention: DC bin equals the sum of the spatial values; the inverse
/// transform carries the 1/(H*W) factor.
struct Spectrum {
    int rows = 0, cols = 0;
    std::vector<std::complex<double>> v;

    Spectrum() = default;
    Spectrum(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c) {}

    std::complex<double>& at(int y, int x) { return v[static_cast<size_t>(y) * cols + x]; }
    std::complex<double> at(int y, int x) const { return v[static_cast<size_t>(y) * cols + x]; }
};

/// (amplitude, phase) decomposition of a Spectrum. Phase is the principal
/// argument in [-pi, pi]; zero-amplitude bins carry phase 0.
struct PolarSpectrum {
    Tensor amplitude; // >= 0
    Tensor phase;     // radians
};

namespace fftcore {

// Precomputed transform state for one length. Non-power-of-two lengths go
// through Bluestein's algorithm on an internal power-of-two grid.
template <typename T>
struct Plan {
    int n = 0;
    bool pow2 = false;
    std::vector<std::complex<T>> tw; // e^{-2*pi*i*k/n}, k < n/2
    int m = 0;                       // bluestein conv length (power of two)
    std::vector<std::complex<T>> chirp;
    std::vector<std::complex<T>> bfft;
    std::shared_ptr<const Plan<T>> sub;
};

template <typename T>
std::shared_ptr<const Plan<T>> plan(int n);

/// In-place unnormalized transform; inverse uses the conjugate exponent and
/// applies no 1/n scaling.
template <typename T>
void transform(std::complex<T>* x, const Plan<T>& p, bool inverse);

/// Row-column 2-D transform over a row-major H*W complex buffer,
/// unnormalized in both directions.
template <typename T>
void transform2d(std::complex<T>* data, int rows, int cols, bool inverse);

extern template struct Plan<float>;
extern template struct Plan<double>;
extern template std::shared_ptr<const Plan<float>> plan<float>(int);
extern template std::shared_ptr<const Plan<double>> plan<double>(int);
extern template void transform<float>(std::complex<float>*, const Plan<float>&, bool);
extern template void transform<double>(std::complex<double>*, const Plan<double>&, bool);
extern template void transform2d<float>(std::complex<float>*, int, int, bool);
extern template void transform2d<double>(std::complex<double>*, int, int, bool);

} // namespace fftcore

/// Unnormalized forward DFT of a real plane. Rejects empty planes.
Spectrum fft2(const Tensor& plane);

/// Normalized inverse transform returning the real plane. The imaginary
/// residue must stay below residue_tol relative to the result magnitude
/// (floor 1); a larger residue signals a non-Hermitian spectrum and throws.
Tensor ifft2(const Spectrum& spec, double residue_tol = 1e-9);

/// Normalized inverse keeping the complex result (no Hermitian requirement).
Spectrum ifft2_complex(const Spectrum& spec);

PolarSpectrum to_polar(const Spectrum& spec);
Spectrum from_polar(const PolarSpectrum& polar);

/// Circularly shifts a plane so the (0,0) bin lands at (H/2, W/2).
Tensor fftshift(const Tensor& plane);

} // namespace fdikp

#endif
