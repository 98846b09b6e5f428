// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_REFERENCE_HPP
#define FDIKP_REFERENCE_HPP

// Serial reference implementations. These are deliberately naive (direct
// double loops, no FFT, no OpenMP) and exist as independent oracles for the
// test suites plus as the baseline side of the benchmark tool. Keep them
// simple; do not optimize.

#include "fdikp/fft.hpp"
#include "fdikp/image_ops.hpp"
#include "fdikp/tensor.hpp"

namespace fdikp::ref {

/// Direct O(n^2) DFT of a real plane, unnormalized forward convention.
Spectrum dft2_naive(const Tensor& plane);

/// Direct normalized inverse DFT, complex result.
Spectrum idft2_naive(const Spectrum& spec);

/// Direct spatial convolution (true convolution, kernel flipped), same size.
Tensor conv2d_same_naive(const Tensor& plane, const Tensor& kernel, Boundary boundary);

/// Per-pixel dilated gather: out(p) = sum_i k_i * bilinear(x, p + dp_i * D(p)),
/// correlation orientation, border clamped.
Tensor pac_gather_naive(const Tensor& plane, const Tensor& kernel, const Tensor& dmap);

/// Area-coverage disk kernel via ss x ss supersampling per cell; the 16x
/// variant is the documented oracle for the production disk kernel.
Tensor disk_coverage_kernel(double radius, int ss);

double mse_naive(const Tensor& a, const Tensor& b);
double mae_naive(const Tensor& a, const Tensor& b);

} // namespace fdikp::ref

#endif
