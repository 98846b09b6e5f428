// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_IMAGE_OPS_HPP
#define FDIKP_IMAGE_OPS_HPP

#include "fdikp/tensor.hpp"

namespace fdikp {

enum class Boundary { Reflect, Periodic, Clamp };

/// Edge-inclusive index folding for the chosen boundary mode. Reflect is the
/// symmetric half-sample convention (..., 1, 0 | 0, 1, ...), defined for any
/// extent >= 1.
int fold_index(int i, int n, Boundary b);

/// True convolution (kernel flipped) with "same" output size. Accepts a 2-d
/// plane or a (C,H,W) image; kernel extents must be odd.
Tensor conv2d_same(const Tensor& img, const Tensor& kernel, Boundary boundary);

/// Bilinear resampling with edge-clamped source coordinates
/// (src = (dst + 0.5) * in/out - 0.5). Works on 2-d planes or (C,H,W).
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

/// Half/double resolution helpers. resize_half pads odd extents by one
/// reflected row/column first.
Tensor resize_half(const Tensor& img);
Tensor resize_double(const Tensor& img);

/// 4-neighbor bilinear lookup at a fractional (y, x); coordinates are clamped
/// to the plane border. Exact at integer coordinates.
double sample_bilinear(const Tensor& plane, double y, double x);

/// Embeds an odd-sized kernel on an h*w grid with its center tap at (0,0),
/// wrapping negative offsets. fft2 of the result is the kernel's transfer
/// function under periodic convolution.
Tensor embed_kernel_circular(const Tensor& kernel, int h, int w);

} // namespace fdikp

#endif
