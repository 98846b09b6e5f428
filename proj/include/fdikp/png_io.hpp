// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_PNG_IO_HPP
#define FDIKP_PNG_IO_HPP

#include <string>

#include "fdikp/tensor.hpp"

namespace fdikp {

/// Reads an 8-bit PNG as a (3,H,W) tensor in [0,1]; grayscale and alpha
/// inputs are expanded/flattened to RGB.
Tensor read_png_rgb(const std::string& path);

/// Writes a (3,H,W) or (1,H,W)/(H,W) tensor as 8-bit RGB PNG. Values are
/// clipped to [0,1] and rounded. Encoder settings are fixed so identical
/// pixels produce identical files.
void write_png_rgb(const std::string& path, const Tensor& img);

} // namespace fdikp

#endif
