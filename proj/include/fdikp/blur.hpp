// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_BLUR_HPP
#define FDIKP_BLUR_HPP

#include <string>
#include <vector>

#include "fdikp/image_ops.hpp"
#include "fdikp/tensor.hpp"

namespace fdikp {

/// Normalized nonnegative PSF on an odd K*K grid.
struct BlurKernel {
    int size = 1;
    Tensor weights; // sums to 1
};

/// Per-pixel blur radius in pixels (>= 0), same spatial extents as the image
/// it degrades.
using RadiusMap = Tensor;

struct SamplePair {
    Tensor sharp;  // (3,H,W) in [0,1]
    Tensor blur;   // (3,H,W) in [0,1]
    RadiusMap radius;
    double noise_sigma = 0.0;
};

/// Anti-aliased disk indicator of the given radius, area-coverage weighted
/// and normalized to sum 1. Extent is 2*ceil(radius)+1; radius 0 is the
/// delta kernel.
BlurKernel disk_kernel(double radius);

/// Sampled isotropic Gaussian, normalized to sum 1. Size must be odd.
BlurKernel gaussian_kernel(double sigma, int size);

Tensor blur_uniform(const Tensor& img, const BlurKernel& kernel, Boundary boundary);

/// Spatially varying disk blur, gather formulation: each output pixel
/// averages under the disk of its own radius; taps falling outside the image
/// are dropped and the kernel renormalized.
Tensor blur_varying(const Tensor& img, const RadiusMap& radius_map);

struct SynthConfig {
    std::uint64_t seed = 7;
    int count = 20;
    int height = 96, width = 96;
    double radius_min = 1.0, radius_max = 4.0;
    double noise_sigma = 0.002;
};

/// Deterministic procedural sharp/blurry pairs: rectangles, ellipses,
/// stroke clusters and filtered noise over a smooth background, degraded by
/// blur_varying plus additive Gaussian noise, clipped to [0,1].
std::vector<SamplePair> synth_dataset(const SynthConfig& cfg);

/// NNNN_sharp.png / NNNN_blur.png / NNNN_radius.fdkt / manifest.json layout.
void save_dataset(const std::string& dir, const std::vector<SamplePair>& pairs,
                  const SynthConfig& cfg);
std::vector<SamplePair> load_dataset(const std::string& dir);

} // namespace fdikp

#endif
