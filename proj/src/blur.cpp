// SPDX-License-Identifier: Apache-2.0
#include "fdikp/blur.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "fdikp/png_io.hpp"
#include "fdikp/rng.hpp"

namespace fdikp {

BlurKernel disk_kernel(double radius) {
    if (radius < 0.0) throw std::invalid_argument("disk_kernel: negative radius");
    const int half = static_cast<int>(std::ceil(radius));
    const int k = 2 * half + 1;
    BlurKernel out;
    out.size = k;
    out.weights = Tensor({k, k});
    if (radius == 0.0 || half == 0) {
        out.weights(half, half) = 1.0;
        return out;
    }
    // 32x area-coverage supersampling; tests pin against a 16x oracle
    constexpr int ss = 32;
    const double r2 = radius * radius;
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            int inside = 0;
            for (int sy = 0; sy < ss; ++sy) {
                const double oy = i + (sy + 0.5) / ss - 0.5;
                const double oy2 = oy * oy;
                for (int sx = 0; sx < ss; ++sx) {
                    const double ox = j + (sx + 0.5) / ss - 0.5;
                    if (oy2 + ox * ox <= r2) ++inside;
                }
            }
            const double cov = static_cast<double>(inside) / (ss * ss);
            out.weights(i + half, j + half) = cov;
            total += cov;
        }
    }
    for (std::int64_t i = 0; i < out.weights.size(); ++i) out.weights[i] /= total;
    return out;
}

BlurKernel gaussian_kernel(double sigma, int size) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd");
    const int half = size / 2;
    BlurKernel out;
    out.size = size;
    out.weights = Tensor({size, size});
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
            out.weights(i + half, j + half) = v;
            total += v;
        }
    }
    for (std::int64_t i = 0; i < out.weights.size(); ++i) out.weights[i] /= total;
    return out;
}

Tensor blur_uniform(const Tensor& img, const BlurKernel& kernel, Boundary boundary) {
    return conv2d_same(img, kernel.weights, boundary);
}

namespace {

void blur_varying_plane(const double* src, double* dst, int h, int w,
                        const RadiusMap& radius_map,
                        const std::unordered_map<std::uint64_t, Tensor>& table) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = radius_map(y, x);
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(double));
            std::memcpy(&bits, &r, sizeof(bits));
            const Tensor& k = table.at(bits);
            const int half = k.extent(0) / 2;
            double acc = 0.0, wsum = 0.0;
            for (int a = -half; a <= half; ++a) {
                const int sy = y + a;
                if (sy < 0 || sy >= h) continue;
                for (int b = -half; b <= half; ++b) {
                    const int sx = x + b;
                    if (sx < 0 || sx >= w) continue;
                    const double wgt = k(a + half, b + half);
                    acc += wgt * src[static_cast<size_t>(sy) * w + sx];
                    wsum += wgt;
                }
            }
            dst[static_cast<size_t>(y) * w + x] = acc / wsum;
        }
    }
}

} // namespace

Tensor blur_varying(const Tensor& img, const RadiusMap& radius_map) {
    const bool plane = img.rank() == 2;
    if (!plane && img.rank() != 3)
        throw std::invalid_argument("blur_varying: image must be 2-d or 3-d");
    const int c = plane ? 1 : img.extent(0);
    const int h = img.height(), w = img.width();
    if (radius_map.rank() != 2 || radius_map.extent(0) != h || radius_map.extent(1) != w)
        throw std::invalid_argument("blur_varying: radius map shape mismatch");

    std::unordered_map<std::uint64_t, Tensor> table;
    for (std::int64_t i = 0; i < radius_map.size(); ++i) {
        const double r = radius_map[i];
        if (!(r >= 0.0)) throw std::invalid_argument("blur_varying: radii must be finite and >= 0");
        std::uint64_t bits;
        std::memcpy(&bits, &r, sizeof(bits));
        if (!table.count(bits)) table.emplace(bits, Tensor());
    }
    std::vector<std::uint64_t> keys;
    keys.reserve(table.size());
    for (auto& kv : table) keys.push_back(kv.first);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(keys.size()); ++i) {
        double r;
        std::memcpy(&r, &keys[static_cast<size_t>(i)], sizeof(r));
        Tensor k = disk_kernel(r).weights;
        table[keys[static_cast<size_t>(i)]] = std::move(k);
    }

    Tensor out(img.shape());
    for (int ch = 0; ch < c; ++ch)
        blur_varying_plane(img.data() + static_cast<size_t>(ch) * h * w,
                           out.data() + static_cast<size_t>(ch) * h * w, h, w, radius_map, table);
    return out;
}

namespace {

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void paint_rect(Tensor& img, int y0, int x0, int rh, int rw, const double rgb[3]) {
    const int h = img.extent(1), w = img.extent(2);
    for (int y = std::max(0, y0); y < std::min(h, y0 + rh); ++y)
        for (int x = std::max(0, x0); x < std::min(w, x0 + rw); ++x)
            for (int ccc = 0; ccc < 3; ++ccc) img(ccc, y, x) = rgb[ccc];
}

void paint_ellipse(Tensor& img, double cy, double cx, double ay, double ax, const double rgb[3]) {
    const int h = img.extent(1), w = img.extent(2);
    const int y0 = std::max(0, static_cast<int>(cy - ay)), y1 = std::min(h - 1, static_cast<int>(cy + ay));
    const int x0 = std::max(0, static_cast<int>(cx - ax)), x1 = std::min(w - 1, static_cast<int>(cx + ax));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dy = (y - cy) / ay, dx = (x - cx) / ax;
            if (dy * dy + dx * dx <= 1.0)
                for (int ccc = 0; ccc < 3; ++ccc) img(ccc, y, x) = rgb[ccc];
        }
}

void paint_stroke(Tensor& img, Rng& rng, const double rgb[3]) {
    const int h = img.extent(1), w = img.extent(2);
    double y = rng.uniform(4.0, h - 4.0), x = rng.uniform(4.0, w - 4.0);
    double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const int steps = 6 + rng.uniform_int(std::max(4, std::min(h, w) / 3));
    const double thick = rng.uniform(0.6, 1.4);
    for (int s = 0; s < steps; ++s) {
        const int iy0 = std::max(0, static_cast<int>(y - thick)), iy1 = std::min(h - 1, static_cast<int>(y + thick));
        const int ix0 = std::max(0, static_cast<int>(x - thick)), ix1 = std::min(w - 1, static_cast<int>(x + thick));
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix)
                if ((iy - y) * (iy - y) + (ix - x) * (ix - x) <= thick * thick)
                    for (int ccc = 0; ccc < 3; ++ccc) img(ccc, iy, ix) = rgb[ccc];
        y += std::sin(ang);
        x += std::cos(ang);
        ang += rng.uniform(-0.35, 0.35);
        if (y < 1 || y > h - 2 || x < 1 || x > w - 2) break;
    }
}

void pick_color(Rng& rng, double rgb[3]) {
    const double base = rng.uniform(0.05, 0.95);
    for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(base + rng.uniform(-0.15, 0.15), 0.0, 1.0);
}

Tensor make_sharp_image(int h, int w, Rng& rng) {
    // smooth colored background from upsampled low-res noise
    const int gh = 3 + rng.uniform_int(4), gw = 3 + rng.uniform_int(4);
    Tensor low({3, gh, gw});
    for (int c = 0; c < 3; ++c) {
        const double tint = rng.uniform(-0.08, 0.08);
        for (int y = 0; y < gh; ++y)
            for (int x = 0; x < gw; ++x)
                low(c, y, x) = std::clamp(0.25 + 0.5 * rng.uniform() + tint, 0.0, 1.0);
    }
    Tensor img = resize_bilinear(low, h, w);

    double rgb[3];
    const int n_rect = 2 + rng.uniform_int(4);
    for (int i = 0; i < n_rect; ++i) {
        pick_color(rng, rgb);
        paint_rect(img, rng.uniform_int(h), rng.uniform_int(w), 3 + rng.uniform_int(h / 2),
                   3 + rng.uniform_int(w / 2), rgb);
    }
    const int n_ell = 1 + rng.uniform_int(3);
    for (int i = 0; i < n_ell; ++i) {
        pick_color(rng, rgb);
        paint_ellipse(img, rng.uniform(0.0, h), rng.uniform(0.0, w), rng.uniform(2.0, h / 3.0),
                      rng.uniform(2.0, w / 3.0), rgb);
    }
    const int n_strokes = 2 + rng.uniform_int(5);
    for (int i = 0; i < n_strokes; ++i) {
        const double v = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.15) : rng.uniform(0.85, 1.0);
        rgb[0] = rgb[1] = rgb[2] = v;
        paint_stroke(img, rng, rgb);
    }
    // band-limited texture patch
    if (rng.uniform() < 0.8) {
        const int ty = rng.uniform_int(h / 2), tx = rng.uniform_int(w / 2);
        const int th = h / 4 + rng.uniform_int(h / 4), tw = w / 4 + rng.uniform_int(w / 4);
        const double amp = rng.uniform(0.05, 0.18);
        for (int y = ty; y < std::min(h, ty + th); ++y)
            for (int x = tx; x < std::min(w, tx + tw); ++x) {
                const double n = amp * (rng.uniform() - 0.5);
                for (int c = 0; c < 3; ++c) img(c, y, x) = std::clamp(img(c, y, x) + n, 0.0, 1.0);
            }
    }
    return img;
}

RadiusMap make_radius_map(int h, int w, double rmin, double rmax, Rng& rng) {
    RadiusMap map({h, w});
    const int mode = rng.uniform_int(4);
    const double r0 = rng.uniform(rmin, rmax), r1 = rng.uniform(rmin, rmax);
    switch (mode) {
    case 0: // constant
        for (std::int64_t i = 0; i < map.size(); ++i) map[i] = quantize_f32(r0);
        break;
    case 1: { // two regions
        const bool vertical = rng.uniform() < 0.5;
        const int cut = vertical ? (w / 4 + rng.uniform_int(std::max(1, w / 2)))
                                 : (h / 4 + rng.uniform_int(std::max(1, h / 2)));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                map(y, x) = quantize_f32(((vertical ? x : y) < cut) ? r0 : r1);
        break;
    }
    case 2: { // linear ramp
        const bool horizontal = rng.uniform() < 0.5;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double t = horizontal ? (w > 1 ? static_cast<double>(x) / (w - 1) : 0.0)
                                            : (h > 1 ? static_cast<double>(y) / (h - 1) : 0.0);
                map(y, x) = quantize_f32(r0 + (r1 - r0) * t);
            }
        break;
    }
    default: { // radial
        const double cy = rng.uniform(0.0, h), cx = rng.uniform(0.0, w);
        const double dmax = std::sqrt(static_cast<double>(h) * h + static_cast<double>(w) * w) * 0.5;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d = std::hypot(y - cy, x - cx) / dmax;
                map(y, x) = quantize_f32(std::min(rmin, rmax) +
                                         std::abs(r1 - r0) * std::clamp(d, 0.0, 1.0));
            }
        break;
    }
    }
    return map;
}

} // namespace

std::vector<SamplePair> synth_dataset(const SynthConfig& cfg) {
    if (cfg.radius_min > cfg.radius_max)
        throw std::invalid_argument("synth_dataset: radius_min > radius_max");
    if (cfg.count < 0 || cfg.height < 8 || cfg.width < 8)
        throw std::invalid_argument("synth_dataset: bad count or extents");
    std::vector<SamplePair> pairs(static_cast<size_t>(cfg.count));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(i)));
        SamplePair& p = pairs[static_cast<size_t>(i)];
        p.sharp = make_sharp_image(cfg.height, cfg.width, rng);
        p.radius = make_radius_map(cfg.height, cfg.width, cfg.radius_min, cfg.radius_max, rng);
        p.noise_sigma = cfg.noise_sigma;
        p.blur = blur_varying(p.sharp, p.radius);
        for (std::int64_t j = 0; j < p.blur.size(); ++j) {
            const double noisy = p.blur[j] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0);
            p.blur[j] = std::clamp(noisy, 0.0, 1.0);
        }
    }
    return pairs;
}

namespace {

std::string sample_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    return buf;
}

} // namespace

void save_dataset(const std::string& dir, const std::vector<SamplePair>& pairs,
                  const SynthConfig& cfg) {
    std::filesystem::create_directories(dir);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const std::string stem = dir + "/" + sample_name(static_cast<int>(i));
        write_png_rgb(stem + "_sharp.png", pairs[i].sharp);
        write_png_rgb(stem + "_blur.png", pairs[i].blur);
        write_fdkt(stem + "_radius.fdkt", pairs[i].radius);
    }
    nlohmann::json manifest;
    manifest["count"] = pairs.size();
    manifest["seed"] = cfg.seed;
    manifest["height"] = cfg.height;
    manifest["width"] = cfg.width;
    manifest["radius_min"] = cfg.radius_min;
    manifest["radius_max"] = cfg.radius_max;
    manifest["noise_sigma"] = cfg.noise_sigma;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw std::runtime_error("save_dataset: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

std::vector<SamplePair> load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw std::runtime_error("load_dataset: missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);
    const int count = manifest.at("count").get<int>();
    const double sigma = manifest.value("noise_sigma", 0.0);
    std::vector<SamplePair> pairs(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::string stem = dir + "/" + sample_name(i);
        SamplePair& p = pairs[static_cast<size_t>(i)];
        p.sharp = read_png_rgb(stem + "_sharp.png");
        p.blur = read_png_rgb(stem + "_blur.png");
        p.radius = read_fdkt(stem + "_radius.fdkt");
        p.noise_sigma = sigma;
    }
    return pairs;
}

} // namespace fdikp
