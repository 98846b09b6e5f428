// SPDX-License-Identifier: Apache-2.0
#include "fdikp/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fdikp/fft.hpp"

namespace fdikp {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

} // namespace

double l2_loss(const Tensor& y, const Tensor& yhat) {
    require_same_shape(y, yhat, "l2_loss");
    double acc = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

double freq_loss(const Tensor& y, const Tensor& yhat) {
    require_same_shape(y, yhat, "freq_loss");
    const bool plane = y.rank() == 2;
    const int c = plane ? 1 : y.extent(0);
    const int h = y.height(), w = y.width();
    const std::int64_t npix = static_cast<std::int64_t>(h) * w;
    double acc = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        Tensor diff({h, w});
        for (std::int64_t i = 0; i < npix; ++i) diff[i] = y[ch * npix + i] - yhat[ch * npix + i];
        Spectrum s = fft2(diff);
        for (const auto& z : s.v) acc += std::abs(z.real()) + std::abs(z.imag());
    }
    return acc / (static_cast<double>(c) * npix);
}

double single_scale_loss(const Tensor& y, const Tensor& yhat, const LossWeights& w) {
    return w.alpha * l2_loss(y, yhat) + w.gamma * freq_loss(y, yhat);
}

double multiscale_loss(const std::array<Tensor, 3>& targets, const std::array<Tensor, 3>& outputs,
                       const LossWeights& w) {
    for (int s = 0; s < 3; ++s) require_same_shape(targets[s], outputs[s], "multiscale_loss");
    return w.lambda1 * single_scale_loss(targets[0], outputs[0], w) +
           w.lambda2 * single_scale_loss(targets[1], outputs[1], w) +
           w.lambda3 * single_scale_loss(targets[2], outputs[2], w);
}

std::optional<double> psnr(const Tensor& y, const Tensor& yhat, double peak) {
    require_same_shape(y, yhat, "psnr");
    const double mse = l2_loss(y, yhat);
    if (mse == 0.0) return std::nullopt;
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

double ssim_plane(const double* a, const double* b, int h, int w) {
    constexpr int win = 11, half = 5;
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double wgt[win][win];
    double wsum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - half, dx = j - half;
            wgt[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            wsum += wgt[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) wgt[i][j] /= wsum;

    double acc = 0.0;
    std::int64_t count = 0;
#pragma omp parallel for schedule(static) reduction(+ : acc, count)
    for (int y = half; y < h - half; ++y) {
        for (int x = half; x < w - half; ++x) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < win; ++i) {
                const double* ra = a + static_cast<size_t>(y + i - half) * w + (x - half);
                const double* rb = b + static_cast<size_t>(y + i - half) * w + (x - half);
                for (int j = 0; j < win; ++j) {
                    const double va = ra[j], vb = rb[j], wv = wgt[i][j];
                    mx += wv * va;
                    my += wv * vb;
                    xx += wv * va * va;
                    yy += wv * vb * vb;
                    xy += wv * va * vb;
                }
            }
            const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

} // namespace

double ssim(const Tensor& y, const Tensor& yhat) {
    require_same_shape(y, yhat, "ssim");
    const bool plane = y.rank() == 2;
    const int c = plane ? 1 : y.extent(0);
    const int h = y.height(), w = y.width();
    if (h < 11 || w < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const std::int64_t npix = static_cast<std::int64_t>(h) * w;
    double acc = 0.0;
    for (int ch = 0; ch < c; ++ch)
        acc += ssim_plane(y.data() + ch * npix, yhat.data() + ch * npix, h, w);
    return acc / c;
}

double mae(const Tensor& y, const Tensor& yhat) {
    require_same_shape(y, yhat, "mae");
    double acc = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
    return acc / static_cast<double>(y.size());
}

MetricsRow MetricsReport::mean() const {
    MetricsRow m;
    m.name = "mean";
    double psnr_acc = 0.0;
    int psnr_n = 0;
    for (const auto& r : rows) {
        if (r.psnr) {
            psnr_acc += *r.psnr;
            ++psnr_n;
        }
        m.ssim += r.ssim;
        m.mae += r.mae;
    }
    if (!rows.empty()) {
        m.ssim /= static_cast<double>(rows.size());
        m.mae /= static_cast<double>(rows.size());
    }
    if (psnr_n > 0) m.psnr = psnr_acc / psnr_n;
    return m;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

std::string psnr_str(const std::optional<double>& p) { return p ? fmt(*p) : "identical"; }

} // namespace

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "# intensities in [0,1]; psnr peak 1.0\n";
    os << "name,psnr_db,ssim,mae\n";
    for (const auto& r : rows)
        os << r.name << "," << psnr_str(r.psnr) << "," << fmt(r.ssim) << "," << fmt(r.mae) << "\n";
    const MetricsRow m = mean();
    os << m.name << "," << psnr_str(m.psnr) << "," << fmt(m.ssim) << "," << fmt(m.mae) << "\n";
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["intensity_range"] = "[0,1]";
    j["config"] = config_echo;
    auto row_json = [](const MetricsRow& r) {
        nlohmann::json o;
        o["name"] = r.name;
        if (r.psnr)
            o["psnr_db"] = *r.psnr;
        else
            o["psnr_db"] = "identical";
        o["ssim"] = r.ssim;
        o["mae"] = r.mae;
        return o;
    };
    j["images"] = nlohmann::json::array();
    for (const auto& r : rows) j["images"].push_back(row_json(r));
    j["mean"] = row_json(mean());
    return j.dump(2);
}

} // namespace fdikp
