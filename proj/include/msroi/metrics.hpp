#pragma once

// Quality metrics: PSNR, salient-region PSNR (PSNR-S), SSIM and MS-SSIM.
// SSIM family is computed on the BT.601 luma channel with the usual
// 11x11 Gaussian window (sigma 1.5, K1=0.01, K2=0.03, L=255).

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/image.hpp"

namespace msroi {

inline constexpr double kPsnrInf = std::numeric_limits<double>::infinity();
// "no qualifying pixels" marker for PSNR-S
inline constexpr double kMetricAbsent = std::numeric_limits<double>::quiet_NaN();

inline bool metric_absent(double v) { return std::isnan(v); }

struct MetricsReport {
    std::string id;
    std::size_t bytes = 0;
    double psnr = 0;
    double psnrS = 0;
    double ssim = 0;
    double msssim = 0;
};

namespace metricdetail {

inline void check_dims(const RgbImage& a, const RgbImage& b, const char* who) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(who) + ": image dimensions differ (" +
                                    std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                    std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
}

inline std::vector<double> luma(const RgbImage& img) {
    std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
               0.114 * img.pixels[3 * i + 2];
    return y;
}

inline std::vector<double> gaussian_kernel11() {
    std::vector<double> k(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        double x = i - 5;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2 * 1.5 * 1.5));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable valid-mode filtering
inline std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, int& ow,
                                        int& oh) {
    static const auto k = gaussian_kernel11();
    ow = w - 10;
    oh = h - 10;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * img[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

struct SsimParts {
    double mean;      // mean SSIM over windows
    double contrast;  // mean contrast*structure term (for MS-SSIM)
};

inline SsimParts ssim_parts(const std::vector<double>& ya, const std::vector<double>& yb, int w,
                            int h) {
    constexpr double C1 = (0.01 * 255) * (0.01 * 255);
    constexpr double C2 = (0.03 * 255) * (0.03 * 255);
    std::vector<double> a2(ya.size()), b2(ya.size()), ab(ya.size());
    for (std::size_t i = 0; i < ya.size(); ++i) {
        a2[i] = ya[i] * ya[i];
        b2[i] = yb[i] * yb[i];
        ab[i] = ya[i] * yb[i];
    }
    int ow, oh;
    auto muA = filter_valid(ya, w, h, ow, oh);
    auto muB = filter_valid(yb, w, h, ow, oh);
    auto sA2 = filter_valid(a2, w, h, ow, oh);
    auto sB2 = filter_valid(b2, w, h, ow, oh);
    auto sAB = filter_valid(ab, w, h, ow, oh);
    double ssimSum = 0, csSum = 0;
    for (std::size_t i = 0; i < muA.size(); ++i) {
        double varA = sA2[i] - muA[i] * muA[i];
        double varB = sB2[i] - muB[i] * muB[i];
        double cov = sAB[i] - muA[i] * muB[i];
        double cs = (2 * cov + C2) / (varA + varB + C2);
        double l = (2 * muA[i] * muB[i] + C1) / (muA[i] * muA[i] + muB[i] * muB[i] + C1);
        ssimSum += l * cs;
        csSum += cs;
    }
    return {ssimSum / static_cast<double>(muA.size()), csSum / static_cast<double>(muA.size())};
}

// 2x2 mean downsample (drops a trailing odd row/column)
inline std::vector<double> downsample2(const std::vector<double>& img, int w, int h, int& ow,
                                       int& oh) {
    ow = w / 2;
    oh = h / 2;
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            std::size_t a = static_cast<std::size_t>(2 * y) * w + 2 * x;
            out[static_cast<std::size_t>(y) * ow + x] =
                (img[a] + img[a + 1] + img[a + w] + img[a + w + 1]) / 4.0;
        }
    return out;
}

}  // namespace metricdetail

// 10*log10(255^2/MSE) over all samples of all channels; identical images
// give the infinity sentinel.
inline double psnr(const RgbImage& a, const RgbImage& b) {
    metricdetail::check_dims(a, b, "psnr");
    double sse = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        sse += d * d;
    }
    if (sse == 0) return kPsnrInf;
    double mse = sse / static_cast<double>(a.pixels.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// PSNR restricted to pixels whose saliency exceeds the cutoff. Returns
// the absent marker when no pixel qualifies.
inline double psnr_s(const RgbImage& a, const RgbImage& b, const SaliencyMap& map,
                     double cutoff = 0.5) {
    metricdetail::check_dims(a, b, "psnr_s");
    if (map.width != a.width || map.height != a.height)
        throw std::invalid_argument("psnr_s: map dimensions do not match images");
    double sse = 0;
    long samples = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (map.at(x, y) <= cutoff) continue;
            for (int c = 0; c < 3; ++c) {
                double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
                sse += d * d;
            }
            samples += 3;
        }
    if (samples == 0) return kMetricAbsent;
    if (sse == 0) return kPsnrInf;
    return 10.0 * std::log10(255.0 * 255.0 / (sse / static_cast<double>(samples)));
}

inline double ssim(const RgbImage& a, const RgbImage& b) {
    metricdetail::check_dims(a, b, "ssim");
    if (a.width < 11 || a.height < 11)
        throw std::invalid_argument("ssim: images smaller than the 11x11 window");
    auto ya = metricdetail::luma(a);
    auto yb = metricdetail::luma(b);
    return metricdetail::ssim_parts(ya, yb, a.width, a.height).mean;
}

// Five dyadic scales with the published exponents; needs min dim >= 176.
inline double ms_ssim(const RgbImage& a, const RgbImage& b) {
    metricdetail::check_dims(a, b, "ms_ssim");
    static const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    if (std::min(a.width, a.height) < 176)
        throw std::invalid_argument("ms_ssim: min dimension must be >= 176 (5 scales x 11-tap window)");
    auto ya = metricdetail::luma(a);
    auto yb = metricdetail::luma(b);
    int w = a.width, h = a.height;
    double result = 1.0;
    for (int scale = 0; scale < 5; ++scale) {
        auto parts = metricdetail::ssim_parts(ya, yb, w, h);
        double term = scale == 4 ? parts.mean : parts.contrast;
        result *= std::pow(std::max(term, 0.0), weights[scale]);
        if (scale < 4) {
            int ow, oh;
            ya = metricdetail::downsample2(ya, w, h, ow, oh);
            yb = metricdetail::downsample2(yb, w, h, ow, oh);
            w = ow;
            h = oh;
        }
    }
    return result;
}

// CSV row: id,bytes,psnr,psnr_s,ssim,msssim with "inf"/"na" sentinels.
inline std::string metric_field(double v) {
    if (metric_absent(v)) return "na";
    if (std::isinf(v)) return "inf";
    std::ostringstream ss;
    ss.precision(6);
    ss << std::fixed << v;
    return ss.str();
}

inline std::string csv_header() { return "id,bytes,psnr,psnr_s,ssim,msssim"; }

inline std::string csv_row(const MetricsReport& r) {
    return r.id + "," + std::to_string(r.bytes) + "," + metric_field(r.psnr) + "," +
           metric_field(r.psnrS) + "," + metric_field(r.ssim) + "," + metric_field(r.msssim);
}

}  // namespace msroi
