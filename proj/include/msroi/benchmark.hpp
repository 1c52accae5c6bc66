#pragma once

// Experiment harness: per-image comparison of saliency-guided output
// against a size-matched standard JPEG, corpus benchmarks with CSV
// reports, and a resolution sweep of a single image.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/config.hpp"
#include "msroi/image.hpp"
#include "msroi/jpeg.hpp"
#include "msroi/metrics.hpp"
#include "msroi/semantic.hpp"

namespace msroi {

struct BenchmarkItem {
    std::string id;
    RgbImage image;
    SaliencyMap map;
};

struct PairResult {
    MetricsReport baseline;  // standard JPEG at the baseline quality
    MetricsReport semantic;  // saliency-guided, size-matched
    int finalQuality = 0;
    bool withinTolerance = false;
    JpegStream baselineStream;
    JpegStream semanticStream;
};

// Both arms run through the same codec so the comparison isolates the
// block-level quality allocation.
inline PairResult evaluate_pair(const RgbImage& image, const SaliencyMap& map,
                                const RunConfig& cfg, const std::string& id) {
    PairResult r;
    r.baselineStream = jpeg_encode(image, cfg.baselineQ);
    RgbImage baseDecoded = jpeg_decode(r.baselineStream);
    if (baseDecoded.width != image.width || baseDecoded.height != image.height)
        throw std::runtime_error("decoder returned unexpected dimensions for " + id);

    QualityLadder ladder(cfg.qLow, cfg.qHigh, cfg.levels);
    SemanticResult sem =
        semantic_compress(image, map, ladder, r.baselineStream.bytes.size(), cfg.tolerance);
    r.semanticStream = std::move(sem.stream);
    r.finalQuality = sem.finalQuality;
    r.withinTolerance = sem.withinTolerance;
    RgbImage semDecoded = jpeg_decode(r.semanticStream);
    if (semDecoded.width != image.width || semDecoded.height != image.height)
        throw std::runtime_error("decoder returned unexpected dimensions for " + id);

    bool msOk = std::min(image.width, image.height) >= 176;
    auto fill = [&](MetricsReport& m, const std::string& rid, const JpegStream& s,
                    const RgbImage& decoded) {
        m.id = rid;
        m.bytes = s.bytes.size();
        m.psnr = psnr(image, decoded);
        m.psnrS = psnr_s(image, decoded, map, cfg.psnrSCutoff);
        m.ssim = ssim(image, decoded);
        m.msssim = msOk ? ms_ssim(image, decoded) : kMetricAbsent;
    };
    fill(r.baseline, id + ".std", r.baselineStream, baseDecoded);
    fill(r.semantic, id + ".ours", r.semanticStream, semDecoded);
    return r;
}

struct BenchmarkSummary {
    int images = 0;
    int failures = 0;
    int flagged = 0;  // size-match misses
    double meanPsnrStd = 0, meanPsnrOurs = 0;
    double meanPsnrSStd = 0, meanPsnrSOurs = 0;
    double meanSsimStd = 0, meanSsimOurs = 0;
    double meanMsssimStd = 0, meanMsssimOurs = 0;
};

struct BenchmarkResult {
    std::string csv;
    BenchmarkSummary summary;
    std::vector<PairResult> pairs;  // successes, in input order
};

// Per-image failures are logged into the CSV as comment lines and the
// run continues; aggregates cover successes only.
inline BenchmarkResult run_benchmark(const std::vector<BenchmarkItem>& items, const RunConfig& cfg,
                                     bool keepStreams = false) {
    BenchmarkResult result;
    std::ostringstream csv;
    csv << csv_header() << "\n";
    // infinite PSNR entries are excluded from means (identical images)
    auto acc = [](double& dst, double v) {
        if (std::isfinite(v)) dst += v;
    };
    int psnrSCount = 0;
    for (const auto& item : items) {
        try {
            PairResult pair = evaluate_pair(item.image, item.map, cfg, item.id);
            csv << csv_row(pair.baseline) << "\n" << csv_row(pair.semantic) << "\n";
            auto& s = result.summary;
            ++s.images;
            if (!pair.withinTolerance) ++s.flagged;
            acc(s.meanPsnrStd, pair.baseline.psnr);
            acc(s.meanPsnrOurs, pair.semantic.psnr);
            if (!metric_absent(pair.baseline.psnrS) && !metric_absent(pair.semantic.psnrS)) {
                acc(s.meanPsnrSStd, pair.baseline.psnrS);
                acc(s.meanPsnrSOurs, pair.semantic.psnrS);
                ++psnrSCount;
            }
            acc(s.meanSsimStd, pair.baseline.ssim);
            acc(s.meanSsimOurs, pair.semantic.ssim);
            if (!metric_absent(pair.baseline.msssim)) {
                acc(s.meanMsssimStd, pair.baseline.msssim);
                acc(s.meanMsssimOurs, pair.semantic.msssim);
            }
            if (!keepStreams) {
                pair.baselineStream.bytes.clear();
                pair.semanticStream.bytes.clear();
            }
            result.pairs.push_back(std::move(pair));
        } catch (const std::exception& e) {
            ++result.summary.failures;
            csv << "# " << item.id << " failed: " << e.what() << "\n";
        }
    }
    auto& s = result.summary;
    if (s.images > 0) {
        s.meanPsnrStd /= s.images;
        s.meanPsnrOurs /= s.images;
        s.meanSsimStd /= s.images;
        s.meanSsimOurs /= s.images;
        s.meanMsssimStd /= s.images;
        s.meanMsssimOurs /= s.images;
    }
    if (psnrSCount > 0) {
        s.meanPsnrSStd /= psnrSCount;
        s.meanPsnrSOurs /= psnrSCount;
    }
    result.csv = csv.str();
    return result;
}

inline std::string summary_text(const BenchmarkSummary& s) {
    std::ostringstream ss;
    ss.precision(4);
    ss << std::fixed;
    ss << "images=" << s.images << " failures=" << s.failures << " flagged=" << s.flagged << "\n"
       << "psnr    std=" << s.meanPsnrStd << " ours=" << s.meanPsnrOurs
       << " delta=" << s.meanPsnrOurs - s.meanPsnrStd << "\n"
       << "psnr_s  std=" << s.meanPsnrSStd << " ours=" << s.meanPsnrSOurs
       << " delta=" << s.meanPsnrSOurs - s.meanPsnrSStd << "\n"
       << "ssim    std=" << s.meanSsimStd << " ours=" << s.meanSsimOurs << "\n"
       << "ms_ssim std=" << s.meanMsssimStd << " ours=" << s.meanMsssimOurs << "\n";
    return ss.str();
}

// bilinear resize, used by the size sweep
inline RgbImage resize_image(const RgbImage& src, int w, int h) {
    if (w < 1 || h < 1) throw std::invalid_argument("resize_image: bad target size");
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        double sy = h == 1 ? 0.0 : static_cast<double>(y) * (src.height - 1) / (h - 1);
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double fy = sy - y0;
        for (int x = 0; x < w; ++x) {
            double sx = w == 1 ? 0.0 : static_cast<double>(x) * (src.width - 1) / (w - 1);
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                double v = (1 - fy) * ((1 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c)) +
                           fy * ((1 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

inline SaliencyMap resize_map(const SaliencyMap& src, int w, int h) {
    if (w < 1 || h < 1) throw std::invalid_argument("resize_map: bad target size");
    SaliencyMap out(w, h);
    for (int y = 0; y < h; ++y) {
        double sy = h == 1 ? 0.0 : static_cast<double>(y) * (src.height - 1) / (h - 1);
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double fy = sy - y0;
        for (int x = 0; x < w; ++x) {
            double sx = w == 1 ? 0.0 : static_cast<double>(x) * (src.width - 1) / (w - 1);
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double fx = sx - x0;
            out.at(x, y) = (1 - fy) * ((1 - fx) * src.at(x0, y0) + fx * src.at(x1, y0)) +
                           fy * ((1 - fx) * src.at(x0, y1) + fx * src.at(x1, y1));
        }
    }
    return out;
}

// Rescales one image (and its map) across target widths and reports the
// metric pair at each size. Aspect ratio is preserved.
inline BenchmarkResult run_sweep(const RgbImage& image, const SaliencyMap& map,
                                 const std::vector<int>& widths, const RunConfig& cfg) {
    std::vector<BenchmarkItem> items;
    for (int w : widths) {
        int h = std::max(1, static_cast<int>(std::lround(
                                static_cast<double>(image.height) * w / image.width)));
        BenchmarkItem item;
        item.id = "w" + std::to_string(w);
        item.image = resize_image(image, w, h);
        item.map = resize_map(map, w, h);
        items.push_back(std::move(item));
    }
    return run_benchmark(items, cfg);
}

}  // namespace msroi
