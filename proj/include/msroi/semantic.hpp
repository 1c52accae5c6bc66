#pragma once

// Saliency-guided encoding: discretize the saliency map into k levels,
// round-trip the image through JPEG once per level, assemble the output
// from 8x8 blocks of the matching level, then re-encode the mosaic once
// at the quality that lands closest to a byte-size target.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/image.hpp"
#include "msroi/jpeg.hpp"

namespace msroi {

struct QualityLadder {
    int qLow;
    int qHigh;
    int levels;

    QualityLadder(int ql, int qh, int k) : qLow(ql), qHigh(qh), levels(k) {
        if (ql < 1 || qh > 100 || ql > qh) throw std::invalid_argument("ladder: need 1 <= Ql <= Qh <= 100");
        if (k < 1) throw std::invalid_argument("ladder: need k >= 1");
    }
};

// Level n maps to Q_n = round(Ql + n*(Qh-Ql)/(k-1)); a one-level ladder
// is pinned to Ql. With (30,70,5) this yields 30,40,50,60,70.
inline int quality_for_level(const QualityLadder& ladder, int n) {
    if (n < 0 || n >= ladder.levels)
        throw std::invalid_argument("level " + std::to_string(n) + " out of range [0," +
                                    std::to_string(ladder.levels) + ")");
    if (ladder.levels == 1) return ladder.qLow;
    double q = ladder.qLow +
               static_cast<double>(n) * (ladder.qHigh - ladder.qLow) / (ladder.levels - 1);
    return static_cast<int>(std::lround(q));
}

struct LevelMap {
    int blocksW = 0;
    int blocksH = 0;
    std::vector<int> levels;  // one level in [0,k) per 8x8 block

    int at(int bx, int by) const { return levels[static_cast<std::size_t>(by) * blocksW + bx]; }
};

// Per-block saliency is the mean over the block's pixels; the block's
// level is the bin containing that mean: [0,1/k], then (1/k,2/k], ...
inline LevelMap discretize(const SaliencyMap& map, int k) {
    if (k < 1) throw std::invalid_argument("discretize: need k >= 1");
    LevelMap lm;
    lm.blocksW = (map.width + 7) / 8;
    lm.blocksH = (map.height + 7) / 8;
    lm.levels.resize(static_cast<std::size_t>(lm.blocksW) * lm.blocksH);
    for (int by = 0; by < lm.blocksH; ++by)
        for (int bx = 0; bx < lm.blocksW; ++bx) {
            double sum = 0.0;
            int count = 0;
            for (int y = by * 8; y < std::min(by * 8 + 8, map.height); ++y)
                for (int x = bx * 8; x < std::min(bx * 8 + 8, map.width); ++x) {
                    sum += map.at(x, y);
                    ++count;
                }
            double s = sum / count;
            int level = 0;
            while (level < k - 1 && s > static_cast<double>(level + 1) / k) ++level;
            lm.levels[static_cast<std::size_t>(by) * lm.blocksW + bx] = level;
        }
    return lm;
}

// One decoded round-trip per ladder level; element n is decode(encode(img, Q_n)).
inline std::vector<RgbImage> encode_ladder(const RgbImage& image, const QualityLadder& ladder) {
    std::vector<RgbImage> out;
    out.reserve(static_cast<std::size_t>(ladder.levels));
    for (int n = 0; n < ladder.levels; ++n)
        out.push_back(jpeg_decode(jpeg_encode(image, quality_for_level(ladder, n))));
    return out;
}

// Each output 8x8 block is copied verbatim from the ladder image selected
// by that block's level. Copy, never blend.
inline RgbImage assemble_mosaic(const std::vector<RgbImage>& ladderImages, const LevelMap& levels) {
    if (ladderImages.empty()) throw std::invalid_argument("assemble_mosaic: no ladder images");
    const int w = ladderImages[0].width, h = ladderImages[0].height;
    for (const auto& img : ladderImages)
        if (img.width != w || img.height != h)
            throw std::invalid_argument("assemble_mosaic: ladder image dimensions differ");
    if (levels.blocksW != (w + 7) / 8 || levels.blocksH != (h + 7) / 8)
        throw std::invalid_argument("assemble_mosaic: level grid does not match image");
    RgbImage out(w, h);
    for (int by = 0; by < levels.blocksH; ++by)
        for (int bx = 0; bx < levels.blocksW; ++bx) {
            int level = levels.at(bx, by);
            if (level < 0 || level >= static_cast<int>(ladderImages.size()))
                throw std::invalid_argument("assemble_mosaic: level " + std::to_string(level) +
                                            " has no ladder image");
            const RgbImage& src = ladderImages[static_cast<std::size_t>(level)];
            for (int y = by * 8; y < std::min(by * 8 + 8, h); ++y)
                for (int x = bx * 8; x < std::min(bx * 8 + 8, w); ++x)
                    for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(x, y, c);
        }
    return out;
}

struct FinalEncodeResult {
    JpegStream stream;
    int quality = 0;
    bool withinTolerance = false;
};

// Largest quality whose stream lands within |size-target|/target <= tol,
// found by binary search on the (monotone) size-vs-Q curve. If no Q is
// in tolerance, the closest-size Q is returned with the flag cleared.
inline FinalEncodeResult final_encode(const RgbImage& mosaic, std::size_t targetSize,
                                      double tolerance) {
    if (targetSize == 0) throw std::invalid_argument("final_encode: target size must be positive");
    const double hi = static_cast<double>(targetSize) * (1.0 + tolerance);
    const double lo = static_cast<double>(targetSize) * (1.0 - tolerance);
    // largest Q with size <= hi
    int lowQ = 1, highQ = 100, bestQ = -1;
    JpegStream bestStream;
    while (lowQ <= highQ) {
        int mid = (lowQ + highQ) / 2;
        JpegStream s = jpeg_encode(mosaic, mid);
        if (static_cast<double>(s.bytes.size()) <= hi) {
            bestQ = mid;
            bestStream = std::move(s);
            lowQ = mid + 1;
        } else {
            highQ = mid - 1;
        }
    }
    FinalEncodeResult r;
    if (bestQ >= 1 && static_cast<double>(bestStream.bytes.size()) >= lo) {
        r.stream = std::move(bestStream);
        r.quality = bestQ;
        r.withinTolerance = true;
        return r;
    }
    // nothing in tolerance: pick the closest size among the bracketing Qs
    auto distance = [&](const JpegStream& s) {
        return std::abs(static_cast<double>(s.bytes.size()) - static_cast<double>(targetSize));
    };
    if (bestQ < 1) {  // even Q=1 overshoots
        r.stream = jpeg_encode(mosaic, 1);
        r.quality = 1;
    } else {
        r.stream = std::move(bestStream);
        r.quality = bestQ;
        if (bestQ < 100) {
            JpegStream above = jpeg_encode(mosaic, bestQ + 1);
            if (distance(above) < distance(r.stream)) {
                r.stream = std::move(above);
                r.quality = bestQ + 1;
            }
        }
    }
    r.withinTolerance = distance(r.stream) <= static_cast<double>(targetSize) * tolerance;
    return r;
}

struct SemanticResult {
    JpegStream stream;
    RgbImage mosaic;  // pre-final-encode pixels
    LevelMap levels;
    int finalQuality = 0;
    bool withinTolerance = false;
};

inline SemanticResult semantic_compress(const RgbImage& image, const SaliencyMap& map,
                                        const QualityLadder& ladder, std::size_t sizeTarget,
                                        double tolerance = 0.01) {
    if (map.width != image.width || map.height != image.height)
        throw std::invalid_argument("semantic_compress: map dims " + std::to_string(map.width) + "x" +
                                    std::to_string(map.height) + " do not match image " +
                                    std::to_string(image.width) + "x" + std::to_string(image.height));
    SemanticResult r;
    r.levels = discretize(map, ladder.levels);
    std::vector<RgbImage> ladderImages = encode_ladder(image, ladder);
    r.mosaic = assemble_mosaic(ladderImages, r.levels);
    FinalEncodeResult fin = final_encode(r.mosaic, sizeTarget, tolerance);
    r.stream = std::move(fin.stream);
    r.finalQuality = fin.quality;
    r.withinTolerance = fin.withinTolerance;
    return r;
}

}  // namespace msroi
