#pragma once

// Deterministic synthetic shape dataset: textured backgrounds with 1..3
// colored, textured shapes per image, plus exact ground-truth masks and
// per-object category labels. Categories are balanced by cycling a
// global counter through the shape list.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/image.hpp"

namespace msroi {

enum class Shape { Disk = 0, Square, Triangle, Ring, Cross, Bar };
inline constexpr int kShapeCount = 6;

struct SyntheticSpec {
    int width = 64;
    int height = 64;
    int count = 100;
    int categories = 6;       // uses the first N shapes
    int minObjects = 1;
    int maxObjects = 3;
    double backgroundNoise = 0.12;  // background texture amplitude, fraction of full scale
    double objectTexture = 0.20;    // in-object texture amplitude
    double minRadiusFrac = 0.14;    // object radius as fraction of min dimension
    double maxRadiusFrac = 0.22;
    std::uint64_t seed = 1;
};

struct SyntheticImage {
    RgbImage image;
    SaliencyMap combinedMask;               // 1 inside any object
    std::vector<SaliencyMap> objectMasks;   // one exact mask per object
    std::vector<int> labels;                // category per object
};

namespace synthdetail {

inline bool inside_shape(Shape s, double dx, double dy, double r) {
    switch (s) {
        case Shape::Disk:
            return dx * dx + dy * dy <= r * r;
        case Shape::Square:
            return std::abs(dx) <= r * 0.88 && std::abs(dy) <= r * 0.88;
        case Shape::Triangle:
            return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.55;
        case Shape::Ring: {
            double d2 = dx * dx + dy * dy;
            return d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r);
        }
        case Shape::Cross:
            return (std::abs(dx) <= r / 3 && std::abs(dy) <= r) ||
                   (std::abs(dy) <= r / 3 && std::abs(dx) <= r);
        case Shape::Bar:
            return std::abs(dx) <= r && std::abs(dy) <= r / 3;
    }
    return false;
}

struct ObjectPlacement {
    double cx, cy, r;
    Shape shape;
};

// outermost point of each shape, as a multiple of its nominal radius
inline double bounding_factor(Shape s) {
    switch (s) {
        case Shape::Disk:
        case Shape::Ring:
            return 1.0;
        case Shape::Square:
            return 0.88 * std::sqrt(2.0);
        case Shape::Triangle:
            return std::sqrt(1.1 * 1.1 + 1.0);  // corner (1.1r, r)
        case Shape::Cross:
        case Shape::Bar:
            return std::sqrt(1.0 + 1.0 / 9.0);
    }
    return 1.5;
}

// coarse value noise: random lattice, bilinear interpolation
struct ValueNoise {
    int gw, gh, cell;
    std::vector<double> grid;

    ValueNoise(int w, int h, int cellSize, std::mt19937_64& rng) : cell(cellSize) {
        gw = w / cell + 2;
        gh = h / cell + 2;
        grid.resize(static_cast<std::size_t>(gw) * gh);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (double& v : grid) v = dist(rng);
    }

    double at(int x, int y) const {
        double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
        int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        double tx = fx - x0, ty = fy - y0;
        auto g = [&](int gx, int gy) { return grid[static_cast<std::size_t>(gy) * gw + gx]; };
        return (1 - ty) * ((1 - tx) * g(x0, y0) + tx * g(x0 + 1, y0)) +
               ty * ((1 - tx) * g(x0, y0 + 1) + tx * g(x0 + 1, y0 + 1));
    }
};

inline constexpr std::uint8_t kCategoryColor[kShapeCount][3] = {
    {200, 60, 50},   // disk: red
    {60, 170, 70},   // square: green
    {70, 90, 200},   // triangle: blue
    {210, 190, 60},  // ring: yellow
    {190, 70, 190},  // cross: magenta
    {60, 185, 185},  // bar: cyan
};

}  // namespace synthdetail

inline std::vector<SyntheticImage> make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.categories < 1 || spec.categories > kShapeCount)
        throw std::invalid_argument("synthetic: categories must be in [1," +
                                    std::to_string(kShapeCount) + "]");
    if (spec.minObjects < 1 || spec.maxObjects < spec.minObjects)
        throw std::invalid_argument("synthetic: bad object count range");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SyntheticImage> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    int categoryCounter = 0;

    for (int n = 0; n < spec.count; ++n) {
        SyntheticImage sample;
        sample.image = RgbImage(spec.width, spec.height);
        sample.combinedMask = SaliencyMap(spec.width, spec.height, 0.0);

        synthdetail::ValueNoise coarse(spec.width, spec.height, 16, rng);
        synthdetail::ValueNoise fine(spec.width, spec.height, 3, rng);
        // slow amplitude field keeps texture strength varying across the
        // canvas, so detail fades in and out instead of being uniform
        synthdetail::ValueNoise amp(spec.width, spec.height, 24, rng);
        double base = 90 + 70 * unit(rng);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                double gain = 0.4 + 1.2 * (amp.at(x, y) + 1.0) * 0.5;
                double v = base + spec.backgroundNoise * 255.0 *
                                      (0.7 * coarse.at(x, y) + 0.3 * gain * fine.at(x, y));
                for (int c = 0; c < 3; ++c) {
                    double jit = v + 6.0 * fine.at(x, y) * (c - 1);
                    sample.image.at(x, y, c) =
                        static_cast<std::uint8_t>(std::clamp(jit, 0.0, 255.0));
                }
            }

        int objects = spec.minObjects +
                      static_cast<int>(unit(rng) * (spec.maxObjects - spec.minObjects + 1));
        objects = std::min(objects, spec.maxObjects);
        std::vector<synthdetail::ObjectPlacement> placed;
        double minDim = std::min(spec.width, spec.height);
        for (int o = 0; o < objects; ++o) {
            int category = categoryCounter++ % spec.categories;
            double r = minDim * (spec.minRadiusFrac +
                                 unit(rng) * (spec.maxRadiusFrac - spec.minRadiusFrac));
            // find a spot that keeps objects disjoint (bounding circles)
            double bound = r * synthdetail::bounding_factor(static_cast<Shape>(category));
            double cx = 0, cy = 0;
            bool ok = false;
            for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
                cx = r + unit(rng) * (spec.width - 2 * r);
                cy = r + unit(rng) * (spec.height - 2 * r);
                ok = true;
                for (const auto& p : placed) {
                    double dx = cx - p.cx, dy = cy - p.cy;
                    double pBound = p.r * synthdetail::bounding_factor(p.shape);
                    if (std::sqrt(dx * dx + dy * dy) < (bound + pBound) * 1.05) ok = false;
                }
                if (attempt > 0 && attempt % 50 == 0) {
                    r *= 0.85;
                    bound *= 0.85;
                }
            }
            if (!ok) break;  // canvas is full; keep what fits
            placed.push_back({cx, cy, r, static_cast<Shape>(category)});
            sample.labels.push_back(category);

            synthdetail::ValueNoise tex(spec.width, spec.height, 2, rng);
            synthdetail::ValueNoise texAmp(spec.width, spec.height, 12, rng);
            SaliencyMap mask(spec.width, spec.height, 0.0);
            const auto* color = synthdetail::kCategoryColor[category];
            double shade = 0.8 + 0.4 * unit(rng);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    if (!synthdetail::inside_shape(static_cast<Shape>(category), x - cx, y - cy, r))
                        continue;
                    mask.at(x, y) = 1.0;
                    sample.combinedMask.at(x, y) = 1.0;
                    double tg = 0.4 + 1.2 * (texAmp.at(x, y) + 1.0) * 0.5;
                    double t = spec.objectTexture * 255.0 * tg * tex.at(x, y);
                    for (int c = 0; c < 3; ++c)
                        sample.image.at(x, y, c) = static_cast<std::uint8_t>(
                            std::clamp(color[c] * shade + t, 0.0, 255.0));
                }
            sample.objectMasks.push_back(std::move(mask));
        }
        out.push_back(std::move(sample));
    }
    return out;
}

// Writes images (PPM), combined masks (PGM) and a labels file
// ("imageIndex label label ..." per line) under dir with a name prefix.
inline void save_synthetic_dataset(const std::vector<SyntheticImage>& data, const std::string& dir,
                                   const std::string& prefix = "img") {
    std::string labelsPath = dir + "/" + prefix + "_labels.txt";
    std::string tmp = labelsPath + ".tmp";
    {
        std::ofstream labels(tmp, std::ios::trunc);
        if (!labels) throw std::runtime_error("cannot open " + tmp);
        for (std::size_t i = 0; i < data.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%04zu", prefix.c_str(), i);
            save_ppm(dir + "/" + name + ".ppm", data[i].image);
            save_pgm(dir + "/" + name + "_mask.pgm", data[i].combinedMask);
            labels << i;
            for (int l : data[i].labels) labels << " " << l;
            labels << "\n";
        }
    }
    if (std::rename(tmp.c_str(), labelsPath.c_str()) != 0)
        throw std::runtime_error("rename to " + labelsPath + " failed");
}

}  // namespace msroi
