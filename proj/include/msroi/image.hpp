#pragma once

// 8-bit RGB / grayscale images and binary netpbm (P5/P6) parsing.
// Only maxval-255 binary variants are supported; everything else is
// expected to be converted before it reaches this library.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msroi {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB triples

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("RgbImage: dimensions must be >= 1");
    }

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Per-pixel saliency in [0,1] at image resolution.
struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    SaliencyMap() = default;
    SaliencyMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("SaliencyMap: dimensions must be >= 1");
    }

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct PnmParseError : std::runtime_error {
    std::size_t offset;
    PnmParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::uint8_t* data, std::size_t n) {
    // write-then-rename so readers never see a partial file
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename to " + path + " failed");
}

// Reads one whitespace/comment-delimited token of a PNM header.
inline int pnm_header_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    while (pos < b.size()) {
        if (std::isspace(b[pos])) { ++pos; continue; }
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= b.size() || !std::isdigit(b[pos]))
        throw PnmParseError("expected integer in PNM header", pos);
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        if (v > 1 << 30) throw PnmParseError("PNM header value overflow", pos);
        ++pos;
    }
    return static_cast<int>(v);
}

struct PnmHeader {
    int width, height, maxval;
    std::size_t payload;  // offset of first sample byte
};

inline PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& b, char wantType) {
    if (b.size() < 2 || b[0] != 'P' || b[1] != wantType)
        throw PnmParseError(std::string("bad magic, expected P") + wantType, 0);
    std::size_t pos = 2;
    PnmHeader h{};
    h.width = pnm_header_int(b, pos);
    h.height = pnm_header_int(b, pos);
    h.maxval = pnm_header_int(b, pos);
    if (h.width < 1 || h.height < 1) throw PnmParseError("non-positive dimensions", pos);
    if (h.maxval != 255) throw PnmParseError("unsupported maxval (only 255)", pos);
    if (pos >= b.size() || !std::isspace(b[pos]))
        throw PnmParseError("missing whitespace after maxval", pos);
    h.payload = pos + 1;
    return h;
}

}  // namespace detail

inline RgbImage load_ppm(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    auto h = detail::parse_pnm_header(bytes, '6');
    std::size_t need = static_cast<std::size_t>(h.width) * h.height * 3;
    if (bytes.size() - h.payload < need)
        throw PnmParseError("truncated P6 payload", bytes.size());
    RgbImage img(h.width, h.height);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload),
              bytes.begin() + static_cast<std::ptrdiff_t>(h.payload + need), img.pixels.begin());
    return img;
}

inline void save_ppm(const std::string& path, const RgbImage& img) {
    std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    detail::write_file_bytes(path, out.data(), out.size());
}

// 8-bit grayscale; used both for raw grayscale data and saliency maps.
inline SaliencyMap load_pgm(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    auto h = detail::parse_pnm_header(bytes, '5');
    std::size_t need = static_cast<std::size_t>(h.width) * h.height;
    if (bytes.size() - h.payload < need)
        throw PnmParseError("truncated P5 payload", bytes.size());
    SaliencyMap map(h.width, h.height);
    for (std::size_t i = 0; i < need; ++i)
        map.values[i] = bytes[h.payload + i] / 255.0;
    return map;
}

// Saliency export: value*255, rounded half up.
inline void save_pgm(const std::string& path, const SaliencyMap& map) {
    std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + map.values.size());
    for (double v : map.values) {
        double s = std::floor(v * 255.0 + 0.5);
        if (s < 0) s = 0;
        if (s > 255) s = 255;
        out.push_back(static_cast<std::uint8_t>(s));
    }
    detail::write_file_bytes(path, out.data(), out.size());
}

}  // namespace msroi
