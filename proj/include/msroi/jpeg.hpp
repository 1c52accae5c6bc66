#pragma once

// Baseline sequential-DCT JPEG (JFIF) encoder and decoder.
//
// Encoder: BT.601 full-range YCbCr, 4:2:0 subsampling, default
// quantization/Huffman tables, no optimization pass. Decoder: baseline
// streams with arbitrary Huffman/quant tables, 4:4:4 / 4:2:2 / 4:2:0
// sampling, restart markers tolerated. The decode path mirrors the
// classic libjpeg integer pipeline (islow IDCT, triangular chroma
// upsampling, fixed-point color conversion) so outputs line up with
// off-the-shelf decoders to within a count or two.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/image.hpp"

namespace msroi {

struct JpegStream {
    std::vector<std::uint8_t> bytes;
};

struct JpegParseError : std::runtime_error {
    std::size_t offset;
    JpegParseError(const std::string& msg, std::size_t off)
        : std::runtime_error("jpeg: " + msg + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

struct QuantTables {
    std::array<int, 64> luma;    // natural (row-major) order
    std::array<int, 64> chroma;
};

namespace jpegdetail {

// ITU-T T.81 Annex K.1 base tables, natural order.
inline constexpr std::array<int, 64> kBaseLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kBaseChroma = {
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99};

// zigzag[i] = natural-order index of the i-th coefficient in scan order
inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10,
    17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63};

// Annex K.3 default Huffman specs: (BITS[1..16], HUFFVAL)
struct HuffSpec {
    std::array<int, 16> counts;
    std::vector<int> symbols;
};

inline const HuffSpec& dc_luma_spec() {
    static const HuffSpec s{{0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
                            {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
    return s;
}

inline const HuffSpec& dc_chroma_spec() {
    static const HuffSpec s{{0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0},
                            {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
    return s;
}

inline const HuffSpec& ac_luma_spec() {
    static const HuffSpec s{
        {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
        {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51,
         0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1,
         0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18,
         0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
         0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57,
         0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
         0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92,
         0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
         0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
         0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8,
         0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2,
         0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
    return s;
}

inline const HuffSpec& ac_chroma_spec() {
    static const HuffSpec s{
        {0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77},
        {0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07,
         0x61, 0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09,
         0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25,
         0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38,
         0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56,
         0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74,
         0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
         0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5,
         0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba,
         0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6,
         0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2,
         0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
    return s;
}

// canonical code assignment per T.81 Annex C
struct HuffEncoder {
    std::array<std::uint16_t, 256> code{};
    std::array<std::uint8_t, 256> size{};

    explicit HuffEncoder(const HuffSpec& spec) {
        int k = 0;
        std::uint16_t c = 0;
        for (int len = 1; len <= 16; ++len) {
            for (int i = 0; i < spec.counts[len - 1]; ++i) {
                int sym = spec.symbols[k++];
                code[sym] = c++;
                size[sym] = static_cast<std::uint8_t>(len);
            }
            c <<= 1;
        }
    }
};

struct BitWriter {
    std::vector<std::uint8_t>& out;
    std::uint32_t acc = 0;
    int bits = 0;

    explicit BitWriter(std::vector<std::uint8_t>& o) : out(o) {}

    void put(std::uint32_t value, int n) {
        acc = (acc << n) | (value & ((1u << n) - 1));
        bits += n;
        while (bits >= 8) {
            std::uint8_t byte = static_cast<std::uint8_t>((acc >> (bits - 8)) & 0xff);
            out.push_back(byte);
            if (byte == 0xff) out.push_back(0x00);  // byte stuffing
            bits -= 8;
        }
    }

    // pad the final partial byte with 1-bits
    void flush() {
        if (bits > 0) put((1u << (8 - bits)) - 1, 8 - bits);
    }
};

// magnitude category + offset coding for DC/AC values
inline int bit_size(int v) {
    int a = v < 0 ? -v : v;
    int n = 0;
    while (a) {
        ++n;
        a >>= 1;
    }
    return n;
}

inline std::uint32_t value_bits(int v, int size) {
    return v >= 0 ? static_cast<std::uint32_t>(v)
                  : static_cast<std::uint32_t>(v + (1 << size) - 1);
}

// Orthonormal 2-d DCT-II / inverse; identical scaling to the T.81 FDCT.
inline void fdct8x8(const double in[64], double out[64]) {
    static const auto cosTab = [] {
        std::array<double, 64> t{};
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x)
                t[u * 8 + x] = std::cos((2 * x + 1) * u * M_PI / 16.0);
        return t;
    }();
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double s = 0;
            for (int y = 0; y < 8; ++y) s += in[x * 8 + y] * cosTab[u * 8 + y];
            tmp[x * 8 + u] = s;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int x = 0; x < 8; ++x) s += tmp[x * 8 + v] * cosTab[u * 8 + x];
            double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            double cv = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            out[u * 8 + v] = 0.25 * cu * cv * s;
        }
}

inline void idct8x8(const double in[64], double out[64]) {
    static const auto cosTab = [] {
        std::array<double, 64> t{};
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x)
                t[u * 8 + x] = std::cos((2 * x + 1) * u * M_PI / 16.0);
        return t;
    }();
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double s = 0;
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
                    double cv = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
                    s += cu * cv * in[u * 8 + v] * cosTab[u * 8 + x] * cosTab[v * 8 + y];
                }
            out[x * 8 + y] = 0.25 * s;
        }
}

}  // namespace jpegdetail

inline void fdct8x8(const double in[64], double out[64]) { jpegdetail::fdct8x8(in, out); }
inline void idct8x8(const double in[64], double out[64]) { jpegdetail::idct8x8(in, out); }

// IJG-style quality scaling of the Annex K base tables.
inline QuantTables quant_tables_for_quality(int q) {
    if (q < 1 || q > 100) throw std::invalid_argument("quality must be in [1,100]");
    int scale = q < 50 ? 5000 / q : 200 - 2 * q;
    QuantTables t{};
    for (int i = 0; i < 64; ++i) {
        auto scaled = [&](int base) {
            long v = (static_cast<long>(base) * scale + 50) / 100;
            return static_cast<int>(std::clamp(v, 1L, 255L));
        };
        t.luma[i] = scaled(jpegdetail::kBaseLuma[i]);
        t.chroma[i] = scaled(jpegdetail::kBaseChroma[i]);
    }
    return t;
}

// ---------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------

namespace jpegdetail {

inline void put_marker(std::vector<std::uint8_t>& out, std::uint8_t m) {
    out.push_back(0xff);
    out.push_back(m);
}

inline void put_u16(std::vector<std::uint8_t>& out, int v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put_dqt(std::vector<std::uint8_t>& out, int id, const std::array<int, 64>& table) {
    put_marker(out, 0xdb);
    put_u16(out, 2 + 1 + 64);
    out.push_back(static_cast<std::uint8_t>(id));  // 8-bit precision
    for (int i = 0; i < 64; ++i) out.push_back(static_cast<std::uint8_t>(table[kZigzag[i]]));
}

inline void put_dht(std::vector<std::uint8_t>& out, int tableClass, int id, const HuffSpec& spec) {
    put_marker(out, 0xc4);
    put_u16(out, 2 + 1 + 16 + static_cast<int>(spec.symbols.size()));
    out.push_back(static_cast<std::uint8_t>((tableClass << 4) | id));
    for (int i = 0; i < 16; ++i) out.push_back(static_cast<std::uint8_t>(spec.counts[i]));
    for (int s : spec.symbols) out.push_back(static_cast<std::uint8_t>(s));
}

// Encode one quantized 8x8 block (zigzag order). Returns new DC predictor.
inline int encode_block(BitWriter& bw, const int coef[64], int dcPred, const HuffEncoder& dc,
                        const HuffEncoder& ac) {
    int diff = coef[0] - dcPred;
    int s = bit_size(diff);
    bw.put(dc.code[s], dc.size[s]);
    if (s) bw.put(value_bits(diff, s), s);
    int run = 0;
    for (int i = 1; i < 64; ++i) {
        if (coef[i] == 0) {
            ++run;
            continue;
        }
        while (run > 15) {
            bw.put(ac.code[0xf0], ac.size[0xf0]);  // ZRL
            run -= 16;
        }
        int sz = bit_size(coef[i]);
        int sym = (run << 4) | sz;
        bw.put(ac.code[sym], ac.size[sym]);
        bw.put(value_bits(coef[i], sz), sz);
        run = 0;
    }
    if (run > 0) bw.put(ac.code[0x00], ac.size[0x00]);  // EOB
    return coef[0];
}

struct Planes {
    int lumaW, lumaH;     // padded to multiples of 16
    int chromaW, chromaH;  // padded dims / 2
    std::vector<double> y, cb, cr;
};

// BT.601 full-range RGB -> YCbCr, replicate-pad to 16, 4:2:0 downsample.
inline Planes make_planes(const RgbImage& img) {
    Planes p{};
    p.lumaW = (img.width + 15) / 16 * 16;
    p.lumaH = (img.height + 15) / 16 * 16;
    p.chromaW = p.lumaW / 2;
    p.chromaH = p.lumaH / 2;
    std::vector<double> fullCb(static_cast<std::size_t>(p.lumaW) * p.lumaH);
    std::vector<double> fullCr(static_cast<std::size_t>(p.lumaW) * p.lumaH);
    p.y.resize(static_cast<std::size_t>(p.lumaW) * p.lumaH);
    for (int yy = 0; yy < p.lumaH; ++yy) {
        int sy = std::min(yy, img.height - 1);
        for (int xx = 0; xx < p.lumaW; ++xx) {
            int sx = std::min(xx, img.width - 1);
            double r = img.at(sx, sy, 0), g = img.at(sx, sy, 1), b = img.at(sx, sy, 2);
            std::size_t i = static_cast<std::size_t>(yy) * p.lumaW + xx;
            p.y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
            fullCb[i] = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0;
            fullCr[i] = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0;
        }
    }
    p.cb.resize(static_cast<std::size_t>(p.chromaW) * p.chromaH);
    p.cr.resize(p.cb.size());
    for (int yy = 0; yy < p.chromaH; ++yy)
        for (int xx = 0; xx < p.chromaW; ++xx) {
            std::size_t a = static_cast<std::size_t>(2 * yy) * p.lumaW + 2 * xx;
            std::size_t b = a + p.lumaW;
            p.cb[static_cast<std::size_t>(yy) * p.chromaW + xx] =
                (fullCb[a] + fullCb[a + 1] + fullCb[b] + fullCb[b + 1]) / 4.0;
            p.cr[static_cast<std::size_t>(yy) * p.chromaW + xx] =
                (fullCr[a] + fullCr[a + 1] + fullCr[b] + fullCr[b + 1]) / 4.0;
        }
    return p;
}

// level shift, FDCT, quantize one block at (bx,by) of a plane
inline void quantize_block(const std::vector<double>& plane, int planeW, int bx, int by,
                           const std::array<int, 64>& qtab, int coefZig[64]) {
    double block[64], coef[64];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            block[i * 8 + j] = plane[static_cast<std::size_t>(by * 8 + i) * planeW + bx * 8 + j] - 128.0;
    fdct8x8(block, coef);
    for (int i = 0; i < 64; ++i) {
        int nat = kZigzag[i];
        double q = coef[nat] / qtab[nat];
        coefZig[i] = static_cast<int>(std::lround(q));
    }
}

}  // namespace jpegdetail

inline JpegStream jpeg_encode(const RgbImage& img, int quality) {
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("jpeg_encode: empty image");
    using namespace jpegdetail;
    QuantTables qt = quant_tables_for_quality(quality);
    Planes planes = make_planes(img);

    JpegStream stream;
    auto& out = stream.bytes;
    put_marker(out, 0xd8);  // SOI
    // APP0 / JFIF 1.1, no thumbnail
    put_marker(out, 0xe0);
    put_u16(out, 16);
    const char jfif[5] = {'J', 'F', 'I', 'F', 0};
    out.insert(out.end(), jfif, jfif + 5);
    out.push_back(1);
    out.push_back(1);
    out.push_back(0);  // aspect-ratio units
    put_u16(out, 1);
    put_u16(out, 1);
    out.push_back(0);
    out.push_back(0);
    put_dqt(out, 0, qt.luma);
    put_dqt(out, 1, qt.chroma);
    // SOF0, three components, 2x2 / 1x1 / 1x1 sampling
    put_marker(out, 0xc0);
    put_u16(out, 8 + 3 * 3);
    out.push_back(8);
    put_u16(out, img.height);
    put_u16(out, img.width);
    out.push_back(3);
    const int sampling[3] = {0x22, 0x11, 0x11};
    const int qsel[3] = {0, 1, 1};
    for (int c = 0; c < 3; ++c) {
        out.push_back(static_cast<std::uint8_t>(c + 1));
        out.push_back(static_cast<std::uint8_t>(sampling[c]));
        out.push_back(static_cast<std::uint8_t>(qsel[c]));
    }
    put_dht(out, 0, 0, dc_luma_spec());
    put_dht(out, 1, 0, ac_luma_spec());
    put_dht(out, 0, 1, dc_chroma_spec());
    put_dht(out, 1, 1, ac_chroma_spec());
    // SOS
    put_marker(out, 0xda);
    put_u16(out, 6 + 2 * 3);
    out.push_back(3);
    for (int c = 0; c < 3; ++c) {
        out.push_back(static_cast<std::uint8_t>(c + 1));
        out.push_back(c == 0 ? 0x00 : 0x11);
    }
    out.push_back(0);
    out.push_back(63);
    out.push_back(0);

    static const HuffEncoder dcL(dc_luma_spec()), acL(ac_luma_spec());
    static const HuffEncoder dcC(dc_chroma_spec()), acC(ac_chroma_spec());
    BitWriter bw(out);
    int predY = 0, predCb = 0, predCr = 0;
    int mcuCols = planes.lumaW / 16, mcuRows = planes.lumaH / 16;
    int coef[64];
    for (int my = 0; my < mcuRows; ++my)
        for (int mx = 0; mx < mcuCols; ++mx) {
            for (int sub = 0; sub < 4; ++sub) {
                int bx = mx * 2 + (sub & 1), by = my * 2 + (sub >> 1);
                quantize_block(planes.y, planes.lumaW, bx, by, qt.luma, coef);
                predY = encode_block(bw, coef, predY, dcL, acL);
            }
            quantize_block(planes.cb, planes.chromaW, mx, my, qt.chroma, coef);
            predCb = encode_block(bw, coef, predCb, dcC, acC);
            quantize_block(planes.cr, planes.chromaW, mx, my, qt.chroma, coef);
            predCr = encode_block(bw, coef, predCr, dcC, acC);
        }
    bw.flush();
    put_marker(out, 0xd9);  // EOI
    return stream;
}

// ---------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------

namespace jpegdetail {

struct HuffDecoder {
    // maxcode/valptr decoding per T.81 F.2.2.3
    std::array<int, 17> mincode{}, maxcode{}, valptr{};
    std::vector<int> symbols;
    bool valid = false;

    void build(const std::array<int, 16>& counts, std::vector<int> syms) {
        symbols = std::move(syms);
        int code = 0, k = 0;
        for (int len = 1; len <= 16; ++len) {
            valptr[len] = k;
            mincode[len] = code;
            code += counts[len - 1];
            k += counts[len - 1];
            maxcode[len] = counts[len - 1] ? code - 1 : -1;
            code <<= 1;
        }
        valid = true;
    }
};

struct BitReader {
    const std::vector<std::uint8_t>& b;
    std::size_t pos;
    std::uint32_t acc = 0;
    int bits = 0;

    BitReader(const std::vector<std::uint8_t>& bytes, std::size_t start) : b(bytes), pos(start) {}

    // Returns false at a marker (FF xx with xx != 00); the marker stays unread.
    bool fill() {
        while (bits <= 24) {
            if (pos >= b.size()) return bits > 0;
            std::uint8_t byte = b[pos];
            if (byte == 0xff) {
                if (pos + 1 >= b.size()) return bits > 0;
                if (b[pos + 1] != 0x00) return bits > 0;  // real marker
                pos += 2;
            } else {
                ++pos;
            }
            acc = (acc << 8) | byte;
            bits += 8;
        }
        return true;
    }

    int get_bit() {
        if (bits == 0 && !fill())
            throw JpegParseError("Huffman bit overrun", pos);
        if (bits == 0) throw JpegParseError("Huffman bit overrun", pos);
        --bits;
        return (acc >> bits) & 1;
    }

    int get_bits(int n) {
        int v = 0;
        for (int i = 0; i < n; ++i) v = (v << 1) | get_bit();
        return v;
    }

    void reset_at(std::size_t newPos) {
        pos = newPos;
        acc = 0;
        bits = 0;
    }

    void byte_align() { bits -= bits % 8; }
};

inline int huff_decode(BitReader& br, const HuffDecoder& h) {
    int code = br.get_bit();
    for (int len = 1; len <= 16; ++len) {
        if (h.maxcode[len] >= 0 && code <= h.maxcode[len])
            return h.symbols[h.valptr[len] + code - h.mincode[len]];
        code = (code << 1) | br.get_bit();
    }
    throw JpegParseError("invalid Huffman code", br.pos);
}

inline int extend(int v, int size) {
    return v < (1 << (size - 1)) ? v - (1 << size) + 1 : v;
}

// --- libjpeg jidctint-compatible integer IDCT (islow) -----------------
// Dequantization is folded in; output is 8-bit samples (level shifted).

inline constexpr int IDCT_CONST_BITS = 13;
inline constexpr int IDCT_PASS1_BITS = 2;
inline constexpr long FIX_0_298631336 = 2446;
inline constexpr long FIX_0_390180644 = 3196;
inline constexpr long FIX_0_541196100 = 4433;
inline constexpr long FIX_0_765366865 = 6270;
inline constexpr long FIX_0_899976223 = 7373;
inline constexpr long FIX_1_175875602 = 9633;
inline constexpr long FIX_1_501321110 = 12299;
inline constexpr long FIX_1_847759065 = 15137;
inline constexpr long FIX_1_961570560 = 16069;
inline constexpr long FIX_2_053119869 = 16819;
inline constexpr long FIX_2_562915447 = 20995;
inline constexpr long FIX_3_072711026 = 25172;

inline long idct_descale(long x, int n) { return (x + (1L << (n - 1))) >> n; }

inline std::uint8_t range_limit(long v) {
    v += 128;
    if (v < 0) return 0;
    if (v > 255) return 255;
    return static_cast<std::uint8_t>(v);
}

// coef: natural-order quantized coefficients; qtab: natural order.
inline void idct_islow(const int coef[64], const std::array<int, 64>& qtab, std::uint8_t out[64]) {
    long ws[64];
    // pass 1: columns
    for (int col = 0; col < 8; ++col) {
        bool acZero = true;
        for (int row = 1; row < 8; ++row)
            if (coef[row * 8 + col] != 0) { acZero = false; break; }
        if (acZero) {
            long dc = static_cast<long>(coef[col]) * qtab[col] << IDCT_PASS1_BITS;
            for (int row = 0; row < 8; ++row) ws[row * 8 + col] = dc;
            continue;
        }
        auto cq = [&](int row) { return static_cast<long>(coef[row * 8 + col]) * qtab[row * 8 + col]; };
        long z2 = cq(2), z3 = cq(6);
        long z1 = (z2 + z3) * FIX_0_541196100;
        long tmp2 = z1 + z3 * -FIX_1_847759065;
        long tmp3 = z1 + z2 * FIX_0_765366865;
        z2 = cq(0);
        z3 = cq(4);
        long tmp0 = (z2 + z3) << IDCT_CONST_BITS;
        long tmp1 = (z2 - z3) << IDCT_CONST_BITS;
        long tmp10 = tmp0 + tmp3, tmp13 = tmp0 - tmp3;
        long tmp11 = tmp1 + tmp2, tmp12 = tmp1 - tmp2;
        tmp0 = cq(7);
        tmp1 = cq(5);
        tmp2 = cq(3);
        tmp3 = cq(1);
        z1 = tmp0 + tmp3;
        z2 = tmp1 + tmp2;
        z3 = tmp0 + tmp2;
        long z4 = tmp1 + tmp3;
        long z5 = (z3 + z4) * FIX_1_175875602;
        tmp0 *= FIX_0_298631336;
        tmp1 *= FIX_2_053119869;
        tmp2 *= FIX_3_072711026;
        tmp3 *= FIX_1_501321110;
        z1 *= -FIX_0_899976223;
        z2 *= -FIX_2_562915447;
        z3 *= -FIX_1_961570560;
        z4 *= -FIX_0_390180644;
        z3 += z5;
        z4 += z5;
        tmp0 += z1 + z3;
        tmp1 += z2 + z4;
        tmp2 += z2 + z3;
        tmp3 += z1 + z4;
        ws[8 * 0 + col] = idct_descale(tmp10 + tmp3, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 7 + col] = idct_descale(tmp10 - tmp3, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 1 + col] = idct_descale(tmp11 + tmp2, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 6 + col] = idct_descale(tmp11 - tmp2, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 2 + col] = idct_descale(tmp12 + tmp1, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 5 + col] = idct_descale(tmp12 - tmp1, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 3 + col] = idct_descale(tmp13 + tmp0, IDCT_CONST_BITS - IDCT_PASS1_BITS);
        ws[8 * 4 + col] = idct_descale(tmp13 - tmp0, IDCT_CONST_BITS - IDCT_PASS1_BITS);
    }
    // pass 2: rows
    for (int row = 0; row < 8; ++row) {
        const long* w = ws + row * 8;
        long z2 = w[2], z3 = w[6];
        long z1 = (z2 + z3) * FIX_0_541196100;
        long tmp2 = z1 + z3 * -FIX_1_847759065;
        long tmp3 = z1 + z2 * FIX_0_765366865;
        long tmp0 = (w[0] + w[4]) << IDCT_CONST_BITS;
        long tmp1 = (w[0] - w[4]) << IDCT_CONST_BITS;
        long tmp10 = tmp0 + tmp3, tmp13 = tmp0 - tmp3;
        long tmp11 = tmp1 + tmp2, tmp12 = tmp1 - tmp2;
        tmp0 = w[7];
        tmp1 = w[5];
        tmp2 = w[3];
        tmp3 = w[1];
        z1 = tmp0 + tmp3;
        z2 = tmp1 + tmp2;
        z3 = tmp0 + tmp2;
        long z4 = tmp1 + tmp3;
        long z5 = (z3 + z4) * FIX_1_175875602;
        tmp0 *= FIX_0_298631336;
        tmp1 *= FIX_2_053119869;
        tmp2 *= FIX_3_072711026;
        tmp3 *= FIX_1_501321110;
        z1 *= -FIX_0_899976223;
        z2 *= -FIX_2_562915447;
        z3 *= -FIX_1_961570560;
        z4 *= -FIX_0_390180644;
        z3 += z5;
        z4 += z5;
        tmp0 += z1 + z3;
        tmp1 += z2 + z4;
        tmp2 += z2 + z3;
        tmp3 += z1 + z4;
        const int shift = IDCT_CONST_BITS + IDCT_PASS1_BITS + 3;
        out[row * 8 + 0] = range_limit(idct_descale(tmp10 + tmp3, shift));
        out[row * 8 + 7] = range_limit(idct_descale(tmp10 - tmp3, shift));
        out[row * 8 + 1] = range_limit(idct_descale(tmp11 + tmp2, shift));
        out[row * 8 + 6] = range_limit(idct_descale(tmp11 - tmp2, shift));
        out[row * 8 + 2] = range_limit(idct_descale(tmp12 + tmp1, shift));
        out[row * 8 + 5] = range_limit(idct_descale(tmp12 - tmp1, shift));
        out[row * 8 + 3] = range_limit(idct_descale(tmp13 + tmp0, shift));
        out[row * 8 + 4] = range_limit(idct_descale(tmp13 - tmp0, shift));
    }
}

// --- triangular ("fancy") chroma upsampling, libjpeg jdsample.c --------

inline std::vector<std::uint8_t> upsample_h2v1(const std::vector<std::uint8_t>& in, int inW,
                                               int inH) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(inW) * 2 * inH);
    for (int y = 0; y < inH; ++y) {
        const std::uint8_t* ip = in.data() + static_cast<std::size_t>(y) * inW;
        std::uint8_t* op = out.data() + static_cast<std::size_t>(y) * inW * 2;
        if (inW == 1) {
            op[0] = op[1] = ip[0];
            continue;
        }
        op[0] = ip[0];
        op[1] = static_cast<std::uint8_t>((ip[0] * 3 + ip[1] + 2) >> 2);
        for (int x = 1; x < inW - 1; ++x) {
            op[2 * x] = static_cast<std::uint8_t>((ip[x] * 3 + ip[x - 1] + 1) >> 2);
            op[2 * x + 1] = static_cast<std::uint8_t>((ip[x] * 3 + ip[x + 1] + 2) >> 2);
        }
        op[2 * (inW - 1)] = static_cast<std::uint8_t>((ip[inW - 1] * 3 + ip[inW - 2] + 1) >> 2);
        op[2 * inW - 1] = ip[inW - 1];
    }
    return out;
}

inline std::vector<std::uint8_t> upsample_h2v2(const std::vector<std::uint8_t>& in, int inW,
                                               int inH) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(inW) * 2 * inH * 2);
    for (int outY = 0; outY < inH * 2; ++outY) {
        int near = outY / 2;
        int far = (outY & 1) ? std::min(near + 1, inH - 1) : std::max(near - 1, 0);
        const std::uint8_t* ip0 = in.data() + static_cast<std::size_t>(near) * inW;
        const std::uint8_t* ip1 = in.data() + static_cast<std::size_t>(far) * inW;
        std::uint8_t* op = out.data() + static_cast<std::size_t>(outY) * inW * 2;
        auto colsum = [&](int x) { return static_cast<long>(ip0[x]) * 3 + ip1[x]; };
        if (inW == 1) {
            long t = colsum(0);
            op[0] = static_cast<std::uint8_t>((t * 4 + 8) >> 4);
            op[1] = op[0];
            continue;
        }
        long thiscol = colsum(0), nextcol = colsum(1);
        op[0] = static_cast<std::uint8_t>((thiscol * 4 + 8) >> 4);
        op[1] = static_cast<std::uint8_t>((thiscol * 3 + nextcol + 7) >> 4);
        long lastcol;
        for (int x = 1; x < inW - 1; ++x) {
            lastcol = thiscol;
            thiscol = nextcol;
            nextcol = colsum(x + 1);
            op[2 * x] = static_cast<std::uint8_t>((thiscol * 3 + lastcol + 8) >> 4);
            op[2 * x + 1] = static_cast<std::uint8_t>((thiscol * 3 + nextcol + 7) >> 4);
        }
        lastcol = thiscol;
        thiscol = nextcol;
        op[2 * (inW - 1)] = static_cast<std::uint8_t>((thiscol * 3 + lastcol + 8) >> 4);
        op[2 * inW - 1] = static_cast<std::uint8_t>((thiscol * 4 + 7) >> 4);
    }
    return out;
}

// --- fixed-point YCbCr -> RGB, libjpeg jdcolor.c ------------------------

struct YccTables {
    std::array<int, 256> crR, cbB;
    std::array<long, 256> crG, cbG;

    YccTables() {
        constexpr int SCALEBITS = 16;
        constexpr long HALF = 1L << (SCALEBITS - 1);
        auto fix = [](double x) { return static_cast<long>(x * (1L << SCALEBITS) + 0.5); };
        for (int i = 0; i < 256; ++i) {
            int x = i - 128;
            crR[i] = static_cast<int>((fix(1.40200) * x + HALF) >> SCALEBITS);
            cbB[i] = static_cast<int>((fix(1.77200) * x + HALF) >> SCALEBITS);
            crG[i] = -fix(0.71414) * x;
            cbG[i] = -fix(0.34414) * x + HALF;
        }
    }
};

inline const YccTables& ycc_tables() {
    static const YccTables t;
    return t;
}

struct Component {
    int id = 0;
    int h = 1, v = 1;
    int quantSel = 0;
    int dcSel = 0, acSel = 0;
    int blocksW = 0, blocksH = 0;   // padded to MCU grid
    std::vector<std::uint8_t> samples;  // blocksW*8 x blocksH*8
    int dcPred = 0;
};

}  // namespace jpegdetail

inline RgbImage jpeg_decode(const JpegStream& stream) {
    using namespace jpegdetail;
    const auto& b = stream.bytes;
    if (b.empty()) throw JpegParseError("empty input", 0);
    if (b.size() < 2 || b[0] != 0xff || b[1] != 0xd8) throw JpegParseError("missing SOI", 0);

    std::array<std::array<int, 64>, 4> quant{};
    std::array<bool, 4> quantSeen{};
    std::array<HuffDecoder, 4> dcTables, acTables;
    std::vector<Component> comps;
    int width = 0, height = 0;
    int restartInterval = 0;
    bool sofSeen = false;
    std::size_t pos = 2;

    auto need = [&](std::size_t n, const char* what) {
        if (pos + n > b.size()) throw JpegParseError(std::string("truncated ") + what, pos);
    };
    auto read_u16 = [&](const char* what) {
        need(2, what);
        int v = (b[pos] << 8) | b[pos + 1];
        pos += 2;
        return v;
    };

    while (true) {
        // find marker
        need(2, "marker");
        if (b[pos] != 0xff) throw JpegParseError("expected marker byte 0xFF", pos);
        std::uint8_t marker = b[pos + 1];
        pos += 2;
        while (marker == 0xff) {  // fill bytes
            need(1, "marker");
            marker = b[pos++];
        }
        if (marker == 0xd9) throw JpegParseError("EOI before SOS", pos - 2);
        if (marker == 0x01 || (marker >= 0xd0 && marker <= 0xd7)) continue;  // standalone

        std::size_t segStart = pos;
        int len = read_u16("segment length");
        if (len < 2) throw JpegParseError("bad segment length", segStart);
        std::size_t segEnd = segStart + static_cast<std::size_t>(len);
        if (segEnd > b.size()) throw JpegParseError("segment extends past end", segStart);

        switch (marker) {
            case 0xdb: {  // DQT
                while (pos < segEnd) {
                    int pq = b[pos] >> 4, tq = b[pos] & 0x0f;
                    ++pos;
                    if (tq > 3) throw JpegParseError("bad quant table id", pos - 1);
                    need(static_cast<std::size_t>(pq ? 128 : 64), "DQT payload");
                    for (int i = 0; i < 64; ++i) {
                        int v = pq ? (b[pos] << 8) | b[pos + 1] : b[pos];
                        pos += pq ? 2 : 1;
                        quant[tq][kZigzag[i]] = v;
                    }
                    quantSeen[tq] = true;
                }
                break;
            }
            case 0xc4: {  // DHT
                while (pos < segEnd) {
                    int tc = b[pos] >> 4, th = b[pos] & 0x0f;
                    ++pos;
                    if (tc > 1 || th > 3) throw JpegParseError("bad Huffman table spec", pos - 1);
                    need(16, "DHT counts");
                    std::array<int, 16> counts{};
                    int total = 0;
                    for (int i = 0; i < 16; ++i) {
                        counts[i] = b[pos + i];
                        total += counts[i];
                    }
                    pos += 16;
                    need(static_cast<std::size_t>(total), "DHT symbols");
                    std::vector<int> syms(b.begin() + static_cast<std::ptrdiff_t>(pos),
                                          b.begin() + static_cast<std::ptrdiff_t>(pos + total));
                    pos += static_cast<std::size_t>(total);
                    (tc == 0 ? dcTables[th] : acTables[th]).build(counts, std::move(syms));
                }
                break;
            }
            case 0xc0: {  // SOF0 baseline
                need(6, "SOF0 header");
                int precision = b[pos++];
                if (precision != 8) throw JpegParseError("unsupported sample precision", pos - 1);
                height = (b[pos] << 8) | b[pos + 1];
                width = (b[pos + 2] << 8) | b[pos + 3];
                pos += 4;
                int nc = b[pos++];
                if (nc != 1 && nc != 3) throw JpegParseError("unsupported component count", pos - 1);
                if (width < 1 || height < 1) throw JpegParseError("bad frame dimensions", pos);
                comps.resize(static_cast<std::size_t>(nc));
                for (auto& c : comps) {
                    need(3, "SOF0 component");
                    c.id = b[pos];
                    c.h = b[pos + 1] >> 4;
                    c.v = b[pos + 1] & 0x0f;
                    c.quantSel = b[pos + 2];
                    pos += 3;
                    if (c.h < 1 || c.h > 2 || c.v < 1 || c.v > 2)
                        throw JpegParseError("unsupported sampling factors", pos - 2);
                }
                sofSeen = true;
                break;
            }
            case 0xc1:
            case 0xc2:
            case 0xc3:
            case 0xc5:
            case 0xc6:
            case 0xc7:
            case 0xc9:
            case 0xca:
            case 0xcb:
            case 0xcd:
            case 0xce:
            case 0xcf:
                throw JpegParseError("not a baseline (SOF0) stream", segStart - 2);
            case 0xdd: {  // DRI
                restartInterval = read_u16("DRI");
                break;
            }
            case 0xda: {  // SOS -> entropy data
                if (!sofSeen) throw JpegParseError("SOS before SOF0", segStart - 2);
                need(1, "SOS header");
                int ns = b[pos++];
                if (ns != static_cast<int>(comps.size()))
                    throw JpegParseError("scan component count mismatch", pos - 1);
                for (int i = 0; i < ns; ++i) {
                    need(2, "SOS component");
                    int cid = b[pos];
                    int sel = b[pos + 1];
                    pos += 2;
                    bool found = false;
                    for (auto& c : comps)
                        if (c.id == cid) {
                            c.dcSel = sel >> 4;
                            c.acSel = sel & 0x0f;
                            found = true;
                        }
                    if (!found) throw JpegParseError("scan references unknown component", pos - 2);
                }
                need(3, "SOS spectral bytes");
                pos += 3;
                goto scan;
            }
            default:
                pos = segEnd;  // skip APPn/COM/unknown
                break;
        }
        pos = segEnd > pos ? segEnd : pos;
    }

scan: {
    int hMax = 1, vMax = 1;
    for (auto& c : comps) {
        hMax = std::max(hMax, c.h);
        vMax = std::max(vMax, c.v);
    }
    int mcuW = hMax * 8, mcuH = vMax * 8;
    int mcuCols = (width + mcuW - 1) / mcuW;
    int mcuRows = (height + mcuH - 1) / mcuH;
    for (auto& c : comps) {
        if (!quantSeen[c.quantSel]) throw JpegParseError("missing quant table", pos);
        c.blocksW = mcuCols * c.h;
        c.blocksH = mcuRows * c.v;
        c.samples.assign(static_cast<std::size_t>(c.blocksW) * 8 * c.blocksH * 8, 0);
    }

    BitReader br(b, pos);
    int coef[64];
    std::uint8_t pix[64];
    int mcusUntilRestart = restartInterval;
    for (int my = 0; my < mcuRows; ++my)
        for (int mx = 0; mx < mcuCols; ++mx) {
            if (restartInterval && mcusUntilRestart == 0) {
                // expect RSTn, byte aligned
                br.byte_align();
                std::size_t p = br.pos;
                if (p + 1 >= b.size() || b[p] != 0xff || b[p + 1] < 0xd0 || b[p + 1] > 0xd7)
                    throw JpegParseError("expected restart marker", p);
                br.reset_at(p + 2);
                for (auto& c : comps) c.dcPred = 0;
                mcusUntilRestart = restartInterval;
            }
            for (auto& c : comps) {
                const HuffDecoder& dc = dcTables[c.dcSel];
                const HuffDecoder& ac = acTables[c.acSel];
                if (!dc.valid || !ac.valid)
                    throw JpegParseError("missing Huffman table", br.pos);
                for (int sv = 0; sv < c.v; ++sv)
                    for (int sh = 0; sh < c.h; ++sh) {
                        std::fill(coef, coef + 64, 0);
                        int s = huff_decode(br, dc);
                        if (s > 11) throw JpegParseError("bad DC magnitude", br.pos);
                        int diff = s ? extend(br.get_bits(s), s) : 0;
                        c.dcPred += diff;
                        coef[0] = c.dcPred;
                        for (int k = 1; k < 64;) {
                            int rs = huff_decode(br, ac);
                            int r = rs >> 4, sz = rs & 0x0f;
                            if (sz == 0) {
                                if (r == 15) { k += 16; continue; }
                                break;  // EOB
                            }
                            k += r;
                            if (k > 63) throw JpegParseError("AC run past block end", br.pos);
                            coef[kZigzag[k]] = extend(br.get_bits(sz), sz);
                            ++k;
                        }
                        idct_islow(coef, quant[c.quantSel], pix);
                        int bx = mx * c.h + sh, by = my * c.v + sv;
                        for (int row = 0; row < 8; ++row) {
                            std::uint8_t* dst = c.samples.data() +
                                (static_cast<std::size_t>(by * 8 + row)) * (c.blocksW * 8) + bx * 8;
                            std::copy(pix + row * 8, pix + row * 8 + 8, dst);
                        }
                    }
            }
            --mcusUntilRestart;
        }

    // upsample chroma to full resolution
    RgbImage img(width, height);
    if (comps.size() == 1) {
        const auto& y = comps[0];
        for (int yy = 0; yy < height; ++yy)
            for (int xx = 0; xx < width; ++xx) {
                std::uint8_t v = y.samples[static_cast<std::size_t>(yy) * (y.blocksW * 8) + xx];
                img.at(xx, yy, 0) = img.at(xx, yy, 1) = img.at(xx, yy, 2) = v;
            }
        return img;
    }

    std::array<std::vector<std::uint8_t>, 3> full;
    std::array<int, 3> fullW{};
    for (int ci = 0; ci < 3; ++ci) {
        auto& c = comps[static_cast<std::size_t>(ci)];
        int hs = hMax / c.h, vs = vMax / c.v;
        // crop off the MCU padding so edge handling in the upsamplers sees the
        // true downsampled extent, not replicated filler
        int sw = (width * c.h + hMax - 1) / hMax;
        int sh = (height * c.v + vMax - 1) / vMax;
        int rowStride = c.blocksW * 8;
        if (sw != rowStride || sh != c.blocksH * 8) {
            std::vector<std::uint8_t> cropped(static_cast<std::size_t>(sw) * sh);
            for (int yy = 0; yy < sh; ++yy)
                std::copy(c.samples.begin() + static_cast<std::ptrdiff_t>(yy) * rowStride,
                          c.samples.begin() + static_cast<std::ptrdiff_t>(yy) * rowStride + sw,
                          cropped.begin() + static_cast<std::ptrdiff_t>(yy) * sw);
            c.samples = std::move(cropped);
        }
        if (hs == 1 && vs == 1) {
            full[ci] = std::move(c.samples);
            fullW[ci] = sw;
        } else if (hs == 2 && vs == 2) {
            full[ci] = upsample_h2v2(c.samples, sw, sh);
            fullW[ci] = sw * 2;
        } else if (hs == 2 && vs == 1) {
            full[ci] = upsample_h2v1(c.samples, sw, sh);
            fullW[ci] = sw * 2;
        } else if (hs == 1 && vs == 2) {
            // vertical-only doubling: replicate rows (uncommon; simple rule)
            full[ci].resize(static_cast<std::size_t>(sw) * sh * 2);
            for (int yy = 0; yy < sh * 2; ++yy)
                std::copy(c.samples.begin() + static_cast<std::ptrdiff_t>((yy / 2) * sw),
                          c.samples.begin() + static_cast<std::ptrdiff_t>((yy / 2 + 1) * sw),
                          full[ci].begin() + static_cast<std::ptrdiff_t>(yy) * sw);
            fullW[ci] = sw;
        } else {
            throw JpegParseError("unsupported sampling combination", pos);
        }
    }

    const auto& t = ycc_tables();
    for (int yy = 0; yy < height; ++yy)
        for (int xx = 0; xx < width; ++xx) {
            int Y = full[0][static_cast<std::size_t>(yy) * fullW[0] + xx];
            int Cb = full[1][static_cast<std::size_t>(yy) * fullW[1] + xx];
            int Cr = full[2][static_cast<std::size_t>(yy) * fullW[2] + xx];
            auto clamp8 = [](int v) {
                return static_cast<std::uint8_t>(v < 0 ? 0 : v > 255 ? 255 : v);
            };
            img.at(xx, yy, 0) = clamp8(Y + t.crR[Cr]);
            img.at(xx, yy, 1) = clamp8(Y + static_cast<int>((t.cbG[Cb] + t.crG[Cr]) >> 16));
            img.at(xx, yy, 2) = clamp8(Y + t.cbB[Cb]);
        }
    return img;
}
}

}  // namespace msroi
