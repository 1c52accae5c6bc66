#pragma once

// Dense double-precision tensors plus the forward/backward kernels the
// saliency network needs: conv2d, relu, maxpool, sigmoid/softmax, SGD.
// Shapes are NCHW throughout. Everything is plain loops; double precision
// keeps finite-difference gradient checks sharp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace msroi {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;  // row-major

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) {
            if (e < 0) throw std::invalid_argument("Tensor: negative extent");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }

    // 4-d accessors (the only rank the network uses)
    double& at4(int n, int c, int h, int w) {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const double& at4(int n, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "(";
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
    return r + ")";
}

// Convolution parameters: kernel is (outFeatures, inFeatures, n, n),
// bias is (outFeatures). Gradient accumulators mirror the shapes.
struct LayerParams {
    Tensor kernel;
    Tensor bias;
    Tensor kernelGrad;
    Tensor biasGrad;

    LayerParams() = default;
    LayerParams(int outF, int inF, int n)
        : kernel({outF, inF, n, n}), bias({outF}), kernelGrad({outF, inF, n, n}), biasGrad({outF}) {}

    void zero_grad() {
        std::fill(kernelGrad.data.begin(), kernelGrad.data.end(), 0.0);
        std::fill(biasGrad.data.begin(), biasGrad.data.end(), 0.0);
    }

    // Glorot-style uniform init, reproducible from the caller's generator.
    void init_uniform(std::mt19937_64& rng) {
        int n = kernel.shape[2];
        double fanIn = static_cast<double>(kernel.shape[1]) * n * n;
        double fanOut = static_cast<double>(kernel.shape[0]) * n * n;
        double limit = std::sqrt(6.0 / (fanIn + fanOut));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& v : kernel.data) v = dist(rng);
        // small positive bias keeps rectified units initially active
        std::fill(bias.data.begin(), bias.data.end(), 0.01);
    }
};

inline void check_conv_shapes(const Tensor& input, const LayerParams& p) {
    if (input.shape.size() != 4)
        throw std::invalid_argument("conv2d: input must be 4-d, got " + shape_str(input.shape));
    if (input.shape[1] != p.kernel.shape[1])
        throw std::invalid_argument("conv2d: input channels " + shape_str(input.shape) +
                                    " do not match kernel " + shape_str(p.kernel.shape));
}

inline Tensor conv2d(const Tensor& input, const LayerParams& p, int padding, int stride) {
    check_conv_shapes(input, p);
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    const int N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const int OC = p.kernel.shape[0], K = p.kernel.shape[2];
    const int OH = (H + 2 * padding - K) / stride + 1;
    const int OW = (W + 2 * padding - K) / stride + 1;
    if (OH < 1 || OW < 1)
        throw std::invalid_argument("conv2d: kernel " + shape_str(p.kernel.shape) +
                                    " larger than padded input " + shape_str(input.shape));
    Tensor out({N, OC, OH, OW});
    for (int n = 0; n < N; ++n) {
        for (int oc = 0; oc < OC; ++oc) {
            double* outBase = &out.at4(n, oc, 0, 0);
            const double b = p.bias.data[oc];
            for (std::size_t i = 0; i < static_cast<std::size_t>(OH) * OW; ++i) outBase[i] = b;
            for (int c = 0; c < C; ++c) {
                const double* inBase = &input.at4(n, c, 0, 0);
                for (int a = 0; a < K; ++a) {
                    for (int bk = 0; bk < K; ++bk) {
                        const double w = p.kernel.at4(oc, c, a, bk);
                        if (w == 0.0) continue;
                        for (int i = 0; i < OH; ++i) {
                            const int y = i * stride + a - padding;
                            if (y < 0 || y >= H) continue;
                            const double* inRow = inBase + static_cast<std::size_t>(y) * W;
                            double* outRow = outBase + static_cast<std::size_t>(i) * OW;
                            // valid j range: 0 <= j*stride + bk - padding < W
                            int jLo = 0, jHi = OW;
                            while (jLo < OW && jLo * stride + bk - padding < 0) ++jLo;
                            while (jHi > jLo && (jHi - 1) * stride + bk - padding >= W) --jHi;
                            const int off = bk - padding;
                            if (stride == 1) {
                                for (int j = jLo; j < jHi; ++j) outRow[j] += w * inRow[j + off];
                            } else {
                                for (int j = jLo; j < jHi; ++j) outRow[j] += w * inRow[j * stride + off];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates parameter gradients into p; returns the input gradient.
inline Tensor conv2d_backward(const Tensor& input, LayerParams& p, const Tensor& upstream,
                              int padding, int stride) {
    check_conv_shapes(input, p);
    const int N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const int OC = p.kernel.shape[0], K = p.kernel.shape[2];
    const int OH = (H + 2 * padding - K) / stride + 1;
    const int OW = (W + 2 * padding - K) / stride + 1;
    if (upstream.shape != std::vector<int>{N, OC, OH, OW})
        throw std::invalid_argument("conv2d_backward: upstream " + shape_str(upstream.shape) +
                                    " does not match output " + shape_str({N, OC, OH, OW}));
    Tensor inGrad(input.shape);
    for (int n = 0; n < N; ++n) {
        for (int oc = 0; oc < OC; ++oc) {
            const double* upBase = &upstream.at4(n, oc, 0, 0);
            double bsum = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(OH) * OW; ++i) bsum += upBase[i];
            p.biasGrad.data[oc] += bsum;
            for (int c = 0; c < C; ++c) {
                const double* inBase = &input.at4(n, c, 0, 0);
                double* igBase = &inGrad.at4(n, c, 0, 0);
                for (int a = 0; a < K; ++a) {
                    for (int bk = 0; bk < K; ++bk) {
                        const double w = p.kernel.at4(oc, c, a, bk);
                        double wg = 0.0;
                        for (int i = 0; i < OH; ++i) {
                            const int y = i * stride + a - padding;
                            if (y < 0 || y >= H) continue;
                            const double* inRow = inBase + static_cast<std::size_t>(y) * W;
                            double* igRow = igBase + static_cast<std::size_t>(y) * W;
                            const double* upRow = upBase + static_cast<std::size_t>(i) * OW;
                            int jLo = 0, jHi = OW;
                            while (jLo < OW && jLo * stride + bk - padding < 0) ++jLo;
                            while (jHi > jLo && (jHi - 1) * stride + bk - padding >= W) --jHi;
                            const int off = bk - padding;
                            for (int j = jLo; j < jHi; ++j) {
                                const double u = upRow[j];
                                wg += u * inRow[j * stride + off];
                                igRow[j * stride + off] += u * w;
                            }
                        }
                        p.kernelGrad.at4(oc, c, a, bk) += wg;
                    }
                }
            }
        }
    }
    return inGrad;
}

inline Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) v = std::max(0.0, v);
    return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream))
        throw std::invalid_argument("relu_backward: shape mismatch " + shape_str(input.shape) +
                                    " vs " + shape_str(upstream.shape));
    Tensor grad(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i)
        grad.data[i] = input.data[i] > 0.0 ? upstream.data[i] : 0.0;
    return grad;
}

struct MaxPoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output value
};

// Overlapping windows are allowed (window >= stride). Ties resolve to the
// lowest linear index so results are deterministic.
inline MaxPoolResult maxpool(const Tensor& input, int window, int stride) {
    if (input.shape.size() != 4) throw std::invalid_argument("maxpool: input must be 4-d");
    if (stride < 1 || window < stride) throw std::invalid_argument("maxpool: need window >= stride >= 1");
    const int N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    if (window > H || window > W)
        throw std::invalid_argument("maxpool: window " + std::to_string(window) +
                                    " larger than input " + shape_str(input.shape));
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;
    MaxPoolResult r{Tensor({N, C, OH, OW}), {}};
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < OH; ++i)
                for (int j = 0; j < OW; ++j, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t bestIdx = 0;
                    for (int a = 0; a < window; ++a)
                        for (int b = 0; b < window; ++b) {
                            const int y = i * stride + a, x = j * stride + b;
                            std::size_t idx =
                                ((static_cast<std::size_t>(n) * C + c) * H + y) * W + x;
                            if (input.data[idx] > best) {
                                best = input.data[idx];
                                bestIdx = idx;
                            }
                        }
                    r.output.data[o] = best;
                    r.argmax[o] = bestIdx;
                }
    return r;
}

inline Tensor maxpool_backward(const Tensor& input, const MaxPoolResult& pooled,
                               const Tensor& upstream) {
    if (!pooled.output.same_shape(upstream))
        throw std::invalid_argument("maxpool_backward: upstream shape mismatch");
    Tensor grad(input.shape);
    for (std::size_t o = 0; o < upstream.size(); ++o)
        grad.data[pooled.argmax[o]] += upstream.data[o];
    return grad;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor sigmoid(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) v = sigmoid(v);
    return out;
}

// Max-subtraction for stability; sums to 1 within 1e-9.
inline std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) return {};
    double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

// p <- p - lr*grad, then the accumulators are zeroed. A layer whose
// gradient contains a non-finite value is skipped and reported.
inline int sgd_step(std::vector<LayerParams*>& params, double lr) {
    int skipped = 0;
    for (LayerParams* p : params) {
        if (!p->kernelGrad.all_finite() || !p->biasGrad.all_finite()) {
            ++skipped;
            p->zero_grad();
            continue;
        }
        for (std::size_t i = 0; i < p->kernel.size(); ++i)
            p->kernel.data[i] -= lr * p->kernelGrad.data[i];
        for (std::size_t i = 0; i < p->bias.size(); ++i)
            p->bias.data[i] -= lr * p->biasGrad.data[i];
        p->zero_grad();
    }
    return skipped;
}

// ---- checkpoint format -------------------------------------------------
// magic "MSROI1", uint32 tensor count, then per tensor: uint32 rank,
// uint32 extents, raw little-endian doubles. All integers little-endian.

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    if (pos + 4 > b.size()) throw std::runtime_error("checkpoint: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<const Tensor*>& tensors) {
    std::vector<std::uint8_t> out{'M', 'S', 'R', 'O', 'I', '1'};
    detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
        detail::put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
        for (int e : t->shape) detail::put_u32(out, static_cast<std::uint32_t>(e));
        static_assert(sizeof(double) == 8);
        for (double v : t->data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        }
    }
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp);
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename to " + path + " failed");
}

inline std::vector<Tensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> b(std::istreambuf_iterator<char>(f), {});
    static const char magic[6] = {'M', 'S', 'R', 'O', 'I', '1'};
    if (b.size() < 6 || !std::equal(magic, magic + 6, b.begin()))
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::size_t pos = 6;
    std::uint32_t count = detail::get_u32(b, pos);
    std::vector<Tensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint32_t rank = detail::get_u32(b, pos);
        std::vector<int> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i)
            shape[i] = static_cast<int>(detail::get_u32(b, pos));
        Tensor tensor(shape);
        if (pos + tensor.size() * 8 > b.size())
            throw std::runtime_error("checkpoint: truncated tensor data");
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[pos + k]) << (8 * k);
            pos += 8;
            std::memcpy(&tensor.data[i], &bits, 8);
        }
        tensors.push_back(std::move(tensor));
    }
    return tensors;
}

}  // namespace msroi
