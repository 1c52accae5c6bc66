#pragma once

// The multi-structure ROI network: a shared convolutional trunk of five
// conv-conv-pool blocks, a linear per-category head producing feature
// stacks f^c_d(x,y), class scores by total activation, and saliency map
// construction (threshold or rank-weighted top-K), plus a conventional
// CAM model (global-average-pool classifier) as the baseline.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msroi/image.hpp"
#include "msroi/tensor.hpp"

namespace msroi {

struct NetworkSpec {
    int blockCount = 5;
    int convsPerBlock = 2;
    std::vector<int> featureCounts = {16, 32, 32, 64, 64};
    int kernel = 3;
    int poolStride = 2;
    int categoryCount = 6;
    int headFeatures = 4;  // D feature maps per category
};

struct ClassScores {
    std::vector<double> z;  // one total activation per category
};

// Raw dataset label -> merged category id. Total over the label set;
// merged ids must be dense in [0, C).
struct ClassMergeTable {
    std::map<int, int> mapping;

    int merged(int rawLabel) const {
        auto it = mapping.find(rawLabel);
        if (it == mapping.end())
            throw std::invalid_argument("merge table: unknown raw label " + std::to_string(rawLabel));
        return it->second;
    }

    int category_count() const {
        int m = -1;
        for (auto& [raw, id] : mapping) m = std::max(m, id);
        return m + 1;
    }

    static ClassMergeTable identity(int categories) {
        ClassMergeTable t;
        for (int i = 0; i < categories; ++i) t.mapping[i] = i;
        return t;
    }

    // text format: "rawLabel mergedId" per line, '#' comments
    static ClassMergeTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open merge table " + path);
        ClassMergeTable t;
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            int raw, merged;
            if (ss >> raw >> merged) t.mapping[raw] = merged;
        }
        return t;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        for (auto& [raw, merged] : mapping) out << raw << " " << merged << "\n";
    }
};

// Cached activations from one forward pass, kept for backprop.
struct ForwardTrace {
    std::vector<Tensor> convIn;       // input to each trunk conv
    std::vector<Tensor> convOut;      // pre-relu output of each trunk conv
    std::vector<Tensor> poolIn;       // input to each pool
    std::vector<MaxPoolResult> pools;
    Tensor headIn;
    Tensor head;  // (1, C*D, h, w), viewed as (c, d, x, y)
};

class MsroiNetwork {
  public:
    NetworkSpec spec;
    std::vector<LayerParams> trunk;
    LayerParams head;

    explicit MsroiNetwork(NetworkSpec s = {}) : spec(std::move(s)) {
        int inF = 3;
        for (int blk = 0; blk < spec.blockCount; ++blk) {
            int outF = spec.featureCounts[blk];
            for (int cv = 0; cv < spec.convsPerBlock; ++cv) {
                trunk.emplace_back(outF, inF, spec.kernel);
                inF = outF;
            }
        }
        head = LayerParams(spec.categoryCount * spec.headFeatures, inF, spec.kernel);
    }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (auto& p : trunk) p.init_uniform(rng);
        head.init_uniform(rng);
    }

    int pad() const { return spec.kernel / 2; }  // same padding; only pooling shrinks

    // input: (1, 3, H, W) with H, W divisible by 2^blockCount
    ForwardTrace forward(const Tensor& input) const {
        ForwardTrace t;
        Tensor x = input;
        std::size_t layer = 0;
        for (int blk = 0; blk < spec.blockCount; ++blk) {
            for (int cv = 0; cv < spec.convsPerBlock; ++cv, ++layer) {
                t.convIn.push_back(x);
                Tensor pre = conv2d(x, trunk[layer], pad(), 1);
                t.convOut.push_back(pre);
                x = relu(pre);
            }
            t.poolIn.push_back(x);
            t.pools.push_back(maxpool(x, spec.poolStride, spec.poolStride));
            x = t.pools.back().output;
        }
        t.headIn = x;
        t.head = conv2d(x, head, pad(), 1);  // linear head, no rectifier
        return t;
    }

    // Backprop from d(loss)/d(head); accumulates parameter gradients.
    void backward(const ForwardTrace& t, const Tensor& headGrad) {
        Tensor g = conv2d_backward(t.headIn, head, headGrad, pad(), 1);
        std::size_t layer = trunk.size();
        for (int blk = spec.blockCount - 1; blk >= 0; --blk) {
            g = maxpool_backward(t.poolIn[blk], t.pools[blk], g);
            for (int cv = spec.convsPerBlock - 1; cv >= 0; --cv) {
                --layer;
                g = relu_backward(t.convOut[layer], g);
                g = conv2d_backward(t.convIn[layer], trunk[layer], g, pad(), 1);
            }
        }
    }

    std::vector<LayerParams*> params() {
        std::vector<LayerParams*> p;
        for (auto& l : trunk) p.push_back(&l);
        p.push_back(&head);
        return p;
    }

    void save(const std::string& path) const {
        std::vector<const Tensor*> tensors;
        for (auto& l : trunk) {
            tensors.push_back(&l.kernel);
            tensors.push_back(&l.bias);
        }
        tensors.push_back(&head.kernel);
        tensors.push_back(&head.bias);
        save_checkpoint(path, tensors);
    }

    void load(const std::string& path) {
        auto tensors = load_checkpoint(path);
        if (tensors.size() != trunk.size() * 2 + 2)
            throw std::runtime_error("checkpoint layer count mismatch");
        for (std::size_t i = 0; i < trunk.size(); ++i) {
            if (tensors[2 * i].shape != trunk[i].kernel.shape)
                throw std::runtime_error("checkpoint shape mismatch at layer " + std::to_string(i));
            trunk[i].kernel = std::move(tensors[2 * i]);
            trunk[i].bias = std::move(tensors[2 * i + 1]);
        }
        head.kernel = std::move(tensors[trunk.size() * 2]);
        head.bias = std::move(tensors[trunk.size() * 2 + 1]);
    }
};

// Per-category feature stacks from the shared trunk output; a linear
// convolution whose C*D output channels are viewed as (c, d, x, y).
inline Tensor head_forward(const Tensor& trunkOutput, const LayerParams& headParams, int padding) {
    return conv2d(trunkOutput, headParams, padding, 1);
}

// Head tensor is (1, C*D, h, w); these helpers index it as (c, d, x, y).

inline void check_head(const Tensor& head, int categories, int features) {
    if (head.shape.size() != 4 || head.shape[1] != categories * features)
        throw std::invalid_argument("head tensor " + shape_str(head.shape) +
                                    " does not match C=" + std::to_string(categories) +
                                    " D=" + std::to_string(features));
}

// Z[c] = sum of the head tensor over all non-category axes.
inline ClassScores class_scores(const Tensor& head, int categories, int features) {
    check_head(head, categories, features);
    const int hw = head.shape[2] * head.shape[3];
    ClassScores s;
    s.z.assign(static_cast<std::size_t>(categories), 0.0);
    for (int c = 0; c < categories; ++c) {
        double sum = 0.0;
        for (int d = 0; d < features; ++d) {
            const double* base = head.data.data() + static_cast<std::size_t>(c * features + d) * hw;
            for (int i = 0; i < hw; ++i) sum += base[i];
        }
        s.z[c] = sum;
    }
    return s;
}

// Per-category presence probabilities; no marginalization across classes.
inline std::vector<double> sigmoid_likelihood(const ClassScores& scores) {
    std::vector<double> p(scores.z.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(scores.z[i]);
    return p;
}

// Multi-label cross entropy against 0/1 presence indicators and its
// gradient with respect to Z.
inline double multilabel_loss(const ClassScores& scores, const std::vector<int>& present,
                              std::vector<double>* gradZ = nullptr) {
    std::vector<char> y(scores.z.size(), 0);
    for (int c : present) {
        if (c < 0 || c >= static_cast<int>(y.size()))
            throw std::invalid_argument("label " + std::to_string(c) + " out of range");
        y[static_cast<std::size_t>(c)] = 1;
    }
    double loss = 0.0;
    if (gradZ) gradZ->assign(scores.z.size(), 0.0);
    for (std::size_t c = 0; c < scores.z.size(); ++c) {
        double z = scores.z[c];
        // stable log(1+exp(...)) forms
        loss += y[c] ? (z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)))
                     : (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
        if (gradZ) (*gradZ)[c] = sigmoid(z) - static_cast<double>(y[c]);
    }
    return loss;
}

namespace mapdetail {

// Clamp negatives (saliency is non-negative), then min-max to [0,1].
// An identically-zero raw map stays zero: it means "nothing salient".
inline SaliencyMap normalize_map(std::vector<double> raw, int w, int h) {
    SaliencyMap map(w, h);
    double mx = 0.0;
    for (double& v : raw) {
        if (v < 0) v = 0;
        mx = std::max(mx, v);
    }
    if (mx > 0)
        for (std::size_t i = 0; i < raw.size(); ++i) map.values[i] = raw[i] / mx;
    return map;
}

}  // namespace mapdetail

enum class MapMode { Threshold, TopK };

struct MapOptions {
    MapMode mode = MapMode::TopK;
    double threshold = 0.0;  // Threshold mode: include categories with Z > T
    int topK = 5;            // TopK mode: rank weight (K+1-r)/K for rank r=1..K
};

// Multi-structure map at head resolution, normalized to [0,1].
inline SaliencyMap msroi_map(const Tensor& head, const ClassScores& scores, int categories,
                             int features, const MapOptions& opts = {}) {
    check_head(head, categories, features);
    const int h = head.shape[2], w = head.shape[3];
    const int hw = h * w;
    std::vector<double> weight(static_cast<std::size_t>(categories), 0.0);
    if (opts.mode == MapMode::Threshold) {
        for (int c = 0; c < categories; ++c)
            if (scores.z[c] > opts.threshold) weight[c] = 1.0;
    } else {
        if (opts.topK > categories)
            throw std::invalid_argument("topK " + std::to_string(opts.topK) + " exceeds category count " +
                                        std::to_string(categories));
        std::vector<int> order(static_cast<std::size_t>(categories));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return scores.z[a] > scores.z[b]; });
        for (int r = 1; r <= opts.topK; ++r)
            weight[order[static_cast<std::size_t>(r - 1)]] =
                static_cast<double>(opts.topK + 1 - r) / opts.topK;
    }
    std::vector<double> raw(static_cast<std::size_t>(hw), 0.0);
    for (int c = 0; c < categories; ++c) {
        if (weight[c] == 0.0) continue;
        for (int d = 0; d < features; ++d) {
            const double* base = head.data.data() + static_cast<std::size_t>(c * features + d) * hw;
            for (int i = 0; i < hw; ++i) raw[i] += weight[c] * base[i];
        }
    }
    return mapdetail::normalize_map(std::move(raw), w, h);
}

// Conventional class activation map for one category: classifier-weighted
// sum of feature maps, normalized to [0,1].
inline SaliencyMap cam_map(const Tensor& features, const std::vector<std::vector<double>>& weights,
                           int targetCategory) {
    if (features.shape.size() != 4) throw std::invalid_argument("cam_map: features must be 4-d");
    if (targetCategory < 0 || targetCategory >= static_cast<int>(weights.size()))
        throw std::invalid_argument("cam_map: unknown category " + std::to_string(targetCategory));
    const int D = features.shape[1], h = features.shape[2], w = features.shape[3];
    const auto& wc = weights[static_cast<std::size_t>(targetCategory)];
    if (static_cast<int>(wc.size()) != D)
        throw std::invalid_argument("cam_map: weight count does not match feature maps");
    std::vector<double> raw(static_cast<std::size_t>(h) * w, 0.0);
    for (int d = 0; d < D; ++d) {
        const double* base = features.data.data() + static_cast<std::size_t>(d) * h * w;
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += wc[static_cast<std::size_t>(d)] * base[i];
    }
    return mapdetail::normalize_map(std::move(raw), w, h);
}

// Bilinear upsample with corner alignment. Range is preserved.
inline SaliencyMap upsample_map(const SaliencyMap& src, int targetW, int targetH) {
    if (targetW < 1 || targetH < 1) throw std::invalid_argument("upsample_map: zero-sized target");
    if (targetW < src.width || targetH < src.height)
        throw std::invalid_argument("upsample_map: target smaller than source");
    SaliencyMap out(targetW, targetH);
    for (int y = 0; y < targetH; ++y) {
        double sy = targetH == 1 ? 0.0
                                 : static_cast<double>(y) * (src.height - 1) / (targetH - 1);
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double fy = sy - y0;
        for (int x = 0; x < targetW; ++x) {
            double sx = targetW == 1 ? 0.0
                                     : static_cast<double>(x) * (src.width - 1) / (targetW - 1);
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double fx = sx - x0;
            out.at(x, y) = (1 - fy) * ((1 - fx) * src.at(x0, y0) + fx * src.at(x1, y0)) +
                           fy * ((1 - fx) * src.at(x0, y1) + fx * src.at(x1, y1));
        }
    }
    return out;
}

// -----------------------------------------------------------------------
// CAM baseline model: same trunk shape, one linear feature conv, then a
// global-average-pool linear classifier trained with softmax.
// -----------------------------------------------------------------------

class CamNetwork {
  public:
    NetworkSpec spec;
    std::vector<LayerParams> trunk;
    LayerParams featureConv;                   // inF -> D feature maps
    std::vector<std::vector<double>> clsW;     // C x D classifier weights
    std::vector<double> clsB;                  // C
    std::vector<std::vector<double>> clsWGrad;
    std::vector<double> clsBGrad;
    int camFeatures;

    explicit CamNetwork(NetworkSpec s = {}, int features = 16) : spec(std::move(s)), camFeatures(features) {
        int inF = 3;
        for (int blk = 0; blk < spec.blockCount; ++blk) {
            int outF = spec.featureCounts[blk];
            for (int cv = 0; cv < spec.convsPerBlock; ++cv) {
                trunk.emplace_back(outF, inF, spec.kernel);
                inF = outF;
            }
        }
        featureConv = LayerParams(camFeatures, inF, spec.kernel);
        clsW.assign(static_cast<std::size_t>(spec.categoryCount),
                    std::vector<double>(static_cast<std::size_t>(camFeatures), 0.0));
        clsB.assign(static_cast<std::size_t>(spec.categoryCount), 0.0);
        clsWGrad = clsW;
        clsBGrad = clsB;
    }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (auto& p : trunk) p.init_uniform(rng);
        featureConv.init_uniform(rng);
        double limit = std::sqrt(6.0 / (camFeatures + spec.categoryCount));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& row : clsW)
            for (double& v : row) v = dist(rng);
    }

    int pad() const { return spec.kernel / 2; }

    struct Trace {
        ForwardTrace trunkTrace;      // convIn/convOut/poolIn/pools reused; head unused
        Tensor featIn, featPre, feat; // feature conv input / pre-relu / post-relu
        std::vector<double> gap;      // D global averages
        std::vector<double> scores;   // C logits
    };

    Trace forward(const Tensor& input) const {
        Trace t;
        Tensor x = input;
        std::size_t layer = 0;
        for (int blk = 0; blk < spec.blockCount; ++blk) {
            for (int cv = 0; cv < spec.convsPerBlock; ++cv, ++layer) {
                t.trunkTrace.convIn.push_back(x);
                Tensor pre = conv2d(x, trunk[layer], pad(), 1);
                t.trunkTrace.convOut.push_back(pre);
                x = relu(pre);
            }
            t.trunkTrace.poolIn.push_back(x);
            t.trunkTrace.pools.push_back(maxpool(x, spec.poolStride, spec.poolStride));
            x = t.trunkTrace.pools.back().output;
        }
        t.featIn = x;
        t.featPre = conv2d(x, featureConv, pad(), 1);
        t.feat = relu(t.featPre);
        const int hw = t.feat.shape[2] * t.feat.shape[3];
        t.gap.assign(static_cast<std::size_t>(camFeatures), 0.0);
        for (int d = 0; d < camFeatures; ++d) {
            const double* base = t.feat.data.data() + static_cast<std::size_t>(d) * hw;
            double s = 0;
            for (int i = 0; i < hw; ++i) s += base[i];
            t.gap[static_cast<std::size_t>(d)] = s / hw;
        }
        t.scores.assign(static_cast<std::size_t>(spec.categoryCount), 0.0);
        for (int c = 0; c < spec.categoryCount; ++c) {
            double s = clsB[static_cast<std::size_t>(c)];
            for (int d = 0; d < camFeatures; ++d)
                s += clsW[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] *
                     t.gap[static_cast<std::size_t>(d)];
            t.scores[static_cast<std::size_t>(c)] = s;
        }
        return t;
    }

    // softmax cross entropy against a single true label
    double backward(const Trace& t, int label) {
        auto p = softmax(t.scores);
        double loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
        std::vector<double> dScore = p;
        dScore[static_cast<std::size_t>(label)] -= 1.0;
        const int hw = t.feat.shape[2] * t.feat.shape[3];
        std::vector<double> dGap(static_cast<std::size_t>(camFeatures), 0.0);
        for (int c = 0; c < spec.categoryCount; ++c) {
            for (int d = 0; d < camFeatures; ++d) {
                clsWGrad[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +=
                    dScore[static_cast<std::size_t>(c)] * t.gap[static_cast<std::size_t>(d)];
                dGap[static_cast<std::size_t>(d)] +=
                    dScore[static_cast<std::size_t>(c)] * clsW[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
            }
            clsBGrad[static_cast<std::size_t>(c)] += dScore[static_cast<std::size_t>(c)];
        }
        Tensor featGrad(t.feat.shape);
        for (int d = 0; d < camFeatures; ++d) {
            double g = dGap[static_cast<std::size_t>(d)] / hw;
            double* base = featGrad.data.data() + static_cast<std::size_t>(d) * hw;
            for (int i = 0; i < hw; ++i) base[i] = g;
        }
        Tensor g = relu_backward(t.featPre, featGrad);
        g = conv2d_backward(t.featIn, featureConv, g, pad(), 1);
        std::size_t layer = trunk.size();
        for (int blk = spec.blockCount - 1; blk >= 0; --blk) {
            g = maxpool_backward(t.trunkTrace.poolIn[blk], t.trunkTrace.pools[blk], g);
            for (int cv = spec.convsPerBlock - 1; cv >= 0; --cv) {
                --layer;
                g = relu_backward(t.trunkTrace.convOut[layer], g);
                g = conv2d_backward(t.trunkTrace.convIn[layer], trunk[layer], g, pad(), 1);
            }
        }
        return loss;
    }

    void classifier_step(double lr) {
        for (int c = 0; c < spec.categoryCount; ++c) {
            for (int d = 0; d < camFeatures; ++d) {
                clsW[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] -=
                    lr * clsWGrad[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
                clsWGrad[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = 0.0;
            }
            clsB[static_cast<std::size_t>(c)] -= lr * clsBGrad[static_cast<std::size_t>(c)];
            clsBGrad[static_cast<std::size_t>(c)] = 0.0;
        }
    }

    std::vector<LayerParams*> conv_params() {
        std::vector<LayerParams*> p;
        for (auto& l : trunk) p.push_back(&l);
        p.push_back(&featureConv);
        return p;
    }
};

inline Tensor image_to_tensor(const RgbImage& img) {
    Tensor t({1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at4(0, c, y, x) = img.at(x, y, c) / 255.0;
    return t;
}

// Full inference path: forward, score, map, upsample to image resolution.
inline SaliencyMap infer_saliency(const MsroiNetwork& net, const RgbImage& img,
                                  const MapOptions& opts = {}) {
    ForwardTrace t = net.forward(image_to_tensor(img));
    ClassScores z = class_scores(t.head, net.spec.categoryCount, net.spec.headFeatures);
    SaliencyMap coarse = msroi_map(t.head, z, net.spec.categoryCount, net.spec.headFeatures, opts);
    return upsample_map(coarse, img.width, img.height);
}

// -----------------------------------------------------------------------
// Training
// -----------------------------------------------------------------------

struct LabeledImage {
    Tensor image;             // (1, 3, H, W), values in [0,1]
    std::vector<int> labels;  // raw labels (mapped through the merge table)
};

struct TrainReport {
    std::vector<double> epochLoss;
    std::vector<double> epochAccuracy;  // per-category binary accuracy
    int skippedSteps = 0;
};

inline TrainReport train_msroi(MsroiNetwork& net, const std::vector<LabeledImage>& dataset,
                               const ClassMergeTable& merge, int epochs, double lr,
                               std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& img : dataset)
        if (img.labels.empty()) throw std::invalid_argument("train: image without labels");
    net.init(seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto params = net.params();
    TrainReport report;
    const int C = net.spec.categoryCount;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double lossSum = 0.0;
        long correct = 0, total = 0;
        for (std::size_t idx : order) {
            const auto& sample = dataset[idx];
            std::vector<int> present;
            present.reserve(sample.labels.size());
            for (int raw : sample.labels) present.push_back(merge.merged(raw));
            ForwardTrace t = net.forward(sample.image);
            ClassScores z = class_scores(t.head, C, net.spec.headFeatures);
            std::vector<double> gradZ;
            lossSum += multilabel_loss(z, present, &gradZ);
            for (int c = 0; c < C; ++c) {
                bool truth = std::find(present.begin(), present.end(), c) != present.end();
                bool pred = sigmoid(z.z[static_cast<std::size_t>(c)]) > 0.5;
                correct += pred == truth;
                ++total;
            }
            // dZ/d(head) is 1 on every element of category c's stack
            Tensor headGrad(t.head.shape);
            const int hw = t.head.shape[2] * t.head.shape[3];
            for (int c = 0; c < C; ++c)
                for (int d = 0; d < net.spec.headFeatures; ++d) {
                    double* base = headGrad.data.data() +
                                   static_cast<std::size_t>(c * net.spec.headFeatures + d) * hw;
                    for (int i = 0; i < hw; ++i) base[i] = gradZ[static_cast<std::size_t>(c)];
                }
            net.backward(t, headGrad);
            report.skippedSteps += sgd_step(params, lr);
        }
        report.epochLoss.push_back(lossSum / static_cast<double>(dataset.size()));
        report.epochAccuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
    }
    return report;
}

inline TrainReport train_cam(CamNetwork& net, const std::vector<LabeledImage>& dataset,
                             const ClassMergeTable& merge, int epochs, double lr,
                             std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    net.init(seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto params = net.conv_params();
    TrainReport report;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double lossSum = 0.0;
        long correct = 0;
        for (std::size_t idx : order) {
            const auto& sample = dataset[idx];
            int label = merge.merged(sample.labels.front());  // primary object
            auto t = net.forward(sample.image);
            lossSum += net.backward(t, label);
            int argmax = static_cast<int>(std::max_element(t.scores.begin(), t.scores.end()) -
                                          t.scores.begin());
            correct += argmax == label;
            report.skippedSteps += sgd_step(params, lr);
            net.classifier_step(lr);
        }
        report.epochLoss.push_back(lossSum / static_cast<double>(dataset.size()));
        report.epochAccuracy.push_back(static_cast<double>(correct) / static_cast<double>(dataset.size()));
    }
    return report;
}

// -----------------------------------------------------------------------
// Gradient check: analytic vs central finite differences on the
// multi-label loss. Parameters are sampled (seeded) per tensor.
// -----------------------------------------------------------------------

inline double gradcheck(MsroiNetwork& net, const Tensor& input, const std::vector<int>& labels,
                        double epsilon, int samplesPerTensor = 24, std::uint64_t seed = 17) {
    const int C = net.spec.categoryCount;
    auto lossOf = [&]() {
        ForwardTrace t = net.forward(input);
        ClassScores z = class_scores(t.head, C, net.spec.headFeatures);
        return multilabel_loss(z, labels);
    };
    // analytic pass
    for (auto* p : net.params()) p->zero_grad();
    {
        ForwardTrace t = net.forward(input);
        ClassScores z = class_scores(t.head, C, net.spec.headFeatures);
        std::vector<double> gradZ;
        multilabel_loss(z, labels, &gradZ);
        Tensor headGrad(t.head.shape);
        const int hw = t.head.shape[2] * t.head.shape[3];
        for (int c = 0; c < C; ++c)
            for (int d = 0; d < net.spec.headFeatures; ++d) {
                double* base =
                    headGrad.data.data() + static_cast<std::size_t>(c * net.spec.headFeatures + d) * hw;
                for (int i = 0; i < hw; ++i) base[i] = gradZ[static_cast<std::size_t>(c)];
            }
        net.backward(t, headGrad);
    }
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (auto* p : net.params()) {
        Tensor* tensors[2] = {&p->kernel, &p->bias};
        Tensor* grads[2] = {&p->kernelGrad, &p->biasGrad};
        for (int t = 0; t < 2; ++t) {
            std::size_t n = tensors[t]->size();
            int samples = std::min<std::size_t>(static_cast<std::size_t>(samplesPerTensor), n);
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (int s = 0; s < samples; ++s) {
                std::size_t i = pick(rng);
                double saved = tensors[t]->data[i];
                tensors[t]->data[i] = saved + epsilon;
                double up = lossOf();
                tensors[t]->data[i] = saved - epsilon;
                double down = lossOf();
                tensors[t]->data[i] = saved;
                double numeric = (up - down) / (2 * epsilon);
                double analytic = grads[t]->data[i];
                double denom = std::max({std::abs(numeric), std::abs(analytic), 1.0});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    for (auto* p : net.params()) p->zero_grad();
    return worst;
}

}  // namespace msroi
