// End-to-end acceptance checks. Each check prints one PASS/FAIL line;
// the process exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "msroi/msroi.hpp"

#if MSROI_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#endif

using namespace msroi;

namespace {

double now_seconds() {
    static const auto start = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Grow the mask by a Chebyshev dilation, then smooth with a box blur.
// Mirrors the diffuse falloff of network-predicted maps so block-boundary
// pixels of a salient object are not assigned background quality.
SaliencyMap soften(const SaliencyMap& m, int r) {
    SaliencyMap d(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            double mx = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    int xx = std::clamp(x + dx, 0, m.width - 1);
                    int yy = std::clamp(y + dy, 0, m.height - 1);
                    mx = std::max(mx, m.at(xx, yy));
                }
            d.at(x, y) = mx;
        }
    SaliencyMap out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            double s = 0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx)
                    s += d.at(std::clamp(x + dx, 0, m.width - 1),
                              std::clamp(y + dy, 0, m.height - 1));
            out.at(x, y) = s / 25.0;
        }
    return out;
}

// Benchmark corpus: 24 synthetic images with one textured object each,
// driven by softened ground-truth masks. Shared by several checks.
std::vector<BenchmarkItem> make_corpus() {
    SyntheticSpec spec;
    spec.width = 768;
    spec.height = 512;
    spec.count = 24;
    spec.seed = 101;
    spec.minObjects = 1;
    spec.maxObjects = 1;
    spec.minRadiusFrac = 0.18;
    spec.maxRadiusFrac = 0.24;
    spec.backgroundNoise = 0.08;
    spec.objectTexture = 0.35;
    auto data = make_synthetic_dataset(spec);
    std::vector<BenchmarkItem> items;
    for (std::size_t i = 0; i < data.size(); ++i) {
        BenchmarkItem item;
        item.id = "img" + std::to_string(i);
        item.image = std::move(data[i].image);
        item.map = soften(data[i].combinedMask, 6);
        items.push_back(std::move(item));
    }
    return items;
}

RunConfig corpus_config() {
    RunConfig cfg;
    cfg.qLow = 18;
    cfg.qHigh = 100;
    cfg.levels = 2;
    cfg.tolerance = 0.01;
    cfg.baselineQ = 50;
    cfg.psnrSCutoff = 0.5;
    return cfg;
}

bool report(int n, const char* name, bool ok, const std::string& detail) {
    std::printf("criterion %2d %-28s %s  (%s)\n", n, name, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    return ok;
}

// ---- 1: every emitted stream decodes in an independent reference decoder
bool check_interop(const BenchmarkResult& bench) {
#if MSROI_HAVE_OPENCV
    long long total = 0, close = 0;
    int streams = 0, decoded = 0;
    auto probe = [&](const JpegStream& s) {
        ++streams;
        cv::Mat raw(1, static_cast<int>(s.bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(s.bytes.data()));
        cv::Mat ref = cv::imdecode(raw, cv::IMREAD_COLOR);
        if (ref.empty()) return;
        RgbImage ours = jpeg_decode(s);
        if (ref.cols != ours.width || ref.rows != ours.height) return;
        ++decoded;
        for (int y = 0; y < ours.height; ++y)
            for (int x = 0; x < ours.width; ++x) {
                const cv::Vec3b& bgr = ref.at<cv::Vec3b>(y, x);
                for (int c = 0; c < 3; ++c) {
                    int diff = std::abs(static_cast<int>(ours.at(x, y, c)) -
                                        static_cast<int>(bgr[2 - c]));
                    ++total;
                    if (diff <= 1) ++close;
                }
            }
    };
    for (const auto& p : bench.pairs) {
        probe(p.baselineStream);
        probe(p.semanticStream);
    }
    double frac = total ? static_cast<double>(close) / static_cast<double>(total) : 0.0;
    bool ok = streams > 0 && decoded == streams && frac >= 0.999;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d/%d streams decoded, %.4f%% samples within 1", decoded,
                  streams, 100.0 * frac);
    return report(1, "reference decoder interop", ok, buf);
#else
    return report(1, "reference decoder interop", false, "no reference decoder available");
#endif
}

// ---- 2: semantic stream within 1% of the baseline size or flagged
bool check_size_matching(const BenchmarkResult& bench) {
    int violations = 0;
    for (const auto& p : bench.pairs) {
        double target = static_cast<double>(p.baselineStream.bytes.size());
        double diff = std::abs(static_cast<double>(p.semanticStream.bytes.size()) - target);
        bool within = diff <= 0.01 * target;
        if (within != p.withinTolerance) ++violations;
    }
    const auto& s = bench.summary;
    bool ok = s.failures == 0 && violations == 0 &&
              s.flagged <= static_cast<int>(0.05 * s.images);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d/%d flagged, %d mislabeled, %d failures", s.flagged,
                  s.images, violations, s.failures);
    return report(2, "size matching", ok, buf);
}

// ---- 3: salient-region quality gain at matched size
bool check_quality_gain(const BenchmarkResult& bench, double seconds) {
    const auto& s = bench.summary;
    double dPsnr = s.meanPsnrOurs - s.meanPsnrStd;
    double dPsnrS = s.meanPsnrSOurs - s.meanPsnrSStd;
    bool ok = dPsnrS >= 2.0 && dPsnr >= -0.5 && seconds < 600.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "dPSNR_S=%+.3f dB, dPSNR=%+.3f dB, %.0f s", dPsnrS, dPsnr,
                  seconds);
    return report(3, "salient quality gain", ok, buf);
}

// ---- 4: constant maps collapse to a single quality
bool check_degenerate_maps(const RgbImage& image) {
    QualityLadder ladder(30, 70, 5);
    auto run = [&](double fill, int q, bool& pixelsEqual, double& pathPsnr) {
        SaliencyMap map(image.width, image.height, fill);
        RgbImage directDec = jpeg_decode(jpeg_encode(image, q));
        // target the collapsed rung's own size so the final encode is
        // pinned to that rung rather than drifting within the window
        std::size_t target = jpeg_encode(directDec, q).bytes.size();
        SemanticResult r = semantic_compress(image, map, ladder, target, 0.0005);
        pixelsEqual = r.mosaic.pixels == directDec.pixels;
        pathPsnr = psnr(jpeg_decode(r.stream), directDec);
    };
    bool eqHigh = false, eqLow = false;
    double psnrHigh = 0, psnrLow = 0;
    run(1.0, 70, eqHigh, psnrHigh);
    run(0.0, 30, eqLow, psnrLow);
    bool ok = eqHigh && eqLow && psnrHigh > 45.0 && psnrLow > 45.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "mosaic==roundtrip %d/%d, path PSNR %.1f / %.1f dB", eqHigh,
                  eqLow, psnrHigh, psnrLow);
    return report(4, "constant-map collapse", ok, buf);
}

// ---- 5: ladder values
bool check_ladder() {
    QualityLadder ladder(30, 70, 5);
    std::vector<int> got;
    for (int n = 0; n < ladder.levels; ++n) got.push_back(quality_for_level(ladder, n));
    bool ok = got == std::vector<int>{30, 40, 50, 60, 70};
    std::string detail;
    for (int q : got) detail += std::to_string(q) + " ";
    return report(5, "quality ladder values", ok, detail);
}

// ---- 6: analytic gradients match finite differences on the full network
bool check_gradcheck() {
    double t0 = now_seconds();
    SyntheticSpec spec;
    spec.width = 32;
    spec.height = 32;
    spec.count = 1;
    spec.seed = 5;
    auto data = make_synthetic_dataset(spec);
    MsroiNetwork net{NetworkSpec{}};
    net.init(1);
    double worst = gradcheck(net, image_to_tensor(data[0].image), {0, 2}, 1e-5, 8, 17);
    double dt = now_seconds() - t0;
    bool ok = worst < 1e-4 && dt < 120.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "max rel err %.3g, %.1f s", worst, dt);
    return report(6, "gradient check", ok, buf);
}

// ---- 7: both objects highlighted at factor 2 over background,
//         more often than the single-class activation baseline
bool check_localization() {
    SyntheticSpec tr;
    tr.width = 64;
    tr.height = 64;
    tr.count = 240;
    tr.seed = 7;
    tr.categories = 3;
    tr.minObjects = 1;
    tr.maxObjects = 2;
    tr.minRadiusFrac = 0.15;
    tr.maxRadiusFrac = 0.30;
    auto trainData = make_synthetic_dataset(tr);
    std::vector<LabeledImage> labeled;
    for (auto& s : trainData) labeled.push_back({image_to_tensor(s.image), s.labels});

    // Placement can drop the second object on a crowded canvas; generate
    // extra and keep the first 50 genuine two-object images.
    SyntheticSpec ev = tr;
    ev.count = 70;
    ev.seed = 1234;
    ev.minObjects = 2;
    ev.maxObjects = 2;
    std::vector<SyntheticImage> evalData;
    for (auto& s : make_synthetic_dataset(ev)) {
        if (s.objectMasks.size() == 2) evalData.push_back(std::move(s));
        if (evalData.size() == 50) break;
    }

    NetworkSpec spec;
    spec.blockCount = 3;
    spec.convsPerBlock = 1;
    spec.featureCounts = {8, 16, 32};
    spec.categoryCount = 3;
    auto merge = ClassMergeTable::identity(3);

    MsroiNetwork msroi(spec);
    train_msroi(msroi, labeled, merge, 60, 5e-4, 42);
    CamNetwork cam(spec);
    train_cam(cam, labeled, merge, 60, 0.01, 42);

    auto passes = [](const SaliencyMap& map, const SyntheticImage& s) {
        double bgSum = 0;
        long bgN = 0;
        for (int y = 0; y < map.height; ++y)
            for (int x = 0; x < map.width; ++x)
                if (s.combinedMask.at(x, y) < 0.5) {
                    bgSum += map.at(x, y);
                    ++bgN;
                }
        double bgMean = bgN ? bgSum / bgN : 0.0;
        for (const auto& m : s.objectMasks) {
            double oSum = 0;
            long oN = 0;
            for (int y = 0; y < map.height; ++y)
                for (int x = 0; x < map.width; ++x)
                    if (m.at(x, y) >= 0.5) {
                        oSum += map.at(x, y);
                        ++oN;
                    }
            if (!oN || oSum / oN < 2.0 * bgMean) return false;
        }
        return true;
    };

    MapOptions opts;
    opts.mode = MapMode::Threshold;
    opts.threshold = 0.0;
    int okMulti = 0, okCam = 0, evaluated = 0;
    for (const auto& s : evalData) {
        if (s.objectMasks.size() != 2) continue;
        ++evaluated;
        if (passes(infer_saliency(msroi, s.image, opts), s)) ++okMulti;
        auto t = cam.forward(image_to_tensor(s.image));
        int argmax = static_cast<int>(
            std::max_element(t.scores.begin(), t.scores.end()) - t.scores.begin());
        SaliencyMap cm =
            upsample_map(cam_map(t.feat, cam.clsW, argmax), s.image.width, s.image.height);
        if (passes(cm, s)) ++okCam;
    }
    bool ok = evaluated == 50 && okMulti >= 40 && okMulti > okCam;
    char buf[128];
    std::snprintf(buf, sizeof buf, "multi-structure %d/%d, single-class baseline %d/%d", okMulti,
                  evaluated, okCam, evaluated);
    return report(7, "two-object localization", ok, buf);
}

// ---- 8: score and map functions match brute-force oracles
bool check_oracles() {
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> gauss(0.1, 1.0);
    std::uniform_int_distribution<int> dim(1, 5);
    const int C = 6, D = 4;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int h = dim(rng), w = dim(rng);
        Tensor head({1, C * D, h, w});
        for (double& v : head.data) v = gauss(rng);
        const int hw = h * w;

        // oracle: plain summation over each category's feature stack
        std::vector<double> zOracle(C, 0.0);
        for (int c = 0; c < C; ++c)
            for (int d = 0; d < D; ++d)
                for (int i = 0; i < hw; ++i)
                    zOracle[c] += head.data[static_cast<std::size_t>((c * D + d) * hw + i)];
        ClassScores z = class_scores(head, C, D);
        for (int c = 0; c < C; ++c) worst = std::max(worst, std::abs(z.z[c] - zOracle[c]));

        MapOptions opts;
        std::vector<double> weight(C, 0.0);
        if (trial % 2 == 0) {
            opts.mode = MapMode::Threshold;
            opts.threshold = zOracle[trial % C];
            for (int c = 0; c < C; ++c)
                if (zOracle[c] > opts.threshold) weight[c] = 1.0;
        } else {
            opts.mode = MapMode::TopK;
            opts.topK = 1 + trial % C;
            std::vector<int> order(C);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return zOracle[a] > zOracle[b]; });
            for (int r = 1; r <= opts.topK; ++r)
                weight[order[static_cast<std::size_t>(r - 1)]] =
                    static_cast<double>(opts.topK + 1 - r) / opts.topK;
        }
        std::vector<double> raw(static_cast<std::size_t>(hw), 0.0);
        for (int c = 0; c < C; ++c)
            for (int d = 0; d < D; ++d)
                for (int i = 0; i < hw; ++i)
                    raw[static_cast<std::size_t>(i)] +=
                        weight[c] * head.data[static_cast<std::size_t>((c * D + d) * hw + i)];
        double mx = 0.0;
        for (double& v : raw) {
            if (v < 0) v = 0;
            mx = std::max(mx, v);
        }
        if (mx > 0)
            for (double& v : raw) v /= mx;
        SaliencyMap map = msroi_map(head, z, C, D, opts);
        for (int i = 0; i < hw; ++i)
            worst = std::max(worst,
                             std::abs(map.values[static_cast<std::size_t>(i)] -
                                      raw[static_cast<std::size_t>(i)]));
    }
    bool ok = worst < 1e-10;
    char buf[64];
    std::snprintf(buf, sizeof buf, "max abs diff %.3g over 100 heads", worst);
    return report(8, "score and map oracles", ok, buf);
}

// ---- 9: metric identities and monotonic quality response
bool check_metric_sanity(const std::vector<BenchmarkItem>& corpus) {
    const RgbImage& a = corpus[0].image;
    bool ssimOne = std::abs(ssim(a, a) - 1.0) <= 1e-12;
    bool psnrInf = std::isinf(psnr(a, a));

    RgbImage degraded = jpeg_decode(jpeg_encode(a, 40));
    SaliencyMap ones(a.width, a.height, 1.0);
    bool psnrSMatches = std::abs(psnr_s(a, degraded, ones, 0.5) - psnr(a, degraded)) <= 1e-12;

    int nonMonotone = 0;
    QualityLadder ladder(30, 70, 5);
    for (const auto& item : corpus) {
        double prev = -1.0;
        for (int n = 0; n < ladder.levels; ++n) {
            int q = quality_for_level(ladder, n);
            double v = ms_ssim(item.image, jpeg_decode(jpeg_encode(item.image, q)));
            if (v < prev) ++nonMonotone;
            prev = v;
        }
    }
    bool ok = ssimOne && psnrInf && psnrSMatches && nonMonotone == 0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "ssim(a,a)=1:%d, psnr inf:%d, psnr_s(full map)=psnr:%d, monotone misses:%d",
                  ssimOne, psnrInf, psnrSMatches, nonMonotone);
    return report(9, "metric sanity", ok, buf);
}

// ---- 10: identical configuration and seed reproduce byte-identical output
bool check_reproducibility(const BenchmarkResult& first) {
    auto items = make_corpus();  // regenerated from the same seed
    BenchmarkResult second = run_benchmark(items, corpus_config(), true);
    bool csvSame = first.csv == second.csv;
    bool streamsSame = first.pairs.size() == second.pairs.size();
    for (std::size_t i = 0; streamsSame && i < first.pairs.size(); ++i)
        streamsSame = first.pairs[i].baselineStream.bytes == second.pairs[i].baselineStream.bytes &&
                      first.pairs[i].semanticStream.bytes == second.pairs[i].semanticStream.bytes;
    bool ok = csvSame && streamsSame;
    char buf[64];
    std::snprintf(buf, sizeof buf, "csv identical:%d, streams identical:%d", csvSame, streamsSame);
    return report(10, "reproducibility", ok, buf);
}

}  // namespace

int main() {
    bool allOk = true;

    auto corpus = make_corpus();
    double t0 = now_seconds();
    BenchmarkResult bench = run_benchmark(corpus, corpus_config(), true);
    double benchSeconds = now_seconds() - t0;

    allOk &= check_interop(bench);
    allOk &= check_size_matching(bench);
    allOk &= check_quality_gain(bench, benchSeconds);
    allOk &= check_degenerate_maps(corpus[0].image);
    allOk &= check_ladder();
    allOk &= check_gradcheck();
    allOk &= check_localization();
    allOk &= check_oracles();
    allOk &= check_metric_sanity(corpus);
    allOk &= check_reproducibility(bench);

    std::printf("%s\n", allOk ? "ALL CRITERIA PASSED" : "CRITERIA FAILED");
    return allOk ? 0 : 1;
}
