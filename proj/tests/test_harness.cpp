#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "msroi/benchmark.hpp"
#include "msroi/config.hpp"
#include "msroi/image.hpp"
#include "msroi/synthetic.hpp"

using namespace msroi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& file = "") const {
        return file.empty() ? path.string() : (path / file).string();
    }
};

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << data;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(MSROI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("ppm round-trip") {
    TempDir dir("msroi_ppm_test");
    RgbImage img(5, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(i * 7 % 256);
    save_ppm(dir.str("a.ppm"), img);
    RgbImage back = load_ppm(dir.str("a.ppm"));
    REQUIRE(back.width == 5);
    REQUIRE(back.height == 3);
    REQUIRE(back.pixels == img.pixels);

    SECTION("exact bytes of a tiny hand-written file") {
        std::string data = "P6 2 2 255\n";
        for (int i = 0; i < 12; ++i) data.push_back(static_cast<char>(i * 20));
        spit(dir.str("hand.ppm"), data);
        RgbImage hand = load_ppm(dir.str("hand.ppm"));
        REQUIRE(hand.width == 2);
        REQUIRE(hand.height == 2);
        for (int i = 0; i < 12; ++i) CHECK(hand.pixels[static_cast<std::size_t>(i)] == i * 20);
    }

    SECTION("header comments are skipped") {
        std::string data = "P6\n# a comment\n2 1\n# another\n255\n";
        data.append(6, '\x40');
        spit(dir.str("comment.ppm"), data);
        RgbImage c = load_ppm(dir.str("comment.ppm"));
        CHECK(c.width == 2);
        CHECK(c.at(0, 0, 0) == 0x40);
    }
}

TEST_CASE("pgm round-trip and rounding") {
    TempDir dir("msroi_pgm_test");
    SaliencyMap m(4, 2);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = i / 7.0;
    save_pgm(dir.str("m.pgm"), m);
    SaliencyMap back = load_pgm(dir.str("m.pgm"));
    REQUIRE(back.width == 4);
    REQUIRE(back.height == 2);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        // stored as round-half-up to 8 bits
        double stored = std::floor(m.values[i] * 255.0 + 0.5) / 255.0;
        CHECK(back.values[i] == Catch::Approx(stored).margin(1e-12));
    }

    SECTION("values are clamped to [0,255] on save") {
        SaliencyMap wild(2, 1);
        wild.at(0, 0) = -0.5;
        wild.at(1, 0) = 2.0;
        save_pgm(dir.str("wild.pgm"), wild);
        SaliencyMap b = load_pgm(dir.str("wild.pgm"));
        CHECK(b.at(0, 0) == 0.0);
        CHECK(b.at(1, 0) == 1.0);
    }
}

TEST_CASE("pnm parse errors carry offsets") {
    TempDir dir("msroi_pnm_err_test");

    SECTION("bad magic") {
        spit(dir.str("bad.ppm"), "P5 2 2 255\n    ");
        try {
            load_ppm(dir.str("bad.ppm"));
            FAIL("expected parse error");
        } catch (const PnmParseError& e) {
            CHECK(e.offset == 0);
        }
    }

    SECTION("truncated payload reports end of file") {
        std::string data = "P6 4 4 255\n";
        data.append(10, 'x');  // needs 48 bytes
        spit(dir.str("short.ppm"), data);
        try {
            load_ppm(dir.str("short.ppm"));
            FAIL("expected parse error");
        } catch (const PnmParseError& e) {
            CHECK(e.offset == data.size());
        }
    }

    SECTION("unsupported maxval") {
        spit(dir.str("deep.pgm"), "P5 2 2 65535\n\0\0\0\0\0\0\0\0");
        REQUIRE_THROWS_AS(load_pgm(dir.str("deep.pgm")), PnmParseError);
        REQUIRE_THROWS_WITH(load_pgm(dir.str("deep.pgm")),
                            Catch::Matchers::ContainsSubstring("maxval"));
    }

    SECTION("missing header integer") {
        spit(dir.str("empty.ppm"), "P6");
        REQUIRE_THROWS_AS(load_ppm(dir.str("empty.ppm")), PnmParseError);
    }

    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_ppm(dir.str("nope.ppm")), std::runtime_error);
    }
}

TEST_CASE("config parsing") {
    SECTION("defaults survive an empty config") {
        std::istringstream in("");
        RunConfig cfg = parse_config(in);
        CHECK(cfg.qLow == 30);
        CHECK(cfg.qHigh == 70);
        CHECK(cfg.levels == 5);
        CHECK(cfg.mapMode == "topk");
        CHECK(cfg.tolerance == 0.01);
        CHECK(cfg.baselineQ == 50);
    }

    SECTION("canonical round-trip is a fixed point") {
        std::istringstream in(
            "q_low = 20\nq_high=90 # inline comment\n\nlevels=3\nmap_mode=threshold\n"
            "threshold=1.5\ntolerance=0.02\nseed=42\ndataset=/tmp/d\n");
        RunConfig cfg = parse_config(in);
        CHECK(cfg.qLow == 20);
        CHECK(cfg.qHigh == 90);
        CHECK(cfg.levels == 3);
        CHECK(cfg.mapMode == "threshold");
        CHECK(cfg.threshold == 1.5);
        CHECK(cfg.seed == 42);

        std::string text = canonical_config(cfg);
        std::istringstream in2(text);
        RunConfig cfg2 = parse_config(in2);
        CHECK(canonical_config(cfg2) == text);
    }

    SECTION("unknown keys are rejected with the line number") {
        std::istringstream in("q_low=20\nbogus_key=1\n");
        REQUIRE_THROWS_WITH(parse_config(in), Catch::Matchers::ContainsSubstring("line 2") &&
                                                  Catch::Matchers::ContainsSubstring("bogus_key"));
    }

    SECTION("malformed lines and values are rejected") {
        std::istringstream noEq("q_low 20\n");
        REQUIRE_THROWS_AS(parse_config(noEq), std::invalid_argument);
        std::istringstream badVal("q_low=abc\n");
        REQUIRE_THROWS_AS(parse_config(badVal), std::invalid_argument);
    }

    SECTION("semantic validation") {
        std::istringstream in("q_low=80\nq_high=30\n");
        REQUIRE_THROWS_AS(parse_config(in), std::invalid_argument);
        std::istringstream in2("map_mode=fancy\n");
        REQUIRE_THROWS_AS(parse_config(in2), std::invalid_argument);
    }
}

TEST_CASE("synthetic dataset generation") {
    SyntheticSpec spec;
    spec.count = 40;
    spec.seed = 7;

    SECTION("deterministic for a fixed seed") {
        auto a = make_synthetic_dataset(spec);
        auto b = make_synthetic_dataset(spec);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].image.pixels == b[i].image.pixels);
            REQUIRE(a[i].labels == b[i].labels);
            REQUIRE(a[i].combinedMask.values == b[i].combinedMask.values);
        }
    }

    SECTION("different seeds differ") {
        auto a = make_synthetic_dataset(spec);
        SyntheticSpec other = spec;
        other.seed = 8;
        auto b = make_synthetic_dataset(other);
        CHECK(a[0].image.pixels != b[0].image.pixels);
    }

    SECTION("category histogram is balanced") {
        SyntheticSpec big = spec;
        big.count = 300;
        auto data = make_synthetic_dataset(big);
        std::map<int, int> hist;
        int total = 0;
        for (const auto& s : data)
            for (int l : s.labels) {
                ++hist[l];
                ++total;
            }
        REQUIRE(hist.size() == 6);
        double expect = total / 6.0;
        for (auto [label, n] : hist) {
            CHECK(n > expect * 0.9);
            CHECK(n < expect * 1.1);
        }
    }

    SECTION("masks align with object pixels and stay binary") {
        auto data = make_synthetic_dataset(spec);
        for (const auto& s : data) {
            REQUIRE(s.objectMasks.size() == s.labels.size());
            REQUIRE(!s.labels.empty());
            for (double v : s.combinedMask.values) REQUIRE((v == 0.0 || v == 1.0));
            // union of per-object masks equals the combined mask
            SaliencyMap u(spec.width, spec.height, 0.0);
            for (const auto& m : s.objectMasks)
                for (std::size_t i = 0; i < m.values.size(); ++i)
                    if (m.values[i] > 0) u.values[i] = 1.0;
            REQUIRE(u.values == s.combinedMask.values);
        }
    }

    SECTION("object masks are disjoint") {
        auto data = make_synthetic_dataset(spec);
        for (const auto& s : data) {
            if (s.objectMasks.size() < 2) continue;
            for (std::size_t a = 0; a < s.objectMasks.size(); ++a)
                for (std::size_t b = a + 1; b < s.objectMasks.size(); ++b)
                    for (std::size_t i = 0; i < s.objectMasks[a].values.size(); ++i)
                        REQUIRE(s.objectMasks[a].values[i] * s.objectMasks[b].values[i] == 0.0);
        }
    }

    SECTION("save writes images, masks and labels; reload matches") {
        TempDir dir("msroi_synth_save_test");
        SyntheticSpec tiny = spec;
        tiny.count = 3;
        auto data = make_synthetic_dataset(tiny);
        save_synthetic_dataset(data, dir.str());
        for (int i = 0; i < 3; ++i) {
            char name[16];
            std::snprintf(name, sizeof(name), "img_%04d", i);
            RgbImage img = load_ppm(dir.str(std::string(name) + ".ppm"));
            REQUIRE(img.pixels == data[static_cast<std::size_t>(i)].image.pixels);
            SaliencyMap mask = load_pgm(dir.str(std::string(name) + "_mask.pgm"));
            REQUIRE(mask.values == data[static_cast<std::size_t>(i)].combinedMask.values);
        }
        std::ifstream labels(dir.str("img_labels.txt"));
        REQUIRE(labels.good());
        int lines = 0;
        std::string line;
        while (std::getline(labels, line)) ++lines;
        CHECK(lines == 3);
    }

    SECTION("bad specs rejected") {
        SyntheticSpec bad = spec;
        bad.categories = 7;
        REQUIRE_THROWS_AS(make_synthetic_dataset(bad), std::invalid_argument);
        bad = spec;
        bad.minObjects = 0;
        REQUIRE_THROWS_AS(make_synthetic_dataset(bad), std::invalid_argument);
    }
}

TEST_CASE("benchmark runner") {
    SyntheticSpec spec;
    spec.count = 3;
    spec.width = 64;
    spec.height = 64;
    spec.seed = 11;
    auto data = make_synthetic_dataset(spec);
    std::vector<BenchmarkItem> items;
    for (std::size_t i = 0; i < data.size(); ++i)
        items.push_back({"img" + std::to_string(i), data[i].image, data[i].combinedMask});
    RunConfig cfg;
    cfg.tolerance = 0.05;

    SECTION("csv layout and reproducibility") {
        auto r1 = run_benchmark(items, cfg);
        auto r2 = run_benchmark(items, cfg);
        REQUIRE(r1.csv == r2.csv);
        std::istringstream in(r1.csv);
        std::string line;
        std::getline(in, line);
        CHECK(line == csv_header());
        int rows = 0;
        while (std::getline(in, line)) {
            REQUIRE(line.find("failed") == std::string::npos);
            ++rows;
        }
        CHECK(rows == 6);  // two rows per image
        CHECK(r1.summary.images == 3);
        CHECK(r1.summary.failures == 0);
        CHECK(r1.csv.find("img0.std,") != std::string::npos);
        CHECK(r1.csv.find("img0.ours,") != std::string::npos);
    }

    SECTION("failures become comment lines and the run continues") {
        std::vector<BenchmarkItem> mixed = items;
        BenchmarkItem bad;
        bad.id = "broken";
        bad.image = RgbImage(64, 64);
        bad.map = SaliencyMap(32, 32);  // dimension mismatch
        mixed.insert(mixed.begin() + 1, bad);
        auto r = run_benchmark(mixed, cfg);
        CHECK(r.summary.images == 3);
        CHECK(r.summary.failures == 1);
        CHECK(r.csv.find("# broken failed:") != std::string::npos);
    }

    SECTION("sweep rescales and evaluates each width") {
        auto r = run_sweep(data[0].image, data[0].combinedMask, {32, 48}, cfg);
        CHECK(r.summary.images == 2);
        CHECK(r.csv.find("w32.std,") != std::string::npos);
        CHECK(r.csv.find("w48.ours,") != std::string::npos);
    }
}

TEST_CASE("bilinear resize") {
    SECTION("identity at the same size") {
        RgbImage img(6, 4);
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            img.pixels[i] = static_cast<std::uint8_t>(i % 251);
        RgbImage out = resize_image(img, 6, 4);
        REQUIRE(out.pixels == img.pixels);
    }

    SECTION("corner alignment on a 2x upscale") {
        RgbImage img(2, 2);
        img.at(0, 0, 0) = 0;
        img.at(1, 0, 0) = 90;
        img.at(0, 1, 0) = 0;
        img.at(1, 1, 0) = 90;
        RgbImage out = resize_image(img, 4, 4);
        CHECK(out.at(0, 0, 0) == 0);
        CHECK(out.at(3, 0, 0) == 90);
        CHECK(out.at(1, 0, 0) == 30);
        CHECK(out.at(2, 0, 0) == 60);
    }
}

TEST_CASE("command line interface") {
    TempDir dir("msroi_cli_test");

    SECTION("dataset + compress + evaluate pipeline") {
        REQUIRE(run_cli("dataset --out " + dir.str("data") + " --count 2 --size 64x64 --seed 3") == 0);
        REQUIRE(fs::exists(dir.str("data") + "/img_0000.ppm"));
        REQUIRE(fs::exists(dir.str("data") + "/img_0000_mask.pgm"));
        REQUIRE(fs::exists(dir.str("data") + "/img_labels.txt"));

        std::string img = dir.str("data") + "/img_0000.ppm";
        std::string mask = dir.str("data") + "/img_0000_mask.pgm";

        REQUIRE(run_cli("compress --in " + img + " --map " + mask + " --out " + dir.str("out.jpg") +
                        " --ql 30 --qh 70 --levels 5 --tolerance 0.05") == 0);
        REQUIRE(fs::exists(dir.str("out.jpg")));
        auto jpeg = slurp(dir.str("out.jpg"));
        REQUIRE(jpeg.size() > 4);
        CHECK(jpeg[0] == 0xff);
        CHECK(jpeg[1] == 0xd8);

        REQUIRE(run_cli("evaluate --in " + img + " --map " + mask + " --out " + dir.str("r.csv") +
                        " --tolerance 0.05") == 0);
        auto csv = slurp(dir.str("r.csv"));
        std::string text(csv.begin(), csv.end());
        CHECK(text.rfind("id,bytes,psnr,psnr_s,ssim,msssim", 0) == 0);
    }

    SECTION("size target and deterministic compress output") {
        REQUIRE(run_cli("dataset --out " + dir.str("d2") + " --count 1 --size 64x64 --seed 9") == 0);
        std::string img = dir.str("d2") + "/img_0000.ppm";
        std::string mask = dir.str("d2") + "/img_0000_mask.pgm";
        std::string args = "compress --in " + img + " --map " + mask + " --size-target 2000 --tolerance 0.2";
        REQUIRE(run_cli(args + " --out " + dir.str("a.jpg")) == 0);
        REQUIRE(run_cli(args + " --out " + dir.str("b.jpg")) == 0);
        CHECK(slurp(dir.str("a.jpg")) == slurp(dir.str("b.jpg")));
    }

    SECTION("missed size target exits nonzero") {
        REQUIRE(run_cli("dataset --out " + dir.str("d3") + " --count 1 --size 64x64 --seed 2") == 0);
        std::string img = dir.str("d3") + "/img_0000.ppm";
        std::string mask = dir.str("d3") + "/img_0000_mask.pgm";
        CHECK(run_cli("compress --in " + img + " --map " + mask + " --out " + dir.str("t.jpg") +
                      " --size-target 20 --tolerance 0.01") == 1);
    }

    SECTION("bad inputs exit nonzero") {
        CHECK(run_cli("compress --in missing.ppm --map missing.pgm --out x.jpg") != 0);
        CHECK(run_cli("definitely-not-a-subcommand") != 0);
    }
}
