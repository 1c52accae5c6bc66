// Command line front end.
//
//   msroi dataset  --out DIR [--count N --size WxH ...]      synthetic shapes
//   msroi train    --dataset DIR --out model.ckpt [...]      train the saliency net
//   msroi map      --model model.ckpt --in img.ppm --out map.pgm
//   msroi compress --in img.ppm --out img.jpg (--map map.pgm | --model ckpt) [...]
//   msroi evaluate --in img.ppm --map map.pgm --out report.csv [...]
//   msroi sweep    --in img.ppm --map map.pgm --widths 256,384,512 --out report.csv

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "msroi/msroi.hpp"

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << text;
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename to " + path + " failed");
}

void write_stream(const std::string& path, const msroi::JpegStream& s) {
    msroi::detail::write_file_bytes(path, s.bytes.data(), s.bytes.size());
}

std::vector<msroi::LabeledImage> load_dataset_dir(const std::string& dir, const std::string& prefix,
                                                  int maxImages = -1) {
    std::string labelsPath = dir + "/" + prefix + "_labels.txt";
    std::ifstream labels(labelsPath);
    if (!labels) throw std::runtime_error("cannot open " + labelsPath);
    std::vector<msroi::LabeledImage> data;
    std::string line;
    while (std::getline(labels, line)) {
        std::istringstream ss(line);
        int index;
        if (!(ss >> index)) continue;
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%04d.ppm", prefix.c_str(), index);
        msroi::LabeledImage sample;
        sample.image = msroi::image_to_tensor(msroi::load_ppm(dir + "/" + name));
        int label;
        while (ss >> label) sample.labels.push_back(label);
        data.push_back(std::move(sample));
        if (maxImages > 0 && static_cast<int>(data.size()) >= maxImages) break;
    }
    if (data.empty()) throw std::runtime_error("no images listed in " + labelsPath);
    return data;
}

msroi::RunConfig make_config(const std::string& configPath) {
    return configPath.empty() ? msroi::RunConfig{} : msroi::load_config(configPath);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saliency-guided JPEG compression"};
    app.require_subcommand(1);

    std::string configPath, inPath, outPath, mapPath, modelPath, datasetDir;
    int ql = -1, qh = -1, levels = -1;
    double tolerance = -1;
    long sizeTarget = 0;
    int baselineQ = -1;

    auto add_ladder_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", configPath, "key=value config file");
        cmd->add_option("--ql", ql, "lowest ladder quality");
        cmd->add_option("--qh", qh, "highest ladder quality");
        cmd->add_option("--levels", levels, "saliency level count");
        cmd->add_option("--tolerance", tolerance, "size-match tolerance (fraction)");
    };
    auto apply_overrides = [&](msroi::RunConfig& cfg) {
        if (ql > 0) cfg.qLow = ql;
        if (qh > 0) cfg.qHigh = qh;
        if (levels > 0) cfg.levels = levels;
        if (tolerance >= 0) cfg.tolerance = tolerance;
        if (baselineQ > 0) cfg.baselineQ = baselineQ;
        cfg.validate();
    };

    // dataset
    auto* dataset = app.add_subcommand("dataset", "generate a synthetic shape dataset");
    msroi::SyntheticSpec synthSpec;
    std::string sizeStr = "64x64";
    dataset->add_option("--out", datasetDir, "output directory")->required();
    dataset->add_option("--count", synthSpec.count, "number of images");
    dataset->add_option("--size", sizeStr, "canvas WxH");
    dataset->add_option("--categories", synthSpec.categories, "category count (1..6)");
    dataset->add_option("--min-objects", synthSpec.minObjects, "min objects per image");
    dataset->add_option("--max-objects", synthSpec.maxObjects, "max objects per image");
    dataset->add_option("--noise", synthSpec.backgroundNoise, "background texture amplitude");
    dataset->add_option("--seed", synthSpec.seed, "generator seed");

    // train
    auto* train = app.add_subcommand("train", "train the saliency network");
    int epochs = 10;
    double lr = 0.01;
    std::uint64_t trainSeed = 1;
    std::string mergePath;
    train->add_option("--dataset", datasetDir, "dataset directory (from 'dataset')")->required();
    train->add_option("--out", outPath, "checkpoint output path")->required();
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--seed", trainSeed, "init/shuffle seed");
    train->add_option("--merge-table", mergePath, "label merge table (default: identity)");
    train->add_option("--categories", synthSpec.categories, "category count");

    // map
    auto* mapCmd = app.add_subcommand("map", "emit a PGM saliency map for an image");
    mapCmd->add_option("--model", modelPath, "checkpoint path")->required();
    mapCmd->add_option("--in", inPath, "input PPM image")->required();
    mapCmd->add_option("--out", outPath, "output PGM map")->required();
    int topK = -1;
    double threshold = 0.0;
    bool useThreshold = false;
    mapCmd->add_option("--topk", topK, "top-K categories (rank weighted)");
    mapCmd->add_option("--threshold", threshold, "score threshold (switches to threshold mode)")
        ->each([&](const std::string&) { useThreshold = true; });

    // compress
    auto* compress = app.add_subcommand("compress", "saliency-guided JPEG compression");
    compress->add_option("--in", inPath, "input PPM image")->required();
    compress->add_option("--out", outPath, "output JPEG path")->required();
    compress->add_option("--map", mapPath, "PGM saliency map (bypasses the network)");
    compress->add_option("--model", modelPath, "checkpoint for on-the-fly maps");
    compress->add_option("--size-target", sizeTarget, "target size in bytes (default: baseline-Q size)");
    compress->add_option("--baseline-q", baselineQ, "baseline quality for the size target");
    add_ladder_flags(compress);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "compare against a size-matched standard JPEG");
    evaluate->add_option("--in", inPath, "input PPM image")->required();
    evaluate->add_option("--map", mapPath, "PGM saliency map")->required();
    evaluate->add_option("--out", outPath, "CSV report path")->required();
    evaluate->add_option("--baseline-q", baselineQ, "baseline quality");
    add_ladder_flags(evaluate);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "metric deltas across rescaled sizes");
    std::string widthsStr = "128,192,256,384";
    sweep->add_option("--in", inPath, "input PPM image")->required();
    sweep->add_option("--map", mapPath, "PGM saliency map")->required();
    sweep->add_option("--out", outPath, "CSV report path")->required();
    sweep->add_option("--widths", widthsStr, "comma-separated target widths");
    sweep->add_option("--baseline-q", baselineQ, "baseline quality");
    add_ladder_flags(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*dataset) {
            int w, h;
            if (std::sscanf(sizeStr.c_str(), "%dx%d", &w, &h) != 2)
                throw std::invalid_argument("--size must be WxH");
            synthSpec.width = w;
            synthSpec.height = h;
            std::filesystem::create_directories(datasetDir);
            auto data = msroi::make_synthetic_dataset(synthSpec);
            msroi::save_synthetic_dataset(data, datasetDir);
            std::cout << "wrote " << data.size() << " images to " << datasetDir << "\n";
        } else if (*train) {
            auto data = load_dataset_dir(datasetDir, "img");
            msroi::ClassMergeTable merge = mergePath.empty()
                                               ? msroi::ClassMergeTable::identity(synthSpec.categories)
                                               : msroi::ClassMergeTable::load(mergePath);
            msroi::NetworkSpec spec;
            spec.categoryCount = merge.category_count();
            msroi::MsroiNetwork net(spec);
            auto report = msroi::train_msroi(net, data, merge, epochs, lr, trainSeed);
            net.save(outPath);
            for (std::size_t e = 0; e < report.epochLoss.size(); ++e)
                std::cout << "epoch " << e << " loss " << report.epochLoss[e] << " acc "
                          << report.epochAccuracy[e] << "\n";
            if (report.skippedSteps)
                std::cout << "skipped " << report.skippedSteps << " non-finite steps\n";
        } else if (*mapCmd) {
            msroi::MsroiNetwork net;
            net.load(modelPath);
            msroi::RgbImage img = msroi::load_ppm(inPath);
            msroi::MapOptions opts;
            if (useThreshold) {
                opts.mode = msroi::MapMode::Threshold;
                opts.threshold = threshold;
            } else if (topK > 0) {
                opts.topK = topK;
            }
            msroi::save_pgm(outPath, msroi::infer_saliency(net, img, opts));
        } else if (*compress) {
            msroi::RunConfig cfg = make_config(configPath);
            apply_overrides(cfg);
            msroi::RgbImage img = msroi::load_ppm(inPath);
            msroi::SaliencyMap map;
            if (!mapPath.empty()) {
                map = msroi::load_pgm(mapPath);
            } else if (!modelPath.empty()) {
                msroi::MsroiNetwork net;
                net.load(modelPath);
                map = msroi::infer_saliency(net, img);
            } else {
                throw std::invalid_argument("compress needs --map or --model");
            }
            std::size_t target = sizeTarget > 0
                                     ? static_cast<std::size_t>(sizeTarget)
                                     : msroi::jpeg_encode(img, cfg.baselineQ).bytes.size();
            msroi::QualityLadder ladder(cfg.qLow, cfg.qHigh, cfg.levels);
            auto result = msroi::semantic_compress(img, map, ladder, target, cfg.tolerance);
            write_stream(outPath, result.stream);
            std::cout << "wrote " << result.stream.bytes.size() << " bytes at Q" << result.finalQuality
                      << (result.withinTolerance ? "" : " (size target missed)") << "\n";
            if (!result.withinTolerance) return 1;
        } else if (*evaluate) {
            msroi::RunConfig cfg = make_config(configPath);
            apply_overrides(cfg);
            msroi::RgbImage img = msroi::load_ppm(inPath);
            msroi::SaliencyMap map = msroi::load_pgm(mapPath);
            auto pair = msroi::evaluate_pair(img, map, cfg, inPath);
            std::string csv = msroi::csv_header() + "\n" + msroi::csv_row(pair.baseline) + "\n" +
                              msroi::csv_row(pair.semantic) + "\n";
            write_text_file(outPath, csv);
            std::cout << csv;
        } else if (*sweep) {
            msroi::RunConfig cfg = make_config(configPath);
            apply_overrides(cfg);
            msroi::RgbImage img = msroi::load_ppm(inPath);
            msroi::SaliencyMap map = msroi::load_pgm(mapPath);
            std::vector<int> widths;
            std::stringstream ss(widthsStr);
            std::string tok;
            while (std::getline(ss, tok, ',')) widths.push_back(std::stoi(tok));
            auto result = msroi::run_sweep(img, map, widths, cfg);
            write_text_file(outPath, result.csv);
            std::cout << msroi::summary_text(result.summary);
            if (result.summary.failures) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
