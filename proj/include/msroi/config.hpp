#pragma once

// Line-based key=value run configuration. Unknown keys are rejected and
// a parsed config serializes back to one canonical text form.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace msroi {

struct RunConfig {
    int qLow = 30;
    int qHigh = 70;
    int levels = 5;
    std::string mapMode = "topk";  // "topk" or "threshold"
    int topK = 5;
    double threshold = 0.0;
    double tolerance = 0.01;
    int baselineQ = 50;
    double psnrSCutoff = 0.5;
    std::uint64_t seed = 1;
    std::string dataset;
    std::string outputDir = ".";

    void validate() const {
        if (qLow < 1 || qHigh > 100 || qLow > qHigh)
            throw std::invalid_argument("config: need 1 <= q_low <= q_high <= 100");
        if (levels < 1) throw std::invalid_argument("config: levels must be >= 1");
        if (mapMode != "topk" && mapMode != "threshold")
            throw std::invalid_argument("config: map_mode must be topk or threshold");
        if (tolerance < 0) throw std::invalid_argument("config: tolerance must be >= 0");
        if (baselineQ < 1 || baselineQ > 100)
            throw std::invalid_argument("config: baseline_q must be in [1,100]");
    }
};

namespace configdetail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string canonical_double(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

}  // namespace configdetail

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = configdetail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineNo) + ": expected key=value");
        std::string key = configdetail::trim(line.substr(0, eq));
        std::string value = configdetail::trim(line.substr(eq + 1));
        try {
            if (key == "q_low") cfg.qLow = std::stoi(value);
            else if (key == "q_high") cfg.qHigh = std::stoi(value);
            else if (key == "levels") cfg.levels = std::stoi(value);
            else if (key == "map_mode") cfg.mapMode = value;
            else if (key == "top_k") cfg.topK = std::stoi(value);
            else if (key == "threshold") cfg.threshold = std::stod(value);
            else if (key == "tolerance") cfg.tolerance = std::stod(value);
            else if (key == "baseline_q") cfg.baselineQ = std::stoi(value);
            else if (key == "psnr_s_cutoff") cfg.psnrSCutoff = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "dataset") cfg.dataset = value;
            else if (key == "output_dir") cfg.outputDir = value;
            else
                throw std::invalid_argument("config line " + std::to_string(lineNo) +
                                            ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineNo) + ": bad value for '" +
                                        key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_config(in);
}

inline std::string canonical_config(const RunConfig& cfg) {
    std::ostringstream ss;
    ss << "q_low=" << cfg.qLow << "\n"
       << "q_high=" << cfg.qHigh << "\n"
       << "levels=" << cfg.levels << "\n"
       << "map_mode=" << cfg.mapMode << "\n"
       << "top_k=" << cfg.topK << "\n"
       << "threshold=" << configdetail::canonical_double(cfg.threshold) << "\n"
       << "tolerance=" << configdetail::canonical_double(cfg.tolerance) << "\n"
       << "baseline_q=" << cfg.baselineQ << "\n"
       << "psnr_s_cutoff=" << configdetail::canonical_double(cfg.psnrSCutoff) << "\n"
       << "seed=" << cfg.seed << "\n"
       << "dataset=" << cfg.dataset << "\n"
       << "output_dir=" << cfg.outputDir << "\n";
    return ss.str();
}

}  // namespace msroi
