#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dropcell/brightfield.hpp"
#include "dropcell/fluor.hpp"

namespace dropcell::pipeline {

/// Bad configuration or command-line usage (exit status 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Mode { brightfield, fluorescence, register_frames, calibrate, synth };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::brightfield: return "brightfield";
        case Mode::fluorescence: return "fluorescence";
        case Mode::register_frames: return "register";
        case Mode::calibrate: return "calibrate";
        default: return "synth";
    }
}

struct RoiSource {
    std::string image;
    int x = 0, y = 0, width = 0, height = 0;
};

struct PipelineConfig {
    Mode mode = Mode::brightfield;
    std::vector<std::string> inputs;  // directories and/or files
    std::string output_dir = "out";

    brightfield::SegmentationConfig segmentation;
    std::string background;  // bright-field background frames (file or directory)

    fluor::HsvBand green_band = fluor::default_green_band();
    fluor::HsvBand red_band = fluor::default_red_band();
    std::size_t cell_min_area = 30;
    double match_radius = 15.0;

    std::string stain_basis;         // calibration file, optional
    double interior_fraction = 0.8;  // dye ratios use pixels within this share of the droplet radius

    std::optional<double> pixel_pitch;
    int max_shift = 64;
    double latency_budget_ms = 2000.0;
    bool emit_overlays = false;
    std::optional<bool> register_frames;  // default: on for fluorescence, off otherwise
    unsigned workers = 0;                 // 0 = available parallelism

    std::optional<RoiSource> calibration_background;
    std::vector<std::pair<std::string, RoiSource>> calibration_dyes;

    std::string scene;
    std::size_t synth_frames = 1;
    std::size_t synth_background_frames = 10;

    int poll_ms = 100;
    std::optional<std::size_t> max_frames;
    std::optional<int> idle_timeout_ms;

    bool registration_enabled() const {
        return register_frames.value_or(mode == Mode::fluorescence);
    }

    void validate() const {
        try {
            segmentation.validate();
            green_band.validate();
            red_band.validate();
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
        if (!(latency_budget_ms > 0.0)) throw ConfigError("latency_budget_ms must be > 0");
        if (pixel_pitch && !(*pixel_pitch > 0.0)) throw ConfigError("pixel_pitch must be > 0");
        if (max_shift < 0) throw ConfigError("max_shift must be >= 0");
        if (!(interior_fraction > 0.0 && interior_fraction <= 1.0)) {
            throw ConfigError("interior_fraction must be in (0, 1]");
        }
        if (cell_min_area < 1) throw ConfigError("fluorescence min_area must be >= 1");
        if (poll_ms < 1) throw ConfigError("poll_ms must be >= 1");
    }
};

namespace config_detail {

inline double to_number(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (v.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(where + ": '" + v + "' is not a number");
    }
}

inline bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where + ": expected true or false");
}

inline std::vector<double> to_numbers(const std::string& v, std::size_t n, const std::string& where) {
    std::istringstream is(v);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(to_number(tok, where));
    if (out.size() != n) throw ConfigError(where + ": expected " + std::to_string(n) + " values");
    return out;
}

inline fluor::HsvBand to_band(const std::string& v, const std::string& where) {
    auto n = to_numbers(v, 4, where);
    return {n[0], n[1], n[2], n[3]};
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal().string();
}

inline RoiSource to_roi(const std::string& v, const std::filesystem::path& base, const std::string& where) {
    std::istringstream is(v);
    RoiSource roi;
    std::string image;
    if (!(is >> image)) throw ConfigError(where + ": expected '<image> <x> <y> <width> <height>'");
    std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    auto n = to_numbers(rest, 4, where);
    roi.image = resolve(base, image);
    roi.x = static_cast<int>(n[0]);
    roi.y = static_cast<int>(n[1]);
    roi.width = static_cast<int>(n[2]);
    roi.height = static_cast<int>(n[3]);
    if (roi.width < 1 || roi.height < 1) throw ConfigError(where + ": ROI must be non-empty");
    return roi;
}

}  // namespace config_detail

inline Mode parse_mode(const std::string& v) {
    if (v == "brightfield") return Mode::brightfield;
    if (v == "fluorescence") return Mode::fluorescence;
    if (v == "register") return Mode::register_frames;
    if (v == "calibrate") return Mode::calibrate;
    if (v == "synth") return Mode::synth;
    throw ConfigError("unknown mode '" + v + "'");
}

/// Reads INI configuration. Relative paths resolve against `base_dir`.
/// Every section and key must be known.
inline void apply_config(PipelineConfig& cfg, std::istream& is, const std::filesystem::path& base_dir = {}) {
    namespace pt = boost::property_tree;
    using namespace config_detail;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, node] : body) {
            const std::string v = node.data();
            const std::string where = "[" + section + "] " + key;
            auto unknown = [&] { throw ConfigError("config: unknown key " + where); };
            if (section == "run") {
                if (key == "mode") cfg.mode = parse_mode(v);
                else if (key == "input") cfg.inputs = {resolve(base_dir, v)};
                else if (key == "output_dir") cfg.output_dir = resolve(base_dir, v);
                else if (key == "background") cfg.background = resolve(base_dir, v);
                else if (key == "pixel_pitch") cfg.pixel_pitch = to_number(v, where);
                else if (key == "max_shift") cfg.max_shift = static_cast<int>(to_number(v, where));
                else if (key == "latency_budget_ms") cfg.latency_budget_ms = to_number(v, where);
                else if (key == "emit_overlays") cfg.emit_overlays = to_bool(v, where);
                else if (key == "register") cfg.register_frames = to_bool(v, where);
                else if (key == "workers") cfg.workers = static_cast<unsigned>(to_number(v, where));
                else unknown();
            } else if (section == "segmentation") {
                auto& s = cfg.segmentation;
                if (key == "gaussian_sigma") s.gaussian_sigma = to_number(v, where);
                else if (key == "threshold_mode") {
                    if (v == "otsu") s.threshold_mode = brightfield::ThresholdMode::otsu;
                    else if (v == "fixed") s.threshold_mode = brightfield::ThresholdMode::fixed;
                    else throw ConfigError(where + ": expected otsu or fixed");
                } else if (key == "fixed_threshold") s.fixed_threshold = static_cast<int>(to_number(v, where));
                else if (key == "min_area") s.min_area = static_cast<std::size_t>(to_number(v, where));
                else if (key == "min_circularity") s.min_circularity = to_number(v, where);
                else if (key == "fill_holes") s.fill_holes = to_bool(v, where);
                else if (key == "connectivity") {
                    const double c = to_number(v, where);
                    if (c == 4) s.connectivity = Connectivity::four;
                    else if (c == 8) s.connectivity = Connectivity::eight;
                    else throw ConfigError(where + ": expected 4 or 8");
                } else unknown();
            } else if (section == "fluorescence") {
                if (key == "green_band") cfg.green_band = to_band(v, where);
                else if (key == "red_band") cfg.red_band = to_band(v, where);
                else if (key == "min_area") cfg.cell_min_area = static_cast<std::size_t>(to_number(v, where));
                else if (key == "match_radius") cfg.match_radius = to_number(v, where);
                else unknown();
            } else if (section == "stain") {
                if (key == "basis") cfg.stain_basis = resolve(base_dir, v);
                else if (key == "interior_fraction") cfg.interior_fraction = to_number(v, where);
                else unknown();
            } else if (section == "calibrate") {
                if (key == "background") cfg.calibration_background = to_roi(v, base_dir, where);
                else if (key.rfind("dye:", 0) == 0 && key.size() > 4) {
                    cfg.calibration_dyes.emplace_back(key.substr(4), to_roi(v, base_dir, where));
                } else unknown();
            } else if (section == "synth") {
                if (key == "scene") cfg.scene = resolve(base_dir, v);
                else if (key == "frames") cfg.synth_frames = static_cast<std::size_t>(to_number(v, where));
                else if (key == "background_frames") {
                    cfg.synth_background_frames = static_cast<std::size_t>(to_number(v, where));
                } else unknown();
            } else if (section == "stream") {
                if (key == "poll_ms") cfg.poll_ms = static_cast<int>(to_number(v, where));
                else if (key == "max_frames") cfg.max_frames = static_cast<std::size_t>(to_number(v, where));
                else if (key == "idle_timeout_ms") cfg.idle_timeout_ms = static_cast<int>(to_number(v, where));
                else unknown();
            } else {
                throw ConfigError("config: unknown section [" + section + "]");
            }
        }
    }
}

inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    apply_config(cfg, is, std::filesystem::path(path).parent_path());
}

}  // namespace dropcell::pipeline
