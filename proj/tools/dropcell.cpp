// dropcell command-line front end.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>
#include <sstream>

#include "dropcell/pipeline/runner.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Flags {
    std::string config;
    std::vector<std::string> input;
    std::string out;
    bool overlays = false;
    std::optional<double> budget_ms;
    std::optional<double> pixel_pitch;
    std::optional<unsigned> workers;
    std::string background;
    std::string stain;
    std::optional<bool> reg;
    std::optional<int> max_shift;
    // stream
    std::string mode;
    std::optional<std::size_t> max_frames;
    std::optional<int> idle_timeout_ms;
    std::optional<int> poll_ms;
    // calibrate
    std::string background_roi;
    std::vector<std::string> dyes;
    // synth
    std::string scene;
    std::optional<std::size_t> frames;
    std::optional<std::size_t> background_frames;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "configuration file (INI)");
    sub->add_option("--input", f.input, "input directory or image files");
    sub->add_option("--out", f.out, "output directory");
    sub->add_flag("--overlays", f.overlays, "write annotated overlay PNGs");
    sub->add_option("--budget-ms", f.budget_ms, "per-frame latency budget in ms");
    sub->add_option("--pixel-pitch", f.pixel_pitch, "micrometers per pixel");
    sub->add_option("--workers", f.workers, "analysis worker threads (0 = all cores)");
}

void add_analysis(CLI::App* sub, Flags& f) {
    sub->add_option("--background", f.background, "background frame(s), file or directory");
    sub->add_option("--stain", f.stain, "stain calibration file");
    sub->add_option("--register", f.reg, "align frames to the first frame (true/false)");
    sub->add_option("--max-shift", f.max_shift, "registration search radius in px");
}

dropcell::pipeline::RoiSource parse_roi(const std::string& text, const std::string& what) {
    std::istringstream is(text);
    dropcell::pipeline::RoiSource roi;
    if (!(is >> roi.image >> roi.x >> roi.y >> roi.width >> roi.height) || roi.width < 1 || roi.height < 1) {
        throw dropcell::pipeline::ConfigError(what + ": expected '<image> <x> <y> <width> <height>'");
    }
    return roi;
}

void apply_flags(dropcell::pipeline::PipelineConfig& cfg, const Flags& f) {
    using namespace dropcell::pipeline;
    if (!f.input.empty()) cfg.inputs = f.input;
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.overlays) cfg.emit_overlays = true;
    if (f.budget_ms) cfg.latency_budget_ms = *f.budget_ms;
    if (f.pixel_pitch) cfg.pixel_pitch = *f.pixel_pitch;
    if (f.workers) cfg.workers = *f.workers;
    if (!f.background.empty()) cfg.background = f.background;
    if (!f.stain.empty()) cfg.stain_basis = f.stain;
    if (f.reg) cfg.register_frames = *f.reg;
    if (f.max_shift) cfg.max_shift = *f.max_shift;
    if (f.max_frames) cfg.max_frames = *f.max_frames;
    if (f.idle_timeout_ms) cfg.idle_timeout_ms = *f.idle_timeout_ms;
    if (f.poll_ms) cfg.poll_ms = *f.poll_ms;
    if (!f.background_roi.empty()) cfg.calibration_background = parse_roi(f.background_roi, "--background-roi");
    for (const auto& d : f.dyes) {
        const auto eq = d.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--dye: expected '<name>=<image> <x> <y> <w> <h>'");
        cfg.calibration_dyes.emplace_back(d.substr(0, eq), parse_roi(d.substr(eq + 1), "--dye " + d.substr(0, eq)));
    }
    if (!f.scene.empty()) cfg.scene = f.scene;
    if (f.frames) cfg.synth_frames = *f.frames;
    if (f.background_frames) cfg.synth_background_frames = *f.background_frames;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dropcell::pipeline;
    CLI::App app{"dropcell: droplet and cell image analysis"};
    app.require_subcommand(1);
    Flags f;

    auto* bf = app.add_subcommand("analyze-brightfield", "segment droplets, diameters and dye fractions");
    auto* fl = app.add_subcommand("analyze-fluorescence", "cell morphometrics and live/dead classes");
    auto* reg = app.add_subcommand("register", "align a frame sequence to its first frame");
    auto* cal = app.add_subcommand("calibrate", "build a stain basis from single-dye ROIs");
    auto* syn = app.add_subcommand("synth", "render a synthetic scene with ground truth");
    auto* st = app.add_subcommand("stream", "watch a directory and analyze frames as they arrive");
    for (auto* s : {bf, fl, reg, cal, syn, st}) add_common(s, f);
    for (auto* s : {bf, fl, reg, st}) add_analysis(s, f);
    cal->add_option("--background-roi", f.background_roi, "'<image> <x> <y> <w> <h>'");
    cal->add_option("--dye", f.dyes, "'<name>=<image> <x> <y> <w> <h>', repeatable");
    syn->add_option("--scene", f.scene, "scene file");
    syn->add_option("--frames", f.frames, "number of frames to render");
    syn->add_option("--background-frames", f.background_frames, "droplet-free frames for bright-field scenes");
    st->add_option("--mode", f.mode, "brightfield, fluorescence or register");
    st->add_option("--max-frames", f.max_frames, "stop after this many frames");
    st->add_option("--idle-timeout-ms", f.idle_timeout_ms, "stop after this long without new files");
    st->add_option("--poll-ms", f.poll_ms, "directory poll interval");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        PipelineConfig cfg;
        if (!f.config.empty()) load_config_file(cfg, f.config);
        bool stream = false;
        if (bf->parsed()) cfg.mode = Mode::brightfield;
        else if (fl->parsed()) cfg.mode = Mode::fluorescence;
        else if (reg->parsed()) cfg.mode = Mode::register_frames;
        else if (cal->parsed()) cfg.mode = Mode::calibrate;
        else if (syn->parsed()) cfg.mode = Mode::synth;
        else {
            stream = true;
            if (!f.mode.empty()) cfg.mode = parse_mode(f.mode);
            if (cfg.mode == Mode::calibrate || cfg.mode == Mode::synth) {
                throw ConfigError("stream mode supports brightfield, fluorescence or register");
            }
        }
        apply_flags(cfg, f);
        return run(cfg, stream, g_stop);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_no_input;
    }
}
