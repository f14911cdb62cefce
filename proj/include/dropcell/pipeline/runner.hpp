#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dropcell/brightfield.hpp"
#include "dropcell/core/parallel.hpp"
#include "dropcell/fluor.hpp"
#include "dropcell/pipeline/config.hpp"
#include "dropcell/pipeline/image_io.hpp"
#include "dropcell/pipeline/overlay.hpp"
#include "dropcell/registration.hpp"
#include "dropcell/stainsep.hpp"
#include "dropcell/synth.hpp"
#include "dropcell/synth_io.hpp"

namespace dropcell::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_no_input = 2, exit_warnings = 3 };

struct TimingReport {
    std::size_t frame_index = 0;
    double read_ms = 0.0;
    double register_ms = 0.0;
    double segment_ms = 0.0;
    double deconvolve_or_morph_ms = 0.0;
    double write_ms = 0.0;
    double total_ms = 0.0;
    bool budget_exceeded = false;

    void finalize(double budget_ms) {
        total_ms = read_ms + register_ms + segment_ms + deconvolve_or_morph_ms + write_ms;
        budget_exceeded = total_ms > budget_ms;
    }
};

struct FrameResult {
    std::size_t index = 0;
    std::string file;  // base name
    bool ok = false;
    std::vector<std::string> warnings;
    TimingReport timing;

    std::optional<RasterImage> image;  // aligned frame, kept for overlays and register output
    std::vector<Region> regions;
    std::vector<brightfield::DropletRecord> droplets;
    std::vector<fluor::CellRecord> cells;
    double field_ratio = 0.0;
    registration::Shift shift;
    std::array<double, 3> gains{1.0, 1.0, 1.0};
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s.front() == '-' ? 1 : 0);  // no "-0.00"
    return s;
}

inline std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::vector<std::uint32_t> interior_pixels(const Region& r, int width, double fraction) {
    const double radius = fraction * brightfield::equivalent_diameter(double(r.pixel_count)) / 2.0;
    std::vector<std::uint32_t> out;
    for (auto p : r.pixels) {
        const double x = (p % static_cast<std::uint32_t>(width)) + 0.5;
        const double y = (p / static_cast<std::uint32_t>(width)) + 0.5;
        if (std::hypot(x - r.centroid.x, y - r.centroid.y) <= radius) out.push_back(p);
    }
    return out;
}

/// Overlay text for a cell: "id: area / circ / class".
inline std::string cell_label(const fluor::CellRecord& c) {
    return std::to_string(c.id) + ": " + fixed(c.morph.area_px, 0) + " / " + fixed(c.morph.circularity, 2) + " / " +
           fluor::to_string(c.viability.viability);
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::binary);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace detail

/// Per-frame analysis shared by batch and stream runs. Everything except the
/// registration reference is read-only after construction.
class FrameProcessor {
public:
    explicit FrameProcessor(const PipelineConfig& cfg) : cfg_(cfg) {
        if (cfg.mode == Mode::brightfield) {
            if (cfg.background.empty()) throw ConfigError("brightfield mode needs a background (file or directory)");
            auto files = list_images({cfg.background});
            if (files.empty()) throw ConfigError("no background frames found at " + cfg.background);
            std::vector<RasterImage> frames;
            for (const auto& f : files) {
                try {
                    frames.push_back(read_image(f));
                } catch (const ImageReadError& e) {
                    throw ConfigError(std::string("background: ") + e.what());
                }
            }
            try {
                background_ = brightfield::build_background(frames);
            } catch (const InputError& e) {
                throw ConfigError(std::string("background: ") + e.what());
            }
            if (!cfg.stain_basis.empty()) {
                try {
                    basis_ = stainsep::load_basis(cfg.stain_basis);
                } catch (const std::exception& e) {
                    throw ConfigError("stain basis " + cfg.stain_basis + ": " + e.what());
                }
            }
        }
    }

    const std::optional<stainsep::StainBasis>& basis() const { return basis_; }
    bool has_reference() const { return reference_.has_value(); }
    void set_reference(RasterImage image) { reference_ = std::move(image); }

    /// Analyzes one decoded frame. Read time is supplied by the caller.
    FrameResult analyze(std::size_t index, const std::string& path, RasterImage image, double read_ms) const {
        using detail::Clock;
        using detail::ms_since;
        FrameResult res;
        res.index = index;
        res.file = fs::path(path).filename().string();
        res.timing.frame_index = index;
        res.timing.read_ms = read_ms;
        if (cfg_.pixel_pitch) image.set_pixel_pitch(cfg_.pixel_pitch);

        auto t0 = Clock::now();
        const bool align = cfg_.registration_enabled() || cfg_.mode == Mode::register_frames;
        if (align && reference_ && !(image.width() == reference_->width() && image.height() == reference_->height())) {
            throw InputError("frame dimensions differ from the reference frame");
        }
        if (align && reference_) {
            if (cfg_.mode != Mode::brightfield && image.channels() == reference_->channels()) {
                auto exposure = registration::normalize_exposure(image, *reference_);
                for (std::size_t c = 0; c < exposure.gains.size() && c < 3; ++c) res.gains[c] = exposure.gains[c];
                if (exposure.gains.size() == 1) res.gains = {exposure.gains[0], exposure.gains[0], exposure.gains[0]};
                image = std::move(exposure.image);
            }
            try {
                res.shift = registration::estimate_translation(*reference_, image, cfg_.max_shift);
                image = registration::apply_translation(image, res.shift);
            } catch (const registration::FeaturelessFrame&) {
                res.shift = {};
                res.warnings.push_back("featureless frame: registration skipped");
            }
        } else {
            res.shift = {0.0, 0.0, 1.0};
        }
        res.timing.register_ms = ms_since(t0);

        if (cfg_.mode == Mode::brightfield) analyze_brightfield(image, res);
        else if (cfg_.mode == Mode::fluorescence) analyze_fluorescence(image, res);

        if (cfg_.emit_overlays || cfg_.mode == Mode::register_frames) res.image = std::move(image);
        res.ok = true;
        return res;
    }

private:
    void analyze_brightfield(const RasterImage& image, FrameResult& res) const {
        using detail::Clock;
        auto t0 = Clock::now();
        const RasterImage diff = brightfield::subtract_background(image, background_);
        res.regions = brightfield::segment_droplets(diff, cfg_.segmentation);
        res.droplets = brightfield::droplet_metrics(res.regions, image.pixel_pitch());
        res.timing.segment_ms = detail::ms_since(t0);

        t0 = Clock::now();
        if (basis_ && !res.regions.empty()) {
            if (image.channels() != 3) throw InputError("dye unmixing needs a 3-channel frame");
            std::vector<std::vector<std::uint32_t>> interiors;
            BinaryMask roi(image.width(), image.height());
            for (const auto& r : res.regions) {
                interiors.push_back(detail::interior_pixels(r, image.width(), cfg_.interior_fraction));
                for (auto p : interiors.back()) roi.set(p, true);
            }
            const auto conc = stainsep::unmix(image, *basis_, roi);
            for (std::size_t i = 0; i < res.regions.size(); ++i) {
                const auto ratio = stainsep::dye_ratio(conc, interiors[i], *basis_);
                res.droplets[i].dye_fractions = ratio.fractions;
                res.droplets[i].empty_flag = ratio.empty;
            }
        }
        res.timing.deconvolve_or_morph_ms = detail::ms_since(t0);
    }

    void analyze_fluorescence(const RasterImage& image, FrameResult& res) const {
        using detail::Clock;
        auto t0 = Clock::now();
        res.regions = fluor::segment_fluorescent(image, {cfg_.green_band, cfg_.red_band}, cfg_.cell_min_area,
                                                 cfg_.segmentation.connectivity);
        res.timing.segment_ms = detail::ms_since(t0);

        t0 = Clock::now();
        const auto ld = fluor::live_dead(image, res.regions);
        res.field_ratio = ld.field_ratio;
        for (std::size_t i = 0; i < res.regions.size(); ++i) {
            fluor::CellRecord rec;
            rec.id = static_cast<int>(i) + 1;
            rec.frame_index = static_cast<int>(res.index);
            rec.centroid = res.regions[i].centroid;
            rec.morph = fluor::morphometrics(res.regions[i], image.pixel_pitch());
            rec.viability = ld.cells[i];
            rec.live_fraction_context = ld.field_ratio;
            res.cells.push_back(rec);
        }
        res.timing.deconvolve_or_morph_ms = detail::ms_since(t0);
    }

    const PipelineConfig& cfg_;
    brightfield::BackgroundModel background_;
    std::optional<stainsep::StainBasis> basis_;
    std::optional<RasterImage> reference_;
};

/// Receives frame results in index order and writes every run artifact.
class OutputSink {
public:
    OutputSink(const PipelineConfig& cfg, const std::optional<stainsep::StainBasis>& basis, bool stream)
        : cfg_(cfg), basis_(basis), tracker_(cfg.match_radius), stream_(stream) {
        out_ = fs::path(cfg.output_dir);
        fs::create_directories(out_);
        if (cfg.emit_overlays) fs::create_directories(out_ / "overlays");
        if (cfg.mode == Mode::register_frames) fs::create_directories(out_ / "aligned");
        started_ = detail::iso_now();
        results_.open(out_ / "results.csv", std::ios::binary | std::ios::trunc);
        timing_.open(out_ / "timing.csv", std::ios::binary | std::ios::trunc);
        if (!results_ || !timing_) throw std::runtime_error("cannot write to output directory " + out_.string());
        if (stream_) events_.open(out_ / "events.ndjson", std::ios::binary | std::ios::trunc);
        results_ << csv_header() << '\n';
        timing_ << "frame_index,read_ms,register_ms,segment_ms,deconvolve_or_morph_ms,write_ms,total_ms,budget_exceeded\n";
        flush();
    }

    std::string csv_header() const {
        switch (cfg_.mode) {
            case Mode::fluorescence:
                return "frame_index,cell_id,track_id,area,perimeter,circularity,mean_green,mean_red,viability_class";
            case Mode::register_frames:
                return "frame_index,dx,dy,confidence,gain_r,gain_g,gain_b";
            default: {
                std::string h = "frame_index,droplet_id,cx,cy,area_px2,diameter_px,diameter_um,circularity";
                if (basis_) {
                    for (const auto& d : basis_->dyes) h += ",fraction_" + d.name;
                }
                return h + ",empty_flag";
            }
        }
    }

    void emit(FrameResult& res) {
        const auto t0 = detail::Clock::now();
        std::string rows;
        std::vector<OverlayItem> items;
        std::string header;
        if (cfg_.mode == Mode::brightfield) {
            for (std::size_t i = 0; i < res.droplets.size(); ++i) {
                const auto& d = res.droplets[i];
                rows += std::to_string(res.index) + ',' + std::to_string(d.id) + ',' + detail::fixed(d.centroid.x, 2) +
                        ',' + detail::fixed(d.centroid.y, 2) + ',' + detail::fixed(d.area_px, 0) + ',' +
                        detail::fixed(d.diameter_px, 3) + ',' + (d.diameter_um ? detail::fixed(*d.diameter_um, 3) : "") +
                        ',' + detail::fixed(d.circularity, 4);
                std::string label = std::to_string(d.id);
                if (basis_) {
                    for (std::size_t k = 0; k < basis_->dyes.size(); ++k) {
                        const double f = k < d.dye_fractions.size() ? d.dye_fractions[k].second : 0.0;
                        rows += ',' + detail::fixed(100.0 * f, 2);
                        label += ' ' + basis_->dyes[k].name + '=' + detail::fixed(100.0 * f, 1) + '%';
                    }
                }
                rows += std::string(",") + (d.empty_flag ? "1" : "0") + '\n';
                all_droplets_.push_back(d);
                items.push_back({res.regions[i].contour, d.centroid, label});
            }
            header = "frame " + std::to_string(res.index) + ": " + std::to_string(res.droplets.size()) + " droplets";
        } else if (cfg_.mode == Mode::fluorescence) {
            std::vector<Point2> centroids;
            for (const auto& c : res.cells) centroids.push_back(c.centroid);
            const auto tracks = tracker_.update(centroids);
            for (std::size_t i = 0; i < res.cells.size(); ++i) {
                auto& c = res.cells[i];
                c.track_id = tracks[i];
                const double area = c.morph.area_um2.value_or(c.morph.area_px);
                const double perim = c.morph.perimeter_um.value_or(c.morph.perimeter_px);
                rows += std::to_string(res.index) + ',' + std::to_string(c.id) + ',' + std::to_string(c.track_id) + ',' +
                        detail::fixed(area, 2) + ',' + detail::fixed(perim, 2) + ',' +
                        detail::fixed(c.morph.circularity, 4) + ',' + detail::fixed(c.viability.mean_green, 2) + ',' +
                        detail::fixed(c.viability.mean_red, 2) + ',' + fluor::to_string(c.viability.viability) + '\n';
                ++class_counts_[fluor::to_string(c.viability.viability)];
                items.push_back({res.regions[i].contour, c.centroid, detail::cell_label(c)});
            }
            header = "frame " + std::to_string(res.index) + ": " + std::to_string(res.cells.size()) +
                     " cells, live ratio " + detail::fixed(res.field_ratio, 2);
        } else if (cfg_.mode == Mode::register_frames) {
            rows = std::to_string(res.index) + ',' + detail::fixed(res.shift.dx, 3) + ',' +
                   detail::fixed(res.shift.dy, 3) + ',' + detail::fixed(res.shift.confidence, 4) + ',' +
                   detail::fixed(res.gains[0], 4) + ',' + detail::fixed(res.gains[1], 4) + ',' +
                   detail::fixed(res.gains[2], 4) + '\n';
            char name[32];
            std::snprintf(name, sizeof name, "frame_%04zu.png", res.index);
            write_png((out_ / "aligned" / name).string(), *res.image);
            header = "frame " + std::to_string(res.index) + ": shift " + detail::fixed(res.shift.dx, 2) + ", " +
                     detail::fixed(res.shift.dy, 2);
        }
        results_ << rows;
        if (cfg_.emit_overlays && res.image) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%04zu.png", res.index);
            write_png((out_ / "overlays" / name).string(), emit_overlay(*res.image, items, header));
        }
        res.image.reset();
        res.timing.write_ms = detail::ms_since(t0);
        res.timing.finalize(cfg_.latency_budget_ms);
        const auto& t = res.timing;
        timing_ << t.frame_index << ',' << detail::fixed(t.read_ms, 3) << ',' << detail::fixed(t.register_ms, 3) << ','
                << detail::fixed(t.segment_ms, 3) << ',' << detail::fixed(t.deconvolve_or_morph_ms, 3) << ','
                << detail::fixed(t.write_ms, 3) << ',' << detail::fixed(t.total_ms, 3) << ','
                << (t.budget_exceeded ? 1 : 0) << '\n';
        if (t.budget_exceeded) {
            std::cerr << "frame " << res.index << ": " << detail::fixed(t.total_ms, 1) << " ms exceeds the "
                      << detail::fixed(cfg_.latency_budget_ms, 0) << " ms budget\n";
        }
        for (const auto& w : res.warnings) warn(res.index, res.file, w);

        json frame{{"frame_index", res.index}, {"file", res.file}, {"objects", object_count(res)}};
        if (cfg_.mode == Mode::fluorescence) frame["live_ratio"] = res.field_ratio;
        if (cfg_.mode == Mode::register_frames) {
            frame["dx"] = res.shift.dx;
            frame["dy"] = res.shift.dy;
        }
        frames_.push_back(frame);
        timings_.push_back(t);
        ++processed_;
        if (stream_) {
            json ev{{"event", "frame"}, {"frame_index", res.index}, {"file", res.file}, {"objects", object_count(res)},
                    {"timing", timing_json(t)}, {"budget_exceeded", t.budget_exceeded}, {"warnings", res.warnings}};
            events_ << ev.dump() << '\n';
        }
        flush();
    }

    /// A frame that could not be read or analyzed.
    void skip(std::size_t index, const std::string& path, const std::string& why) {
        const std::string file = fs::path(path).filename().string();
        warn(index, file, why);
        frames_.push_back(json{{"frame_index", index}, {"file", file}, {"skipped", true}});
        if (stream_) {
            events_ << json{{"event", "skipped"}, {"frame_index", index}, {"file", file}, {"reason", why}}.dump()
                    << '\n';
            flush();
        }
    }

    std::size_t processed() const { return processed_; }
    std::size_t warning_count() const { return warnings_.size(); }

    /// Writes summary.json (deterministic) and metadata.json (timestamps, timing).
    void finish(std::size_t frames_total) {
        json summary{{"mode", to_string(cfg_.mode)}, {"frames_total", frames_total}, {"frames_processed", processed_},
                     {"warning_count", warnings_.size()}, {"warnings", warnings_}};
        if (cfg_.mode == Mode::brightfield) {
            summary["droplet_count"] = all_droplets_.size();
            if (all_droplets_.empty()) {
                summary["population"] = nullptr;
            } else {
                const auto s = brightfield::population_stats(all_droplets_);
                json pop{{"count", s.count}, {"mean_diameter_px", s.mean_diameter}, {"sd_diameter_px", s.sd_diameter},
                         {"cv_percent", s.cv_percent}};
                if (cfg_.pixel_pitch) pop["mean_diameter_um"] = s.mean_diameter * *cfg_.pixel_pitch;
                summary["population"] = pop;
            }
            if (basis_) {
                json dyes = json::array();
                for (const auto& d : basis_->dyes) dyes.push_back(d.name);
                summary["dyes"] = dyes;
            }
        } else if (cfg_.mode == Mode::fluorescence) {
            summary["cell_classes"] = {{"live", class_counts_["live"]},
                                       {"dead", class_counts_["dead"]},
                                       {"ambiguous", class_counts_["ambiguous"]}};
        }
        summary["frames"] = frames_;
        detail::write_json(out_ / "summary.json", summary);

        json meta{{"started_at", started_}, {"finished_at", detail::iso_now()},
                  {"latency_budget_ms", cfg_.latency_budget_ms}, {"workers", cfg_.workers}};
        json agg = json::object();
        if (!timings_.empty()) {
            auto stage = [&](auto field) {
                double sum = 0.0, mx = 0.0;
                for (const auto& t : timings_) {
                    sum += t.*field;
                    mx = std::max(mx, t.*field);
                }
                return json{{"mean_ms", sum / double(timings_.size())}, {"max_ms", mx}};
            };
            agg["read"] = stage(&TimingReport::read_ms);
            agg["register"] = stage(&TimingReport::register_ms);
            agg["segment"] = stage(&TimingReport::segment_ms);
            agg["deconvolve_or_morph"] = stage(&TimingReport::deconvolve_or_morph_ms);
            agg["write"] = stage(&TimingReport::write_ms);
            agg["total"] = stage(&TimingReport::total_ms);
            std::size_t over = 0;
            for (const auto& t : timings_) over += t.budget_exceeded ? 1 : 0;
            agg["frames_over_budget"] = over;
        }
        meta["timing"] = agg;
        detail::write_json(out_ / "metadata.json", meta);
        if (stream_) {
            events_ << json{{"event", "end"}, {"frames_processed", processed_}, {"warning_count", warnings_.size()}}.dump()
                    << '\n';
        }
        flush();
    }

private:
    static json timing_json(const TimingReport& t) {
        return {{"read_ms", t.read_ms},   {"register_ms", t.register_ms},
                {"segment_ms", t.segment_ms}, {"deconvolve_or_morph_ms", t.deconvolve_or_morph_ms},
                {"write_ms", t.write_ms}, {"total_ms", t.total_ms}};
    }

    std::size_t object_count(const FrameResult& r) const {
        return cfg_.mode == Mode::brightfield ? r.droplets.size() : r.cells.size();
    }

    void warn(std::size_t index, const std::string& file, const std::string& why) {
        std::cerr << "warning: frame " << index << " (" << file << "): " << why << '\n';
        warnings_.push_back("frame " + std::to_string(index) + " (" + file + "): " + why);
    }

    void flush() {
        results_.flush();
        timing_.flush();
        if (stream_) events_.flush();
    }

    const PipelineConfig& cfg_;
    const std::optional<stainsep::StainBasis>& basis_;
    fluor::CellTracker tracker_;
    bool stream_;
    fs::path out_;
    std::string started_;
    std::ofstream results_, timing_, events_;
    std::vector<brightfield::DropletRecord> all_droplets_;
    std::map<std::string, std::size_t> class_counts_;
    std::vector<std::string> warnings_;
    json frames_ = json::array();
    std::vector<TimingReport> timings_;
    std::size_t processed_ = 0;
};

namespace detail {

inline void check_inputs(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.inputs.empty()) throw ConfigError("no input given");
    for (const auto& in : cfg.inputs) {
        if (!fs::exists(in)) throw ConfigError("input does not exist: " + in);
    }
    if (!cfg.stain_basis.empty() && !fs::exists(cfg.stain_basis)) {
        throw ConfigError("stain basis does not exist: " + cfg.stain_basis);
    }
}

inline int finish_status(const OutputSink& sink) {
    if (sink.processed() == 0) {
        std::cerr << "no processable frames\n";
        return exit_no_input;
    }
    return sink.warning_count() > 0 ? exit_warnings : exit_ok;
}

/// Reads and analyzes one file; read or analysis failure yields a result with ok == false.
inline FrameResult process_file(const FrameProcessor& proc, std::size_t index, const std::string& path,
                                std::optional<double> pitch) {
    const auto t0 = Clock::now();
    try {
        RasterImage img = read_image(path, pitch);
        return proc.analyze(index, path, std::move(img), ms_since(t0));
    } catch (const std::exception& e) {
        FrameResult bad;
        bad.index = index;
        bad.file = path;
        bad.warnings.push_back(e.what());
        return bad;
    }
}

}  // namespace detail

/// Processes every input frame with N analysis workers; results are emitted
/// strictly in frame order. Setting `stop` drains in-flight frames and flushes.
inline int run_batch(const PipelineConfig& cfg, const std::atomic<bool>* stop = nullptr) {
    detail::check_inputs(cfg);
    const auto files = list_images(cfg.inputs);
    if (files.empty()) {
        std::cerr << "no input frames\n";
        return exit_no_input;
    }
    FrameProcessor proc(cfg);
    OutputSink sink(cfg, proc.basis(), false);
    const auto stopped = [&] { return stop && stop->load(); };

    // The first readable frame is the registration reference; it is analyzed
    // on its own before the workers start.
    std::size_t next = 0;
    while (next < files.size() && !proc.has_reference() && !stopped()) {
        const auto t0 = detail::Clock::now();
        try {
            RasterImage img = read_image(files[next], cfg.pixel_pitch);
            proc.set_reference(img);
            auto res = proc.analyze(next, files[next], std::move(img), detail::ms_since(t0));
            sink.emit(res);
        } catch (const std::exception& e) {
            sink.skip(next, files[next], e.what());
        }
        ++next;
    }

    const unsigned workers = cfg.workers > 0 ? cfg.workers : default_workers();
    const std::size_t window = 2 * static_cast<std::size_t>(workers);
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, FrameResult> ready;
    std::size_t dispatched = next, emitted = next;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers && next < files.size(); ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::unique_lock lock(mu);
                    cv.wait(lock, [&] { return dispatched >= files.size() || stopped() || dispatched < emitted + window; });
                    if (dispatched >= files.size() || stopped()) return;
                    i = dispatched++;
                }
                auto res = detail::process_file(proc, i, files[i], cfg.pixel_pitch);
                {
                    std::lock_guard lock(mu);
                    ready.emplace(i, std::move(res));
                }
                cv.notify_all();
            }
        });
    }
    for (;;) {
        FrameResult res;
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return ready.count(emitted) > 0 || (emitted >= dispatched && (dispatched >= files.size() || stopped())); });
            auto it = ready.find(emitted);
            if (it == ready.end()) break;
            res = std::move(it->second);
            ready.erase(it);
        }
        if (res.ok) sink.emit(res);
        else sink.skip(res.index, files[res.index], res.warnings.empty() ? "unreadable" : res.warnings.front());
        {
            std::lock_guard lock(mu);
            ++emitted;
        }
        cv.notify_all();
    }
    for (auto& t : pool) t.join();
    sink.finish(files.size());
    return detail::finish_status(sink);
}

/// Watches the input directory and processes each new file once its size has
/// been stable across two polls, in filename order. Returns when `stop` is set,
/// `max_frames` files have been handled, or the idle timeout elapses.
inline int run_stream(const PipelineConfig& cfg, const std::atomic<bool>& stop) {
    cfg.validate();
    if (cfg.inputs.size() != 1 || !fs::is_directory(cfg.inputs.front())) {
        throw ConfigError("stream mode needs an input directory");
    }
    if (!cfg.stain_basis.empty() && !fs::exists(cfg.stain_basis)) {
        throw ConfigError("stain basis does not exist: " + cfg.stain_basis);
    }
    FrameProcessor proc(cfg);
    OutputSink sink(cfg, proc.basis(), true);
    const fs::path dir = cfg.inputs.front();

    struct Pending {
        std::string path;
        std::uintmax_t size = 0;
        int stable_polls = 0;
        int failures = 0;
    };
    std::map<std::string, Pending> seen;  // not yet handled
    std::set<std::string> done;
    std::vector<std::string> queue;  // stable files awaiting processing, in admission order
    std::size_t handled = 0;
    auto last_activity = detail::Clock::now();

    while (!stop.load()) {
        std::vector<std::string> names;
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(dir, ec)) {
            if (e.is_regular_file(ec) && is_image_file(e.path())) names.push_back(e.path().string());
        }
        std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
            return natural_less(fs::path(a).filename().string(), fs::path(b).filename().string());
        });
        for (const auto& name : names) {
            if (done.count(name) || std::find(queue.begin(), queue.end(), name) != queue.end()) continue;
            const auto size = fs::file_size(name, ec);
            if (ec) continue;
            auto [it, fresh] = seen.try_emplace(name, Pending{name, size, 0, 0});
            if (fresh) {
                last_activity = detail::Clock::now();
                continue;
            }
            if (size > 0 && size == it->second.size) ++it->second.stable_polls;
            else {
                it->second.size = size;
                it->second.stable_polls = 0;
                last_activity = detail::Clock::now();
            }
            if (it->second.stable_polls >= 1) queue.push_back(name);
        }
        std::sort(queue.begin(), queue.end(), [](const std::string& a, const std::string& b) {
            return natural_less(fs::path(a).filename().string(), fs::path(b).filename().string());
        });

        while (!queue.empty() && !stop.load()) {
            if (cfg.max_frames && handled >= *cfg.max_frames) break;
            const std::string name = queue.front();
            auto& p = seen[name];
            const auto t0 = detail::Clock::now();
            std::optional<RasterImage> img;
            try {
                img = read_image(name, cfg.pixel_pitch);
            } catch (const ImageReadError& e) {
                if (++p.failures < 3) {
                    p.stable_polls = 0;
                    queue.erase(queue.begin());
                    break;  // keep order: retry this file on the next poll before later ones
                }
                sink.skip(handled, name, std::string(e.what()) + " (3 attempts)");
            }
            if (img) {
                try {
                    if (!proc.has_reference()) proc.set_reference(*img);
                    auto res = proc.analyze(handled, name, std::move(*img), detail::ms_since(t0));
                    sink.emit(res);
                } catch (const std::exception& e) {
                    sink.skip(handled, name, e.what());
                }
            }
            queue.erase(queue.begin());
            seen.erase(name);
            done.insert(name);
            ++handled;
            last_activity = detail::Clock::now();
        }
        if (cfg.max_frames && handled >= *cfg.max_frames) break;
        if (cfg.idle_timeout_ms && detail::ms_since(last_activity) > *cfg.idle_timeout_ms) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg.poll_ms));
    }
    sink.finish(handled);
    return detail::finish_status(sink);
}

namespace detail {

inline std::vector<stainsep::Rgb> roi_pixels(const RoiSource& roi) {
    RasterImage img;
    try {
        img = read_image(roi.image);
    } catch (const ImageReadError& e) {
        throw ConfigError(e.what());
    }
    if (img.channels() != 3) throw ConfigError(roi.image + ": calibration images must be RGB");
    if (roi.x < 0 || roi.y < 0 || roi.x + roi.width > img.width() || roi.y + roi.height > img.height()) {
        throw ConfigError(roi.image + ": ROI lies outside the image");
    }
    std::vector<stainsep::Rgb> out;
    for (int y = roi.y; y < roi.y + roi.height; ++y) {
        for (int x = roi.x; x < roi.x + roi.width; ++x) out.push_back({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
    }
    return out;
}

}  // namespace detail

/// Builds a stain basis from single-dye ROIs and writes calibration.stain.
inline int run_calibrate(const PipelineConfig& cfg, std::ostream& log = std::cout) {
    cfg.validate();
    if (!cfg.calibration_background) throw ConfigError("calibration needs a background ROI");
    if (cfg.calibration_dyes.empty()) throw ConfigError("calibration needs at least one single-dye ROI");
    const auto background = detail::roi_pixels(*cfg.calibration_background);
    std::vector<std::pair<std::string, std::vector<stainsep::Rgb>>> samples;
    for (const auto& [name, roi] : cfg.calibration_dyes) samples.emplace_back(name, detail::roi_pixels(roi));
    stainsep::StainBasis basis;
    try {
        basis = stainsep::calibrate(samples, background);
    } catch (const stainsep::CalibrationError& e) {
        std::cerr << "calibration failed: " << e.what() << '\n';
        return exit_no_input;
    }
    fs::create_directories(cfg.output_dir);
    const auto path = (fs::path(cfg.output_dir) / "calibration.stain").string();
    stainsep::save_basis(path, basis);
    log << "white point: " << basis.white_point[0] << ' ' << basis.white_point[1] << ' ' << basis.white_point[2]
        << '\n';
    for (const auto& d : basis.dyes) {
        log << "dye " << d.name << ": " << d.od_vector[0] << ' ' << d.od_vector[1] << ' ' << d.od_vector[2] << '\n';
    }
    for (std::size_t i = 0; i < basis.dyes.size(); ++i) {
        for (std::size_t j = i + 1; j < basis.dyes.size(); ++j) {
            log << "angle " << basis.dyes[i].name << '/' << basis.dyes[j].name << ": "
                << detail::fixed(stainsep::angle_degrees(basis.dyes[i].od_vector, basis.dyes[j].od_vector), 2)
                << " deg\n";
        }
    }
    log << "condition number: " << detail::fixed(basis.condition_number(), 3) << '\n';
    log << "wrote " << path << '\n';
    return exit_ok;
}

inline json truth_json(const synth::GroundTruth& truth) {
    json objects = json::array();
    for (const auto& o : truth.objects) {
        json j{{"kind", o.kind}, {"cx", o.centroid.x}, {"cy", o.centroid.y}, {"area", o.area},
               {"perimeter", o.perimeter}, {"diameter", o.diameter}, {"circularity", o.circularity}};
        if (o.kind == "droplet") {
            json f = json::object();
            for (const auto& [name, v] : o.dye_fractions) f[name] = v;
            j["dye_fractions"] = f;
            j["empty"] = o.empty;
        } else {
            j["viability"] = o.viability;
        }
        objects.push_back(j);
    }
    json frames = json::array();
    for (const auto& f : truth.frames) frames.push_back({{"dx", f.shift.x}, {"dy", f.shift.y}, {"gain", f.gain}});
    return {{"seed", truth.seed}, {"objects", objects}, {"frames", frames}};
}

/// Renders a scene file into frames/, background/ (bright field) and truth.json.
inline int run_synth(const PipelineConfig& cfg) {
    if (cfg.scene.empty()) throw ConfigError("synth needs a scene file");
    std::ifstream is(cfg.scene);
    if (!is) throw ConfigError("cannot read scene file " + cfg.scene);
    synth::SceneSpec spec;
    try {
        spec = synth::read_scene(is);
    } catch (const synth::SpecError& e) {
        throw ConfigError(cfg.scene + ": " + e.what());
    }
    if (cfg.synth_frames < 1) throw ConfigError("synth needs at least one frame");
    std::pair<std::vector<RasterImage>, synth::GroundTruth> seq;
    try {
        seq = synth::render_sequence(spec, cfg.synth_frames);
    } catch (const synth::SpecError& e) {
        throw ConfigError(cfg.scene + ": " + e.what());
    }
    const fs::path out(cfg.output_dir);
    fs::create_directories(out / "frames");
    for (std::size_t i = 0; i < seq.first.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.png", i);
        write_png((out / "frames" / name).string(), seq.first[i]);
    }
    if (spec.modality == synth::Modality::brightfield) {
        fs::create_directories(out / "background");
        for (std::size_t i = 0; i < cfg.synth_background_frames; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "bg_%04zu.png", i);
            write_png((out / "background" / name).string(), synth::render_background(spec, i));
        }
    }
    detail::write_json(out / "truth.json", truth_json(seq.second));
    return exit_ok;
}

/// Dispatches on cfg.mode. `stream` selects watch-folder operation.
inline int run(const PipelineConfig& cfg, bool stream, const std::atomic<bool>& stop) {
    switch (cfg.mode) {
        case Mode::calibrate: return run_calibrate(cfg);
        case Mode::synth: return run_synth(cfg);
        default: return stream ? run_stream(cfg, stop) : run_batch(cfg, &stop);
    }
}

}  // namespace dropcell::pipeline
