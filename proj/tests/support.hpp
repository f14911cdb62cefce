#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dropcell/brightfield.hpp"
#include "dropcell/core/image.hpp"
#include "dropcell/synth.hpp"

namespace testsupport {

using namespace dropcell;

inline BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) <= r) m.set(x, y, true);
        }
    }
    return m;
}

inline void fill_rect(BinaryMask& m, int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) m.set(x, y, true);
    }
}

inline BinaryMask mask_of(const RasterImage& gray, int threshold) {
    BinaryMask m(gray.width(), gray.height());
    for (int y = 0; y < gray.height(); ++y) {
        for (int x = 0; x < gray.width(); ++x) m.set(x, y, gray.at(x, y) > threshold);
    }
    return m;
}

inline synth::DyeSpec dye(const std::string& name, std::array<double, 3> od) { return {name, od}; }

/// Two dyes used throughout: a blue dye absorbing mostly red, a yellow dye absorbing blue.
inline std::vector<synth::DyeSpec> two_dyes() {
    return {dye("blue", {0.80, 0.50, 0.20}), dye("yellow", {0.10, 0.30, 0.90})};
}

/// 1024 x 1024 bright-field field with five droplets of diameter 70..240 px,
/// mixed dyes and optional sub-min_area speckles.
inline synth::SceneSpec droplet_field(double noise_sigma = 3.0, int speckles = 20, std::uint64_t seed = 7) {
    synth::SceneSpec s;
    s.width = 1024;
    s.height = 1024;
    s.texture_amplitude = 0.08;
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    s.dyes = two_dyes();
    const Point2 centers[5] = {{150, 150}, {450, 160}, {800, 220}, {250, 650}, {700, 700}};
    const double diameters[5] = {70, 110, 150, 190, 240};
    for (int i = 0; i < 5; ++i) {
        synth::DropletSpec d;
        d.center = {centers[i].x + 0.3 * i, centers[i].y + 0.17 * i};
        d.diameter = diameters[i];
        d.concentrations = {0.6 * (4 - i) / 4.0, 0.6 * i / 4.0};
        s.droplets.push_back(d);
    }
    for (int i = 0; i < speckles; ++i) {
        s.speckles.push_back({30 + i * 45, 900 + (i % 3) * 30, 1 + i % 4, 1 + (i / 2) % 4, {0, 0, 0}});
    }
    return s;
}

inline brightfield::BackgroundModel background_for(const synth::SceneSpec& s, int frames = 10) {
    std::vector<RasterImage> bgs;
    for (int i = 0; i < frames; ++i) bgs.push_back(synth::render_background(s, i));
    return brightfield::build_background(bgs);
}

inline synth::CellSpec cell(double x, double y, double r, std::array<std::uint8_t, 3> color) {
    synth::CellSpec c;
    c.center = {x, y};
    c.radius = r;
    c.color = color;
    return c;
}

inline constexpr std::array<std::uint8_t, 3> green{0, 220, 0};
inline constexpr std::array<std::uint8_t, 3> red{220, 0, 0};

/// Fluorescence field with 7 green and 3 red equal-size cells.
inline synth::SceneSpec live_dead_field(double noise_sigma = 2.0) {
    synth::SceneSpec s;
    s.modality = synth::Modality::fluorescence;
    s.width = 512;
    s.height = 512;
    s.background = {0, 0, 0};
    s.noise_sigma = noise_sigma;
    s.seed = 11;
    for (int j = 0; j < 10; ++j) {
        s.cells.push_back(cell(60 + (j % 5) * 95, 150 + (j / 5) * 200, 25, j < 7 ? green : red));
    }
    return s;
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("dropcell_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

inline std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace testsupport
