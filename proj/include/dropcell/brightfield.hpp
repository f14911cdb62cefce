#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dropcell/core/contour.hpp"
#include "dropcell/core/filters.hpp"
#include "dropcell/core/image.hpp"
#include "dropcell/core/labeling.hpp"

namespace dropcell::brightfield {

/// Per-pixel time average of static frames preceding droplet arrival.
struct BackgroundModel {
    RasterImage mean_image;
    int frame_count = 0;
};

enum class ThresholdMode { otsu, fixed };

struct SegmentationConfig {
    double gaussian_sigma = 2.0;
    ThresholdMode threshold_mode = ThresholdMode::otsu;
    int fixed_threshold = 30;
    std::size_t min_area = 50;
    double min_circularity = 0.6;
    bool fill_holes = true;
    Connectivity connectivity = Connectivity::eight;

    void validate() const {
        if (gaussian_sigma < 0.0) throw InputError("gaussian_sigma must be >= 0");
        if (min_area < 1) throw InputError("min_area must be >= 1");
        if (min_circularity < 0.0 || min_circularity > 1.0) {
            throw InputError("min_circularity must be in [0, 1]");
        }
        if (fixed_threshold < 0 || fixed_threshold > 255) {
            throw InputError("fixed_threshold must be in [0, 255]");
        }
    }
};

struct DropletRecord {
    int id = 0;
    Point2 centroid;
    double area_px = 0.0;
    double perimeter_px = 0.0;
    double diameter_px = 0.0;
    std::optional<double> diameter_um;
    double circularity = 0.0;
    // Filled by stain separation; ordered as the stain basis dyes.
    std::vector<std::pair<std::string, double>> dye_fractions;
    bool empty_flag = false;
};

struct PopulationStats {
    std::size_t count = 0;
    double mean_diameter = 0.0;
    double sd_diameter = 0.0;
    double cv_percent = 0.0;
};

inline BackgroundModel build_background(const std::vector<RasterImage>& frames) {
    if (frames.empty()) throw InputError("background needs at least one frame");
    const auto& first = frames.front();
    std::vector<std::uint32_t> sums(first.samples().size(), 0);
    for (const auto& f : frames) {
        if (!f.same_shape(first)) throw InputError("background frames differ in dimensions");
        auto s = f.samples();
        for (std::size_t i = 0; i < s.size(); ++i) sums[i] += s[i];
    }
    const auto n = static_cast<std::uint32_t>(frames.size());
    RasterImage mean(first.width(), first.height(), first.channels(), 0, first.pixel_pitch());
    auto dst = mean.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<std::uint8_t>((2 * sums[i] + n) / (2 * n));
    }
    return {std::move(mean), static_cast<int>(frames.size())};
}

/// |frame - background| per channel, collapsed to gray by the channel maximum.
inline RasterImage subtract_background(const RasterImage& frame, const BackgroundModel& bg) {
    if (!frame.same_shape(bg.mean_image)) {
        throw InputError("frame and background differ in dimensions");
    }
    const int ch = frame.channels();
    RasterImage out(frame.width(), frame.height(), 1, 0, frame.pixel_pitch());
    auto a = frame.samples();
    auto b = bg.mean_image.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        int best = 0;
        for (int c = 0; c < ch; ++c) {
            const int d = std::abs(int(a[i * ch + c]) - int(b[i * ch + c]));
            best = std::max(best, d);
        }
        dst[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

namespace detail {

/// Histogram of `diff` without the pixels of small blobs standing clear of the
/// noise floor (debris, hot pixels). Such blobs would otherwise form their own
/// Otsu class and pull the level above faint droplet rims.
inline std::array<std::uint64_t, 256> debris_free_histogram(const RasterImage& diff, std::size_t min_area) {
    auto hist = histogram(diff);
    const std::uint64_t n = diff.pixel_count();
    auto quantile = [](const std::array<std::uint64_t, 256>& h, std::uint64_t rank) {
        std::uint64_t acc = 0;
        for (int v = 0; v < 256; ++v) {
            acc += h[v];
            if (acc > rank) return v;
        }
        return 255;
    };
    const int median = quantile(hist, n / 2);
    std::array<std::uint64_t, 256> dev{};
    for (int v = 0; v < 256; ++v) dev[std::abs(v - median)] += hist[v];
    const int mad = quantile(dev, n / 2);
    const int floor_level = median + std::max(3, static_cast<int>(std::ceil(6.0 * 1.4826 * mad)));
    if (floor_level >= 255) return hist;

    const int w = diff.width(), h = diff.height();
    auto px = diff.samples();
    std::vector<std::uint8_t> seen(px.size(), 0);
    std::vector<std::uint32_t> blob, stack;
    for (std::size_t start = 0; start < px.size(); ++start) {
        if (seen[start] || px[start] <= floor_level) continue;
        blob.clear();
        stack.push_back(static_cast<std::uint32_t>(start));
        seen[start] = 1;
        while (!stack.empty()) {
            const std::uint32_t p = stack.back();
            stack.pop_back();
            blob.push_back(p);
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                    if (seen[q] || px[q] <= floor_level) continue;
                    seen[q] = 1;
                    stack.push_back(static_cast<std::uint32_t>(q));
                }
            }
        }
        if (blob.size() < min_area) {
            for (auto p : blob) --hist[px[p]];
        }
    }
    return hist;
}

}  // namespace detail

/// Binary droplet mask prior to labeling (blur, threshold, optional hole fill).
///
/// The Otsu level is chosen on the histogram of the unblurred difference image,
/// where static background and droplet rims form two separated modes, and is
/// then applied to the blurred image. The level lands near half the rim
/// contrast, so the blurred edge crosses it at the true droplet boundary.
/// Blobs smaller than min_area are left out of the histogram.
inline std::optional<BinaryMask> droplet_mask(const RasterImage& diff,
                                              const SegmentationConfig& cfg) {
    if (diff.channels() != 1) throw InputError("segmentation expects a grayscale image");
    cfg.validate();
    const RasterImage blurred = gaussian_blur(diff, cfg.gaussian_sigma);
    int threshold = cfg.fixed_threshold;
    if (cfg.threshold_mode == ThresholdMode::otsu) {
        auto t = otsu_threshold(detail::debris_free_histogram(diff, cfg.min_area));
        if (!t) return std::nullopt;
        threshold = *t;
    }
    BinaryMask mask = threshold_above(blurred, threshold);
    if (cfg.fill_holes) mask = fill_holes(mask);
    return mask;
}

inline std::vector<Region> segment_droplets(const RasterImage& diff, const SegmentationConfig& cfg) {
    auto mask = droplet_mask(diff, cfg);
    if (!mask) return {};
    std::vector<Region> kept;
    for (auto& r : label_components(*mask, cfg.connectivity)) {
        if (r.pixel_count < cfg.min_area) continue;
        if (circularity(double(r.pixel_count), r.perimeter) < cfg.min_circularity) continue;
        kept.push_back(std::move(r));
    }
    return kept;
}

inline double equivalent_diameter(double area) { return 2.0 * std::sqrt(area / std::numbers::pi); }

inline std::vector<DropletRecord> droplet_metrics(const std::vector<Region>& regions,
                                                  std::optional<double> pixel_pitch_um) {
    std::vector<DropletRecord> out;
    out.reserve(regions.size());
    int id = 1;
    for (const auto& r : regions) {
        DropletRecord rec;
        rec.id = id++;
        rec.centroid = r.centroid;
        rec.area_px = static_cast<double>(r.pixel_count);
        rec.perimeter_px = r.perimeter;
        rec.diameter_px = equivalent_diameter(rec.area_px);
        if (pixel_pitch_um) rec.diameter_um = rec.diameter_px * *pixel_pitch_um;
        rec.circularity = circularity(rec.area_px, r.perimeter);
        out.push_back(std::move(rec));
    }
    return out;
}

/// Count, mean and population SD (divisor N) of equivalent diameters in pixels.
inline PopulationStats population_stats(const std::vector<DropletRecord>& droplets) {
    if (droplets.empty()) throw InputError("population statistics need at least one droplet");
    PopulationStats s;
    s.count = droplets.size();
    double sum = 0.0;
    for (const auto& d : droplets) sum += d.diameter_px;
    s.mean_diameter = sum / static_cast<double>(s.count);
    double ss = 0.0;
    for (const auto& d : droplets) ss += (d.diameter_px - s.mean_diameter) * (d.diameter_px - s.mean_diameter);
    s.sd_diameter = std::sqrt(ss / static_cast<double>(s.count));
    s.cv_percent = s.mean_diameter > 0.0 ? 100.0 * s.sd_diameter / s.mean_diameter : 0.0;
    return s;
}

}  // namespace dropcell::brightfield
