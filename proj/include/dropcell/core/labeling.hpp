#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dropcell/core/contour.hpp"
#include "dropcell/core/image.hpp"

namespace dropcell {

namespace detail {

inline void fill_geometry(Region& region, int image_width) {
    std::sort(region.pixels.begin(), region.pixels.end());
    region.pixel_count = region.pixels.size();
    double sx = 0.0, sy = 0.0;
    int minx = INT32_MAX, miny = INT32_MAX, maxx = INT32_MIN, maxy = INT32_MIN;
    for (auto p : region.pixels) {
        int x = static_cast<int>(p % image_width);
        int y = static_cast<int>(p / image_width);
        sx += x;
        sy += y;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
    }
    const double n = static_cast<double>(region.pixel_count);
    region.centroid = {sx / n + 0.5, sy / n + 0.5};
    region.bounding_box = {minx, miny, maxx + 1, maxy + 1};
}

}  // namespace detail

/// Labels connected foreground components in scan order. Each region carries
/// its pixel list, centroid, bounding box, and traced contour/perimeter;
/// `mean_intensity` stays empty until `measure_intensity` is called.
inline std::vector<Region> label_components(const BinaryMask& mask,
                                            Connectivity conn = Connectivity::eight) {
    std::vector<Region> regions;
    const int w = mask.width(), h = mask.height();
    if (w == 0 || h == 0) return regions;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::uint32_t> stack;

    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask.test(start) || seen[start]) continue;
        Region region;
        region.label = static_cast<int>(regions.size()) + 1;
        seen[start] = 1;
        stack.push_back(static_cast<std::uint32_t>(start));
        while (!stack.empty()) {
            const std::uint32_t p = stack.back();
            stack.pop_back();
            region.pixels.push_back(p);
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (conn == Connectivity::four && dx != 0 && dy != 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.test(q) && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(static_cast<std::uint32_t>(q));
                    }
                }
            }
        }
        detail::fill_geometry(region, w);
        auto corners = trace_crack_corners(region.pixels, w, conn);
        region.contour = minimum_perimeter_polygon(corners);
        region.perimeter = polygon_length(region.contour);
        regions.push_back(std::move(region));
    }
    return regions;
}

/// Label raster: 0 for background, region.label for member pixels.
inline std::vector<std::int32_t> label_raster(const std::vector<Region>& regions, int width,
                                              int height) {
    std::vector<std::int32_t> labels(static_cast<std::size_t>(width) * height, 0);
    for (const auto& r : regions) {
        for (auto p : r.pixels) labels[p] = r.label;
    }
    return labels;
}

/// Per-channel mean of `image` over each region's member pixels.
inline void measure_intensity(std::vector<Region>& regions, const RasterImage& image) {
    const int ch = image.channels();
    auto samples = image.samples();
    for (auto& r : regions) {
        std::vector<double> sums(ch, 0.0);
        for (auto p : r.pixels) {
            if (p >= image.pixel_count()) throw InputError("region lies outside image bounds");
            for (int c = 0; c < ch; ++c) sums[c] += samples[static_cast<std::size_t>(p) * ch + c];
        }
        for (auto& s : sums) s /= static_cast<double>(std::max<std::size_t>(r.pixels.size(), 1));
        r.mean_intensity = std::move(sums);
    }
}

/// Fills background components that do not touch the border (4-connected
/// background, the dual of 8-connected foreground).
inline BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width(), h = mask.height();
    std::vector<std::uint8_t> outside(mask.size(), 0);
    std::vector<std::uint32_t> stack;
    auto seed = [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!mask.test(i) && !outside[i]) {
            outside[i] = 1;
            stack.push_back(static_cast<std::uint32_t>(i));
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    while (!stack.empty()) {
        const std::uint32_t p = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
        if (x > 0) seed(x - 1, y);
        if (x + 1 < w) seed(x + 1, y);
        if (y > 0) seed(x, y - 1);
        if (y + 1 < h) seed(x, y + 1);
    }
    BinaryMask out(w, h);
    for (std::size_t i = 0; i < mask.size(); ++i) out.set(i, !outside[i]);
    return out;
}

}  // namespace dropcell
