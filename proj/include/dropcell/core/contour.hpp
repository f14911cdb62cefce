#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "dropcell/core/image.hpp"

namespace dropcell {

enum class Connectivity { four = 4, eight = 8 };

/// Boundary corner on the pixel-edge (crack) grid. `convex` is true when the
/// region turns outward at the corner.
struct CrackCorner {
    int x = 0;
    int y = 0;
    int in_dx = 0;
    int in_dy = 0;
    bool convex = true;
};

namespace detail {

// Local occupancy grid over the region bounding box plus a one-pixel frame.
class LocalGrid {
public:
    LocalGrid(std::span<const std::uint32_t> pixels, int image_width) {
        int minx = INT32_MAX, miny = INT32_MAX, maxx = INT32_MIN, maxy = INT32_MIN;
        for (auto p : pixels) {
            int x = static_cast<int>(p % image_width);
            int y = static_cast<int>(p / image_width);
            minx = std::min(minx, x);
            maxx = std::max(maxx, x);
            miny = std::min(miny, y);
            maxy = std::max(maxy, y);
        }
        ox_ = minx - 1;
        oy_ = miny - 1;
        w_ = maxx - minx + 3;
        h_ = maxy - miny + 3;
        cells_.assign(static_cast<std::size_t>(w_) * h_, 0);
        for (auto p : pixels) {
            int x = static_cast<int>(p % image_width) - ox_;
            int y = static_cast<int>(p / image_width) - oy_;
            cells_[static_cast<std::size_t>(y) * w_ + x] = 1;
        }
    }

    // Global pixel coordinates.
    bool has(int x, int y) const {
        x -= ox_;
        y -= oy_;
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return false;
        return cells_[static_cast<std::size_t>(y) * w_ + x] != 0;
    }

private:
    int ox_ = 0, oy_ = 0, w_ = 0, h_ = 0;
    std::vector<std::uint8_t> cells_;
};

inline double cross(const Point2& a, const Point2& b, const Point2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

}  // namespace detail

/// Traces the outer pixel-edge boundary of a pixel set, returning only the
/// corners where the boundary turns. The traversal keeps the region on the
/// right (clockwise on screen) and starts at the top-left corner of the first
/// pixel in scan order. Holes are not traced.
inline std::vector<CrackCorner> trace_crack_corners(std::span<const std::uint32_t> pixels,
                                                    int image_width,
                                                    Connectivity conn = Connectivity::eight) {
    std::vector<CrackCorner> corners;
    if (pixels.empty()) return corners;
    detail::LocalGrid grid(pixels, image_width);

    std::uint32_t first = *std::min_element(pixels.begin(), pixels.end());
    const int sx = static_cast<int>(first % image_width);
    const int sy = static_cast<int>(first / image_width);

    corners.push_back({sx, sy, 0, -1, true});
    int vx = sx, vy = sy, dx = 1, dy = 0;
    // Each boundary edge is visited at most once per side; cap guards against
    // malformed input looping forever.
    const std::size_t cap = 4 * pixels.size() + 8;
    for (std::size_t step = 0; step < cap; ++step) {
        vx += dx;
        vy += dy;
        const int rx = -dy, ry = dx;
        const bool ahead_right = grid.has(vx + (dx + rx - 1) / 2, vy + (dy + ry - 1) / 2);
        const bool ahead_left = grid.has(vx + (dx - rx - 1) / 2, vy + (dy - ry - 1) / 2);

        int turn = 0;  // +1 right (convex), -1 left (concave)
        if (conn == Connectivity::eight) {
            if (ahead_left) turn = -1;
            else if (!ahead_right) turn = 1;
        } else {
            if (!ahead_right) turn = 1;
            else if (ahead_left) turn = -1;
        }

        if (vx == sx && vy == sy) break;
        if (turn != 0) corners.push_back({vx, vy, dx, dy, turn > 0});
        if (turn > 0) {
            int ndx = -dy, ndy = dx;
            dx = ndx;
            dy = ndy;
        } else if (turn < 0) {
            int ndx = dy, ndy = -dx;
            dx = ndx;
            dy = ndy;
        }
    }
    return corners;
}

/// Minimum-perimeter polygon of the pixel set: the shortest closed path that
/// encloses every member pixel square and stays inside the one-pixel band
/// bounded by the mirrored concave corners. Vertices lie on pixel corners.
///
/// Straight pixel edges are kept exactly (an s x s square has perimeter 4s),
/// digitization staircases collapse to their underlying slope, and because the
/// polygon contains the pixel set its isoperimetric ratio never exceeds 1.
inline std::vector<Point2> minimum_perimeter_polygon(std::span<const CrackCorner> corners) {
    std::vector<Point2> mpp;
    const std::size_t n = corners.size();
    if (n == 0) return mpp;

    std::vector<Point2> v(n);
    std::vector<bool> convex(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = corners[i];
        convex[i] = c.convex;
        if (c.convex) {
            v[i] = {double(c.x), double(c.y)};
        } else {
            // Diagonal mirror through the outside pixel at the concave corner.
            v[i] = {double(c.x - c.in_dx + c.in_dy), double(c.y - c.in_dy - c.in_dx)};
        }
    }
    auto at = [&](std::size_t k) -> const Point2& { return v[k % n]; };

    mpp.push_back(v[0]);
    std::size_t last = 0, wc = 0, bc = 0;
    std::size_t k = 1;
    constexpr double eps = 1e-12;
    while (k <= n) {
        const Point2& p = at(k);
        if (detail::cross(at(last), at(wc), p) > eps) {
            last = wc;
            mpp.push_back(at(last));
            wc = bc = last;
            k = last + 1;
            continue;
        }
        if (detail::cross(at(last), at(bc), p) < -eps) {
            last = bc;
            mpp.push_back(at(last));
            wc = bc = last;
            k = last + 1;
            continue;
        }
        if (k == n) break;
        if (convex[k % n]) wc = k;
        else bc = k;
        ++k;
    }
    // The closing vertex is v[0] itself when the last funnel step lands on it.
    if (mpp.size() > 1 && mpp.back() == mpp.front()) mpp.pop_back();
    return mpp;
}

inline double polygon_length(std::span<const Point2> poly) {
    if (poly.size() < 2) return 0.0;
    double len = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        len += std::hypot(b.x - a.x, b.y - a.y);
    }
    return len;
}

/// Shoelace area (absolute value).
inline double polygon_area(std::span<const Point2> poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        s += a.x * b.y - b.x * a.y;
    }
    return std::abs(s) * 0.5;
}

/// Closed boundary polygon of a region, with its arc length written back to
/// `region.perimeter`. A single pixel yields its unit square (perimeter 4).
inline std::vector<Point2> trace_contour(Region& region, const BinaryMask& mask,
                                         Connectivity conn = Connectivity::eight) {
    if (region.pixels.empty()) throw InputError("region has no pixels");
    for (auto p : region.pixels) {
        if (p >= mask.size() || !mask.test(p)) throw InputError("region is not part of mask");
    }
    auto corners = trace_crack_corners(region.pixels, mask.width(), conn);
    auto poly = minimum_perimeter_polygon(corners);
    region.perimeter = polygon_length(poly);
    region.contour = poly;
    return poly;
}

/// 4*pi*area / perimeter^2, unclamped.
inline double circularity(double area, double perimeter) {
    if (!(area > 0.0) || !(perimeter > 0.0)) {
        throw DomainError("circularity requires positive area and perimeter");
    }
    return 4.0 * std::numbers::pi * area / (perimeter * perimeter);
}

}  // namespace dropcell
