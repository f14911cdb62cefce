#pragma once

#include <opencv2/imgproc.hpp>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dropcell/core/image.hpp"
#include "dropcell/pipeline/image_io.hpp"

namespace dropcell::pipeline {

struct OverlayItem {
    std::vector<Point2> contour;  // pixel-edge coordinates, as traced
    Point2 centroid;
    std::string label;
};

inline constexpr std::array<std::uint8_t, 3> overlay_stroke{255, 0, 255};

/// RGB copy of `frame` with contours stroked, labels at centroids and a header
/// line in the top-left corner. Gray frames are expanded to RGB.
inline RasterImage emit_overlay(const RasterImage& frame, const std::vector<OverlayItem>& items,
                                const std::string& header) {
    cv::Mat rgb;
    {
        cv::Mat bgr = to_mat(frame);
        if (frame.channels() == 1) cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
        else cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    }
    const cv::Scalar stroke(overlay_stroke[0], overlay_stroke[1], overlay_stroke[2]);
    for (const auto& item : items) {
        std::vector<cv::Point> poly;
        poly.reserve(item.contour.size());
        // Contour vertices sit on pixel corners; step half a pixel toward the
        // centroid so the stroke runs through the boundary pixels themselves.
        for (const auto& p : item.contour) {
            const double x = p.x < item.centroid.x ? p.x + 0.5 : p.x - 0.5;
            const double y = p.y < item.centroid.y ? p.y + 0.5 : p.y - 0.5;
            poly.emplace_back(static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)));
        }
        if (!poly.empty()) cv::polylines(rgb, poly, true, stroke, 1, cv::LINE_8);
        if (!item.label.empty()) {
            int baseline = 0;
            const auto size = cv::getTextSize(item.label, cv::FONT_HERSHEY_SIMPLEX, 0.35, 1, &baseline);
            const cv::Point at(static_cast<int>(item.centroid.x) - size.width / 2,
                               static_cast<int>(item.centroid.y) + size.height / 2);
            cv::putText(rgb, item.label, at, cv::FONT_HERSHEY_SIMPLEX, 0.35, stroke, 1, cv::LINE_AA);
        }
    }
    if (!header.empty()) {
        cv::putText(rgb, header, cv::Point(4, 14), cv::FONT_HERSHEY_SIMPLEX, 0.45, stroke, 1, cv::LINE_AA);
    }
    std::vector<std::uint8_t> samples(rgb.data, rgb.data + rgb.total() * 3);
    return RasterImage(rgb.cols, rgb.rows, 3, std::move(samples), frame.pixel_pitch());
}

}  // namespace dropcell::pipeline
