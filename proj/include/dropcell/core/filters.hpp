#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dropcell/core/image.hpp"

namespace dropcell {

/// Separable Gaussian blur with replicated borders, radius ceil(3 sigma).
/// sigma == 0 returns the input unchanged.
inline RasterImage gaussian_blur(const RasterImage& image, double sigma) {
    if (sigma < 0.0) throw InputError("gaussian sigma must be >= 0");
    if (sigma == 0.0) return image;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double k = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(k);
        total += k;
    }
    for (auto& k : kernel) k = static_cast<float>(k / total);

    const int w = image.width(), h = image.height(), ch = image.channels();
    auto src = image.samples();
    std::vector<float> tmp(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    acc += kernel[i + radius] * src[(static_cast<std::size_t>(y) * w + xx) * ch + c];
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
        }
    }
    RasterImage out(w, h, ch, 0, image.pixel_pitch());
    auto dst = out.samples();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
                }
                dst[(static_cast<std::size_t>(y) * w + x) * ch + c] = clamp_sample(acc);
            }
        }
    }
    return out;
}

inline std::array<std::uint64_t, 256> histogram(const RasterImage& gray) {
    std::array<std::uint64_t, 256> hist{};
    for (auto s : gray.samples()) ++hist[s];
    return hist;
}

/// Otsu threshold: foreground is `value > threshold`. Returns nullopt when no
/// split has positive between-class variance (blank or single-valued image).
/// When several thresholds tie for the maximum, the middle of the tied run is
/// returned so that two well separated modes split halfway between them.
inline std::optional<int> otsu_threshold(const std::array<std::uint64_t, 256>& hist) {
    double total = 0.0, sum_all = 0.0;
    for (int i = 0; i < 256; ++i) {
        total += static_cast<double>(hist[i]);
        sum_all += static_cast<double>(i) * static_cast<double>(hist[i]);
    }
    if (total == 0.0) return std::nullopt;

    double w0 = 0.0, sum0 = 0.0, best = 0.0;
    int first = -1, last = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += static_cast<double>(hist[t]);
        sum0 += static_cast<double>(t) * static_cast<double>(hist[t]);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        const double tol = 1e-9 * std::max(best, 1.0);
        if (between > best + tol) {
            best = between;
            first = last = t;
        } else if (first >= 0 && std::abs(between - best) <= tol && last == t - 1) {
            last = t;
        }
    }
    if (first < 0 || best <= 0.0) return std::nullopt;
    return (first + last) / 2;
}

inline BinaryMask threshold_above(const RasterImage& gray, int threshold) {
    if (gray.channels() != 1) throw InputError("threshold expects a grayscale image");
    BinaryMask mask(gray.width(), gray.height());
    auto s = gray.samples();
    for (std::size_t i = 0; i < s.size(); ++i) mask.set(i, s[i] > threshold);
    return mask;
}

}  // namespace dropcell
