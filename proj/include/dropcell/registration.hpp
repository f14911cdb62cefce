#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dropcell/core/image.hpp"
#include "dropcell/core/parallel.hpp"

namespace dropcell::registration {

/// Raised when a frame has no intensity variation to register against.
class FeaturelessFrame : public std::runtime_error {
public:
    FeaturelessFrame() : std::runtime_error("featureless frame") {}
};

/// Translation of `moving` relative to the reference: positive dx means the
/// content moved right, positive dy means it moved down.
struct Shift {
    double dx = 0.0;
    double dy = 0.0;
    double confidence = 0.0;
};

struct ExposureResult {
    RasterImage image;
    std::vector<double> gains;
    std::vector<bool> skipped;  // channel mean < 1: gain left at 1
};

struct FrameWarning {
    std::size_t frame_index = 0;
    std::string message;
};

struct AlignedSequence {
    std::vector<RasterImage> frames;
    std::vector<Shift> shifts;
    std::vector<std::array<double, 3>> gains;
    std::vector<FrameWarning> warnings;
};

inline std::vector<double> channel_means(const RasterImage& image) {
    const int ch = image.channels();
    std::vector<double> sums(ch, 0.0);
    auto s = image.samples();
    for (std::size_t i = 0; i < s.size(); ++i) sums[i % ch] += s[i];
    for (auto& v : sums) v /= static_cast<double>(image.pixel_count());
    return sums;
}

/// Rescales each channel so its mean matches the reference channel mean.
inline ExposureResult normalize_exposure(const RasterImage& frame, const RasterImage& reference) {
    if (!frame.same_shape(reference)) throw InputError("exposure normalization needs equal shapes");
    const int ch = frame.channels();
    const auto fm = channel_means(frame);
    const auto rm = channel_means(reference);
    ExposureResult out{RasterImage(frame.width(), frame.height(), ch, 0, frame.pixel_pitch()),
                       std::vector<double>(ch, 1.0), std::vector<bool>(ch, false)};
    for (int c = 0; c < ch; ++c) {
        if (fm[c] < 1.0) out.skipped[c] = true;
        else out.gains[c] = rm[c] / fm[c];
    }
    auto src = frame.samples();
    auto dst = out.image.samples();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = clamp_sample(src[i] * out.gains[i % ch]);
    return out;
}

namespace detail {

// Gray as double with its global mean removed; returns variance via out-param.
inline cv::Mat centered_gray(const RasterImage& image, double& variance) {
    const int w = image.width(), h = image.height(), ch = image.channels();
    cv::Mat g(h, w, CV_64F);
    auto s = image.samples();
    double sum = 0.0;
    for (int y = 0; y < h; ++y) {
        auto* row = g.ptr<double>(y);
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            const std::size_t base = (static_cast<std::size_t>(y) * w + x) * ch;
            for (int c = 0; c < ch; ++c) v += s[base + c];
            row[x] = v / ch;
            sum += row[x];
        }
    }
    const double mean = sum / (static_cast<double>(w) * h);
    double ss = 0.0;
    g -= mean;
    for (int y = 0; y < h; ++y) {
        const auto* row = g.ptr<double>(y);
        for (int x = 0; x < w; ++x) ss += row[x] * row[x];
    }
    variance = ss / (static_cast<double>(w) * h);
    return g;
}

// Summed-area tables of v and v^2, (h+1) x (w+1).
struct Integrals {
    cv::Mat sum, sqsum;
    explicit Integrals(const cv::Mat& m) { cv::integral(m, sum, sqsum, CV_64F, CV_64F); }
    double rect(const cv::Mat& t, int x0, int y0, int x1, int y1) const {
        return t.at<double>(y1, x1) - t.at<double>(y0, x1) - t.at<double>(y1, x0) + t.at<double>(y0, x0);
    }
};

inline double parabolic_offset(double left, double center, double right) {
    const double denom = left - 2.0 * center + right;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace detail

/// Translation maximizing normalized cross-correlation over the overlap of the
/// two frames, searched over [-max_shift, max_shift]^2 (capped at half the
/// frame size) and refined by a separable parabolic fit around the peak.
/// The raw cross-correlation is computed for all shifts at once in the
/// frequency domain on zero-padded frames; overlap means and energies come
/// from summed-area tables, so each NCC value is exact over its overlap.
inline Shift estimate_translation(const RasterImage& reference, const RasterImage& moving,
                                  int max_shift = 64) {
    if (reference.width() != moving.width() || reference.height() != moving.height()) {
        throw InputError("registration needs frames of equal size");
    }
    if (max_shift < 0) throw InputError("max_shift must be >= 0");
    const int w = reference.width(), h = reference.height();
    double va = 0.0, vb = 0.0;
    const cv::Mat a = detail::centered_gray(reference, va);
    const cv::Mat b = detail::centered_gray(moving, vb);
    if (va < 1e-6 || vb < 1e-6) throw FeaturelessFrame();

    const int sx = std::min(max_shift, w / 2);
    const int sy = std::min(max_shift, h / 2);
    const int pw = cv::getOptimalDFTSize(w + sx);
    const int ph = cv::getOptimalDFTSize(h + sy);
    cv::Mat pa = cv::Mat::zeros(ph, pw, CV_64F), pb = cv::Mat::zeros(ph, pw, CV_64F);
    a.copyTo(pa(cv::Rect(0, 0, w, h)));
    b.copyTo(pb(cv::Rect(0, 0, w, h)));
    cv::Mat fa, fb, prod, corr;
    cv::dft(pa, fa, cv::DFT_COMPLEX_OUTPUT, h);
    cv::dft(pb, fb, cv::DFT_COMPLEX_OUTPUT, h);
    cv::mulSpectrums(fb, fa, prod, 0, true);
    cv::idft(prod, corr, cv::DFT_REAL_OUTPUT | cv::DFT_SCALE);

    const detail::Integrals ia(a), ib(b);
    const int gw = 2 * sx + 1, gh = 2 * sy + 1;
    std::vector<double> ncc(static_cast<std::size_t>(gw) * gh, -1.0);
    double best = -2.0;
    int bx = 0, by = 0;
    for (int dy = -sy; dy <= sy; ++dy) {
        for (int dx = -sx; dx <= sx; ++dx) {
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const double n = static_cast<double>(x1 - x0) * (y1 - y0);
            if (n < 1.0) continue;
            const double s_a = ia.rect(ia.sum, x0, y0, x1, y1);
            const double s_aa = ia.rect(ia.sqsum, x0, y0, x1, y1);
            const double s_b = ib.rect(ib.sum, x0 + dx, y0 + dy, x1 + dx, y1 + dy);
            const double s_bb = ib.rect(ib.sqsum, x0 + dx, y0 + dy, x1 + dx, y1 + dy);
            const double cross = corr.at<double>((dy + ph) % ph, (dx + pw) % pw);
            const double var_a = s_aa - s_a * s_a / n;
            const double var_b = s_bb - s_b * s_b / n;
            double v = -1.0;
            if (var_a > 1e-9 && var_b > 1e-9) v = (cross - s_a * s_b / n) / std::sqrt(var_a * var_b);
            ncc[static_cast<std::size_t>(dy + sy) * gw + (dx + sx)] = v;
            if (v > best) {
                best = v;
                bx = dx;
                by = dy;
            }
        }
    }
    auto at = [&](int dx, int dy) { return ncc[static_cast<std::size_t>(dy + sy) * gw + (dx + sx)]; };
    Shift s{double(bx), double(by), std::clamp(best, 0.0, 1.0)};
    if (bx > -sx && bx < sx) s.dx += detail::parabolic_offset(at(bx - 1, by), best, at(bx + 1, by));
    if (by > -sy && by < sy) s.dy += detail::parabolic_offset(at(bx, by - 1), best, at(bx, by + 1));
    return s;
}

/// Per-channel median, used to fill borders exposed by resampling.
inline std::vector<std::uint8_t> channel_medians(const RasterImage& image) {
    const int ch = image.channels();
    std::vector<std::array<std::size_t, 256>> hist(ch);
    for (auto& hh : hist) hh.fill(0);
    auto s = image.samples();
    for (std::size_t i = 0; i < s.size(); ++i) ++hist[i % ch][s[i]];
    std::vector<std::uint8_t> med(ch, 0);
    const std::size_t half = (image.pixel_count() + 1) / 2;
    for (int c = 0; c < ch; ++c) {
        std::size_t acc = 0;
        for (int v = 0; v < 256; ++v) {
            acc += hist[c][v];
            if (acc >= half) {
                med[c] = static_cast<std::uint8_t>(v);
                break;
            }
        }
    }
    return med;
}

/// Undoes `shift`: output(x, y) = image(x + dx, y + dy), bilinear, with
/// exposed borders set to the per-channel median.
inline RasterImage apply_translation(const RasterImage& image, const Shift& shift) {
    if (shift.dx == 0.0 && shift.dy == 0.0) return image;
    const int w = image.width(), h = image.height(), ch = image.channels();
    RasterImage out(w, h, ch, 0, image.pixel_pitch());
    const auto fill = channel_medians(image);
    const int ix = static_cast<int>(std::floor(shift.dx));
    const int iy = static_cast<int>(std::floor(shift.dy));
    const double fx = shift.dx - ix, fy = shift.dy - iy;
    const bool need_x = fx > 0.0, need_y = fy > 0.0;
    auto src = image.samples();
    auto dst = out.samples();
    for (int y = 0; y < h; ++y) {
        const int y0 = y + iy, y1 = need_y ? y0 + 1 : y0;
        const bool y_ok = y0 >= 0 && y1 < h;
        for (int x = 0; x < w; ++x) {
            const int x0 = x + ix, x1 = need_x ? x0 + 1 : x0;
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * ch;
            if (!y_ok || x0 < 0 || x1 >= w) {
                for (int c = 0; c < ch; ++c) dst[o + c] = fill[c];
                continue;
            }
            for (int c = 0; c < ch; ++c) {
                const double p00 = src[(static_cast<std::size_t>(y0) * w + x0) * ch + c];
                const double p01 = src[(static_cast<std::size_t>(y0) * w + x1) * ch + c];
                const double p10 = src[(static_cast<std::size_t>(y1) * w + x0) * ch + c];
                const double p11 = src[(static_cast<std::size_t>(y1) * w + x1) * ch + c];
                const double top = p00 + fx * (p01 - p00);
                const double bottom = p10 + fx * (p11 - p10);
                dst[o + c] = clamp_sample(top + fy * (bottom - top));
            }
        }
    }
    return out;
}

/// Registers every frame against frame 0 (not frame-to-frame): exposure is
/// normalized to frame 0 first, then the translation is estimated and undone.
/// Featureless frames pass through unaligned with a warning.
inline AlignedSequence align_sequence(const std::vector<RasterImage>& frames, int max_shift = 64,
                                      unsigned workers = default_workers()) {
    if (frames.size() < 2) throw InputError("alignment needs at least two frames");
    for (const auto& f : frames) {
        if (!f.same_shape(frames.front())) throw InputError("sequence frames differ in dimensions");
    }
    const std::size_t n = frames.size();
    AlignedSequence out;
    out.frames.resize(n);
    out.shifts.assign(n, Shift{0.0, 0.0, 1.0});
    out.gains.assign(n, {1.0, 1.0, 1.0});
    std::vector<std::string> warnings(n);
    out.frames[0] = frames[0];
    parallel_for(n - 1, workers, [&](std::size_t k) {
        const std::size_t i = k + 1;
        auto exposure = normalize_exposure(frames[i], frames[0]);
        for (std::size_t c = 0; c < exposure.gains.size() && c < 3; ++c) out.gains[i][c] = exposure.gains[c];
        try {
            out.shifts[i] = estimate_translation(frames[0], exposure.image, max_shift);
            out.frames[i] = apply_translation(exposure.image, out.shifts[i]);
        } catch (const FeaturelessFrame&) {
            out.shifts[i] = Shift{0.0, 0.0, 0.0};
            out.frames[i] = exposure.image;
            warnings[i] = "featureless frame; passed through unaligned";
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!warnings[i].empty()) out.warnings.push_back({i, warnings[i]});
    }
    return out;
}

}  // namespace dropcell::registration
