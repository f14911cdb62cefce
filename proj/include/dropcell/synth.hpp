#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dropcell/core/contour.hpp"
#include "dropcell/core/image.hpp"

namespace dropcell::synth {

/// Scene that cannot be rendered with unambiguous ground truth.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Modality { brightfield, fluorescence };
enum class ShapeKind { disk, ellipse, star, bleb };

struct DyeSpec {
    std::string name;
    std::array<double, 3> od_vector{1.0, 0.0, 0.0};  // normalized before use
};

struct DropletSpec {
    Point2 center;
    double diameter = 100.0;
    std::vector<double> concentrations;  // one per scene dye, OD units along the unit vector
    double rim_darkness = 0.6;           // rim intensity = background * (1 - darkness)
    double rim_width = 3.0;
};

struct ShapeSpec {
    ShapeKind kind = ShapeKind::disk;
    double semi_axis_a = 0.0;  // ellipse
    double semi_axis_b = 0.0;
    int points = 5;            // star
    double inner_radius = 0.0;
    double rotation = 0.0;     // radians
    double t = 0.0;            // bleb morph parameter in [0, 1]
    int bleb_count = 5;
    double bleb_amplitude = 0.35;
};

struct CellSpec {
    Point2 center;
    double radius = 30.0;
    ShapeSpec shape;
    std::array<std::uint8_t, 3> color{0, 255, 0};
    double intensity = 1.0;
};

/// Small solid rectangle painted after the objects (debris, hot pixels).
struct SpeckleSpec {
    int x = 0;
    int y = 0;
    int width = 1;
    int height = 1;
    std::array<std::uint8_t, 3> color{0, 0, 0};
};

struct SceneSpec {
    Modality modality = Modality::brightfield;
    int width = 256;
    int height = 256;
    std::array<double, 3> background{230.0, 230.0, 230.0};
    double texture_amplitude = 0.0;  // relative sinusoidal modulation of the background
    double texture_period = 48.0;
    std::vector<DyeSpec> dyes;
    std::vector<DropletSpec> droplets;
    std::vector<CellSpec> cells;
    std::vector<SpeckleSpec> speckles;
    double noise_sigma = 0.0;
    double exposure_gain = 1.0;
    std::vector<double> frame_gains;  // cycled per frame when non-empty
    double gain_jitter = 0.0;         // uniform relative jitter when frame_gains is empty
    Point2 frame_shift;               // per-frame linear drift
    std::vector<Point2> frame_shifts; // explicit per-frame offsets, override drift
    std::uint64_t seed = 1;
    std::optional<double> pixel_pitch;
};

struct ObjectTruth {
    std::string kind;  // "droplet" or "cell"
    Point2 centroid;
    double area = 0.0;
    double perimeter = 0.0;
    double diameter = 0.0;
    double circularity = 0.0;
    std::vector<std::pair<std::string, double>> dye_fractions;
    bool empty = false;
    std::string viability;  // live / dead / ambiguous for cells
};

struct FrameTruth {
    Point2 shift;
    double gain = 1.0;
};

struct GroundTruth {
    std::vector<ObjectTruth> objects;
    std::vector<FrameTruth> frames;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Analytic geometry

/// Ramanujan's second approximation of the ellipse perimeter.
inline double ellipse_perimeter(double a, double b) {
    const double h = (a - b) * (a - b) / ((a + b) * (a + b));
    return std::numbers::pi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

inline std::vector<Point2> star_polygon(const CellSpec& cell) {
    const int k = std::max(2, cell.shape.points);
    std::vector<Point2> poly;
    for (int i = 0; i < 2 * k; ++i) {
        const double ang = cell.shape.rotation + std::numbers::pi * i / k;
        const double r = (i % 2 == 0) ? cell.radius : cell.shape.inner_radius;
        poly.push_back({cell.center.x + r * std::cos(ang), cell.center.y + r * std::sin(ang)});
    }
    return poly;
}

/// Radius of the bleb-morph outline at angle theta: a circle that grows
/// `bleb_count` rounded protrusions as t goes from 0 to 1.
inline double bleb_radius(const CellSpec& cell, double theta) {
    const auto& s = cell.shape;
    const double c = std::cos(s.bleb_count * (theta - s.rotation));
    const double bump = c > 0.0 ? c * c * c * c : 0.0;
    return cell.radius * (1.0 + s.t * s.bleb_amplitude * bump);
}

inline constexpr int bleb_polygon_vertices = 1440;

inline std::vector<Point2> bleb_polygon(const CellSpec& cell) {
    std::vector<Point2> poly;
    poly.reserve(bleb_polygon_vertices);
    for (int i = 0; i < bleb_polygon_vertices; ++i) {
        const double th = 2.0 * std::numbers::pi * i / bleb_polygon_vertices;
        const double r = bleb_radius(cell, th);
        poly.push_back({cell.center.x + r * std::cos(th), cell.center.y + r * std::sin(th)});
    }
    return poly;
}

/// Largest distance from the cell center to its outline.
inline double cell_extent(const CellSpec& cell) {
    switch (cell.shape.kind) {
        case ShapeKind::ellipse: return std::max(cell.shape.semi_axis_a, cell.shape.semi_axis_b);
        case ShapeKind::star: return std::max(cell.radius, cell.shape.inner_radius);
        case ShapeKind::bleb: return cell.radius * (1.0 + std::abs(cell.shape.t * cell.shape.bleb_amplitude));
        default: return cell.radius;
    }
}

inline std::pair<double, double> cell_area_perimeter(const CellSpec& cell) {
    const auto& s = cell.shape;
    switch (s.kind) {
        case ShapeKind::ellipse:
            return {std::numbers::pi * s.semi_axis_a * s.semi_axis_b, ellipse_perimeter(s.semi_axis_a, s.semi_axis_b)};
        case ShapeKind::star: {
            auto p = star_polygon(cell);
            return {polygon_area(p), polygon_length(p)};
        }
        case ShapeKind::bleb: {
            auto p = bleb_polygon(cell);
            return {polygon_area(p), polygon_length(p)};
        }
        default:
            return {std::numbers::pi * cell.radius * cell.radius, 2.0 * std::numbers::pi * cell.radius};
    }
}

namespace detail {

inline bool point_in_polygon(const std::vector<Point2>& poly, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

// Inside test for one cell, in scene coordinates relative to the unshifted scene.
class CellShape {
public:
    explicit CellShape(const CellSpec& cell) : cell_(cell) {
        if (cell.shape.kind == ShapeKind::star) poly_ = star_polygon(cell);
    }
    bool contains(double x, double y) const {
        const double dx = x - cell_.center.x, dy = y - cell_.center.y;
        switch (cell_.shape.kind) {
            case ShapeKind::ellipse: {
                const double c = std::cos(cell_.shape.rotation), s = std::sin(cell_.shape.rotation);
                const double u = (dx * c + dy * s) / cell_.shape.semi_axis_a;
                const double v = (-dx * s + dy * c) / cell_.shape.semi_axis_b;
                return u * u + v * v <= 1.0;
            }
            case ShapeKind::star: return point_in_polygon(poly_, x, y);
            case ShapeKind::bleb: {
                const double r = std::hypot(dx, dy);
                return r <= bleb_radius(cell_, std::atan2(dy, dx));
            }
            default: return dx * dx + dy * dy <= cell_.radius * cell_.radius;
        }
    }

private:
    const CellSpec& cell_;
    std::vector<Point2> poly_;
};

inline constexpr int supersample = 4;

inline std::array<double, 3> unit(const std::array<double, 3>& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(n > 0.0)) throw SpecError("dye OD vector must be non-zero");
    return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation and truth

inline Point2 frame_offset(const SceneSpec& spec, std::size_t frame) {
    if (!spec.frame_shifts.empty()) return spec.frame_shifts[frame % spec.frame_shifts.size()];
    return {spec.frame_shift.x * static_cast<double>(frame), spec.frame_shift.y * static_cast<double>(frame)};
}

inline void validate(const SceneSpec& spec, std::size_t n_frames = 1) {
    if (spec.width < 1 || spec.height < 1) throw SpecError("canvas must be at least 1x1");
    if (spec.noise_sigma < 0.0) throw SpecError("noise_sigma must be >= 0");
    if (!(spec.exposure_gain > 0.0)) throw SpecError("exposure_gain must be > 0");
    for (double g : spec.frame_gains) {
        if (!(g > 0.0)) throw SpecError("frame gains must be > 0");
    }
    if (spec.gain_jitter < 0.0 || spec.gain_jitter >= 1.0) throw SpecError("gain_jitter must be in [0, 1)");
    if (spec.dyes.size() > 3) throw SpecError("at most three dyes");
    // Each modality renders one kind of object; the other kind would appear in the truth but not the pixels.
    if (spec.modality == Modality::brightfield && !spec.cells.empty()) {
        throw SpecError("cells are not rendered in a bright-field scene");
    }
    if (spec.modality == Modality::fluorescence && !spec.droplets.empty()) {
        throw SpecError("droplets are not rendered in a fluorescence scene");
    }

    double min_dx = 0.0, max_dx = 0.0, min_dy = 0.0, max_dy = 0.0;
    for (std::size_t f = 0; f < n_frames; ++f) {
        const auto o = frame_offset(spec, f);
        min_dx = std::min(min_dx, o.x);
        max_dx = std::max(max_dx, o.x);
        min_dy = std::min(min_dy, o.y);
        max_dy = std::max(max_dy, o.y);
    }
    auto inside = [&](Point2 c, double r) {
        return c.x - r + min_dx >= 0.0 && c.y - r + min_dy >= 0.0 && c.x + r + max_dx <= spec.width &&
               c.y + r + max_dy <= spec.height;
    };
    for (const auto& d : spec.droplets) {
        if (!(d.diameter > 0.0)) throw SpecError("droplet diameter must be > 0");
        if (d.concentrations.size() > spec.dyes.size()) throw SpecError("droplet has more concentrations than dyes");
        for (double c : d.concentrations) {
            if (c < 0.0) throw SpecError("dye concentrations must be >= 0");
        }
        if (!inside(d.center, d.diameter / 2.0)) throw SpecError("droplet extends outside the canvas");
    }
    for (std::size_t i = 0; i < spec.droplets.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.droplets.size(); ++j) {
            const auto& a = spec.droplets[i];
            const auto& b = spec.droplets[j];
            if (std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) < (a.diameter + b.diameter) / 2.0 + 1.0) {
                throw SpecError("droplets overlap");
            }
        }
    }
    for (const auto& c : spec.cells) {
        if (!(c.radius > 0.0)) throw SpecError("cell radius must be > 0");
        if (c.shape.kind == ShapeKind::ellipse && !(c.shape.semi_axis_a > 0.0 && c.shape.semi_axis_b > 0.0)) {
            throw SpecError("ellipse needs positive semi-axes");
        }
        if (c.shape.kind == ShapeKind::star && !(c.shape.inner_radius > 0.0)) {
            throw SpecError("star needs a positive inner radius");
        }
        if (c.intensity < 0.0 || c.intensity > 1.0) throw SpecError("cell intensity must be in [0, 1]");
        if (!inside(c.center, cell_extent(c))) throw SpecError("cell extends outside the canvas");
    }
    for (std::size_t i = 0; i < spec.cells.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.cells.size(); ++j) {
            const auto& a = spec.cells[i];
            const auto& b = spec.cells[j];
            if (std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) <
                cell_extent(a) + cell_extent(b) + 1.0) {
                throw SpecError("cells overlap");
            }
        }
    }
    for (const auto& s : spec.speckles) {
        if (s.width < 1 || s.height < 1 || s.x < 0 || s.y < 0 || s.x + s.width > spec.width ||
            s.y + s.height > spec.height) {
            throw SpecError("speckle outside the canvas");
        }
    }
}

inline std::string viability_of(const std::array<std::uint8_t, 3>& color) {
    if (color[1] >= 2 * color[0]) return "live";
    if (color[0] >= 2 * color[1]) return "dead";
    return "ambiguous";
}

/// Analytic truth for the unshifted scene; never derived from pixels.
inline std::vector<ObjectTruth> object_truth(const SceneSpec& spec) {
    std::vector<ObjectTruth> out;
    for (const auto& d : spec.droplets) {
        ObjectTruth t;
        t.kind = "droplet";
        t.centroid = d.center;
        const double r = d.diameter / 2.0;
        t.area = std::numbers::pi * r * r;
        t.perimeter = 2.0 * std::numbers::pi * r;
        t.diameter = d.diameter;
        t.circularity = 1.0;
        double total = 0.0;
        for (double c : d.concentrations) total += c;
        t.empty = total <= 0.0;
        for (std::size_t i = 0; i < spec.dyes.size(); ++i) {
            const double c = i < d.concentrations.size() ? d.concentrations[i] : 0.0;
            t.dye_fractions.emplace_back(spec.dyes[i].name, t.empty ? 0.0 : c / total);
        }
        out.push_back(std::move(t));
    }
    for (const auto& c : spec.cells) {
        ObjectTruth t;
        t.kind = "cell";
        t.centroid = c.center;
        if (c.shape.kind == ShapeKind::star) {
            // Polygon centroid of the star is its center by symmetry.
            t.centroid = c.center;
        }
        const auto [area, perimeter] = cell_area_perimeter(c);
        t.area = area;
        t.perimeter = perimeter;
        t.diameter = 2.0 * std::sqrt(area / std::numbers::pi);
        t.circularity = 4.0 * std::numbers::pi * area / (perimeter * perimeter);
        t.viability = viability_of(c.color);
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::array<double, 3> background_at(const SceneSpec& spec, double x, double y) {
    double m = 1.0;
    if (spec.texture_amplitude != 0.0) {
        const double k = 2.0 * std::numbers::pi / spec.texture_period;
        m += spec.texture_amplitude * std::sin(k * x) * std::sin(k * 0.8 * y + 0.7);
    }
    return {spec.background[0] * m, spec.background[1] * m, spec.background[2] * m};
}

// Color of one scene point (unshifted coordinates) in bright field.
inline std::array<double, 3> brightfield_at(const SceneSpec& spec, const std::vector<std::array<double, 3>>& dyes,
                                            bool with_droplets, double x, double y) {
    const auto bg = background_at(spec, x, y);
    if (!with_droplets) return bg;
    for (const auto& d : spec.droplets) {
        const double r = d.diameter / 2.0;
        const double dist2 = (x - d.center.x) * (x - d.center.x) + (y - d.center.y) * (y - d.center.y);
        if (dist2 > r * r) continue;
        const double inner = std::max(0.0, r - d.rim_width);
        if (dist2 > inner * inner) {
            return {bg[0] * (1.0 - d.rim_darkness), bg[1] * (1.0 - d.rim_darkness), bg[2] * (1.0 - d.rim_darkness)};
        }
        std::array<double, 3> out = bg;
        for (int c = 0; c < 3; ++c) {
            double od = 0.0;
            for (std::size_t i = 0; i < d.concentrations.size(); ++i) od += d.concentrations[i] * dyes[i][c];
            out[c] = bg[c] * std::pow(10.0, -od);
        }
        return out;
    }
    return bg;
}

inline bool near_boundary(const SceneSpec& spec, double x, double y) {
    // Pixel center (x, y) within ~1 px of any droplet circle or rim circle.
    for (const auto& d : spec.droplets) {
        const double r = d.diameter / 2.0;
        const double dist = std::hypot(x - d.center.x, y - d.center.y);
        if (std::abs(dist - r) < 1.0) return true;
        if (std::abs(dist - std::max(0.0, r - d.rim_width)) < 1.0) return true;
    }
    return false;
}

inline RasterImage finish_frame(const SceneSpec& spec, std::vector<double>& linear, int channels, double gain,
                                std::uint64_t noise_seed) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    RasterImage img(spec.width, spec.height, channels, 0, spec.pixel_pitch);
    auto dst = img.samples();
    for (std::size_t i = 0; i < linear.size(); ++i) {
        double v = linear[i] * gain;
        if (spec.noise_sigma > 0.0) v += noise(rng);
        dst[i] = clamp_sample(v);
    }
    return img;
}

inline std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame, std::uint64_t stream) {
    return seed * 0x9E3779B97F4A7C15ULL + (static_cast<std::uint64_t>(frame) + 1) * 0xBF58476D1CE4E5B9ULL + stream;
}

inline RasterImage render_brightfield_frame(const SceneSpec& spec, Point2 offset, double gain,
                                            std::uint64_t noise_seed, bool with_objects) {
    std::vector<std::array<double, 3>> dyes;
    for (const auto& d : spec.dyes) dyes.push_back(unit(d.od_vector));
    const int w = spec.width, h = spec.height;
    std::vector<double> linear(static_cast<std::size_t>(w) * h * 3);
    constexpr int ss = supersample;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double cx = x + 0.5 - offset.x, cy = y + 0.5 - offset.y;
            std::array<double, 3> acc{};
            if (with_objects && near_boundary(spec, cx, cy)) {
                for (int j = 0; j < ss; ++j) {
                    for (int i = 0; i < ss; ++i) {
                        const auto c = brightfield_at(spec, dyes, true, x + (i + 0.5) / ss - offset.x,
                                                      y + (j + 0.5) / ss - offset.y);
                        for (int k = 0; k < 3; ++k) acc[k] += c[k];
                    }
                }
                for (auto& a : acc) a /= ss * ss;
            } else {
                acc = brightfield_at(spec, dyes, with_objects, cx, cy);
            }
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
            for (int k = 0; k < 3; ++k) linear[o + k] = acc[k];
        }
    }
    if (with_objects) {
        for (const auto& s : spec.speckles) {
            for (int y = s.y; y < s.y + s.height; ++y) {
                for (int x = s.x; x < s.x + s.width; ++x) {
                    for (int k = 0; k < 3; ++k) linear[(static_cast<std::size_t>(y) * w + x) * 3 + k] = s.color[k];
                }
            }
        }
    }
    return finish_frame(spec, linear, 3, gain, noise_seed);
}

inline RasterImage render_fluorescence_frame(const SceneSpec& spec, Point2 offset, double gain,
                                             std::uint64_t noise_seed) {
    const int w = spec.width, h = spec.height;
    std::vector<double> linear(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < linear.size(); ++i) linear[i] = spec.background[i % 3];
    constexpr int ss = supersample;
    for (const auto& cell : spec.cells) {
        const CellShape shape(cell);
        const double ext = cell_extent(cell);
        const int x0 = std::max(0, static_cast<int>(std::floor(cell.center.x + offset.x - ext)) - 1);
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cell.center.x + offset.x + ext)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(cell.center.y + offset.y - ext)) - 1);
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cell.center.y + offset.y + ext)) + 1);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                int hits = 0;
                for (int j = 0; j < ss; ++j) {
                    for (int i = 0; i < ss; ++i) {
                        if (shape.contains(x + (i + 0.5) / ss - offset.x, y + (j + 0.5) / ss - offset.y)) ++hits;
                    }
                }
                if (hits == 0) continue;
                const double cover = static_cast<double>(hits) / (ss * ss);
                const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
                for (int k = 0; k < 3; ++k) {
                    linear[o + k] = linear[o + k] * (1.0 - cover) + cover * cell.color[k] * cell.intensity;
                }
            }
        }
    }
    for (const auto& s : spec.speckles) {
        for (int y = s.y; y < s.y + s.height; ++y) {
            for (int x = s.x; x < s.x + s.width; ++x) {
                for (int k = 0; k < 3; ++k) linear[(static_cast<std::size_t>(y) * w + x) * 3 + k] = s.color[k];
            }
        }
    }
    return finish_frame(spec, linear, 3, gain, noise_seed);
}

inline std::vector<double> frame_gains(const SceneSpec& spec, std::size_t n) {
    std::vector<double> gains(n, spec.exposure_gain);
    if (!spec.frame_gains.empty()) {
        for (std::size_t i = 0; i < n; ++i) gains[i] = spec.frame_gains[i % spec.frame_gains.size()];
    } else if (spec.gain_jitter > 0.0) {
        std::mt19937_64 rng(frame_seed(spec.seed, 0, 0x6A09E667F3BCC909ULL));
        std::uniform_real_distribution<double> u(-spec.gain_jitter, spec.gain_jitter);
        for (std::size_t i = 1; i < n; ++i) gains[i] = spec.exposure_gain * (1.0 + u(rng));
    }
    return gains;
}

}  // namespace detail

/// Renders the scene at frame offset `offset` (content moved by +offset).
inline RasterImage render_frame(const SceneSpec& spec, std::size_t frame_index, Point2 offset, double gain) {
    const auto seed = detail::frame_seed(spec.seed, frame_index, 1);
    if (spec.modality == Modality::fluorescence) return detail::render_fluorescence_frame(spec, offset, gain, seed);
    return detail::render_brightfield_frame(spec, offset, gain, seed, true);
}

/// Droplet-free bright-field frame with its own noise stream, for background modeling.
inline RasterImage render_background(const SceneSpec& spec, std::size_t frame_index) {
    validate(spec);
    const auto seed = detail::frame_seed(spec.seed, frame_index, 2);
    return detail::render_brightfield_frame(spec, {0.0, 0.0}, spec.exposure_gain, seed, false);
}

inline std::pair<RasterImage, GroundTruth> render_brightfield(const SceneSpec& spec) {
    validate(spec);
    GroundTruth truth{object_truth(spec), {FrameTruth{{0.0, 0.0}, spec.exposure_gain}}, spec.seed};
    const auto seed = detail::frame_seed(spec.seed, 0, 1);
    return {detail::render_brightfield_frame(spec, {0.0, 0.0}, spec.exposure_gain, seed, true), std::move(truth)};
}

inline std::pair<RasterImage, GroundTruth> render_fluorescence(const SceneSpec& spec) {
    validate(spec);
    GroundTruth truth{object_truth(spec), {FrameTruth{{0.0, 0.0}, spec.exposure_gain}}, spec.seed};
    const auto seed = detail::frame_seed(spec.seed, 0, 1);
    return {detail::render_fluorescence_frame(spec, {0.0, 0.0}, spec.exposure_gain, seed), std::move(truth)};
}

/// Frame i shows the static scene moved by frame_offset(i), scaled by that
/// frame's gain, with independent seeded noise. Frame 0 equals the static render.
inline std::pair<std::vector<RasterImage>, GroundTruth> render_sequence(const SceneSpec& spec, std::size_t n_frames) {
    if (n_frames < 1) throw SpecError("sequence needs at least one frame");
    validate(spec, n_frames);
    GroundTruth truth{object_truth(spec), {}, spec.seed};
    const auto gains = detail::frame_gains(spec, n_frames);
    std::vector<RasterImage> frames;
    frames.reserve(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const Point2 off = frame_offset(spec, i);
        truth.frames.push_back({off, gains[i]});
        frames.push_back(render_frame(spec, i, off, gains[i]));
    }
    return {std::move(frames), std::move(truth)};
}

}  // namespace dropcell::synth
