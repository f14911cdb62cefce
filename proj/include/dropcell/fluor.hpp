#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dropcell/core/contour.hpp"
#include "dropcell/core/image.hpp"
#include "dropcell/core/labeling.hpp"

namespace dropcell::fluor {

struct Hsv {
    double hue = 0.0;         // degrees [0, 360)
    double saturation = 0.0;  // [0, 1]
    double value = 0.0;       // [0, 1]
};

/// Hexcone RGB -> HSV. Achromatic pixels get hue 0 and saturation 0.
/// Hue is 60 * n / delta for an integer n, divided once, so it is the
/// correctly rounded exact value and compares exactly with integer band edges.
inline Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int mx = std::max({r, g, b});
    const int mn = std::min({r, g, b});
    Hsv out;
    out.value = mx / 255.0;
    if (mx == 0 || mx == mn) return out;
    const int delta = mx - mn;
    out.saturation = static_cast<double>(delta) / mx;
    int n;
    if (mx == r) n = g >= b ? g - b : 6 * delta + g - b;
    else if (mx == g) n = 2 * delta + b - r;
    else n = 4 * delta + r - g;
    out.hue = 60.0 * n / delta;
    return out;
}

/// Hue interval [lo, hi) in degrees, wrapping when lo > hi (350 -> 10);
/// `reflected` bands are (lo, hi] instead. lo == hi (mod 360) accepts every hue.
/// Achromatic pixels have no meaningful hue and only match full-hue bands.
struct HsvBand {
    double hue_lo = 0.0;
    double hue_hi = 360.0;
    double min_saturation = 0.0;
    double min_value = 0.0;
    bool reflected = false;

    void validate() const {
        auto in_range = [](double h) { return h >= 0.0 && h <= 360.0; };
        if (!in_range(hue_lo) || !in_range(hue_hi)) throw InputError("hue bounds must lie in [0, 360]");
        if (min_saturation < 0.0 || min_saturation > 1.0 || min_value < 0.0 || min_value > 1.0) {
            throw InputError("saturation/value thresholds must lie in [0, 1]");
        }
    }

    // An edge at 360 is the same angle as 0.
    static double edge(double h) { return h >= 360.0 ? h - 360.0 : h; }

    bool full() const { return edge(hue_lo) == edge(hue_hi); }

    bool contains_hue(double h) const {
        if (full()) return true;
        const double lo = edge(hue_lo), hi = edge(hue_hi);
        const bool above = reflected ? h > lo : h >= lo;
        const bool below = reflected ? h <= hi : h < hi;
        return lo < hi ? above && below : above || below;
    }

    bool contains(const Hsv& p) const {
        if (p.saturation < min_saturation || p.value < min_value) return false;
        if (p.saturation == 0.0) return full();
        return contains_hue(p.hue);
    }

    /// The band that selects, in transfer_channel(image, mapping), exactly the
    /// pixels this band selects in `image`. A channel permutation leaves
    /// saturation and value alone and moves hue by a rotation (even
    /// permutations) or a reflection (odd ones).
    HsvBand transferred(const std::array<int, 3>& mapping) const {
        std::array<int, 3> inverse{-1, -1, -1};
        for (int c = 0; c < 3; ++c) {
            if (mapping[c] < 0 || mapping[c] > 2 || inverse[mapping[c]] != -1) {
                throw InputError("band transfer needs a channel permutation");
            }
            inverse[mapping[c]] = c;
        }
        int inversions = 0;
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) inversions += mapping[i] > mapping[j];
        }
        auto wrap = [](double h) {
            h = std::fmod(h, 360.0);
            return h < 0.0 ? h + 360.0 : h;
        };
        const double red_to = 120.0 * inverse[0];  // where pure red lands
        HsvBand b = *this;
        if (full()) return b;
        if (inversions % 2 == 0) {
            b.hue_lo = wrap(hue_lo + red_to);
            b.hue_hi = wrap(hue_hi + red_to);
        } else {
            b.hue_lo = wrap(red_to - hue_hi);
            b.hue_hi = wrap(red_to - hue_lo);
            b.reflected = !reflected;
        }
        return b;
    }
};

inline HsvBand default_green_band() { return {90.0, 150.0, 0.3, 0.2}; }
inline HsvBand default_red_band() { return {330.0, 30.0, 0.3, 0.2}; }

enum class Viability { live, dead, ambiguous };

inline const char* to_string(Viability v) {
    switch (v) {
        case Viability::live: return "live";
        case Viability::dead: return "dead";
        default: return "ambiguous";
    }
}

struct Morphometrics {
    double area_px = 0.0;
    double perimeter_px = 0.0;
    double circularity = 0.0;
    std::optional<double> area_um2;
    std::optional<double> perimeter_um;
};

struct CellViability {
    double mean_green = 0.0;
    double mean_red = 0.0;
    Viability viability = Viability::ambiguous;
    bool dim = false;
};

struct LiveDeadResult {
    std::vector<CellViability> cells;
    double field_ratio = 0.0;  // sum G / (sum G + sum R) over all region pixels
};

struct CellRecord {
    int id = 0;
    int frame_index = 0;
    int track_id = 0;
    Point2 centroid;
    Morphometrics morph;
    CellViability viability;
    double live_fraction_context = 0.0;
};

inline BinaryMask band_mask(const RasterImage& image, const std::vector<HsvBand>& bands) {
    if (image.channels() != 3) throw InputError("fluorescence segmentation needs a 3-channel image");
    for (const auto& b : bands) b.validate();
    BinaryMask mask(image.width(), image.height());
    auto s = image.samples();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const Hsv p = rgb_to_hsv(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
        for (const auto& b : bands) {
            if (b.contains(p)) {
                mask.set(i, true);
                break;
            }
        }
    }
    return mask;
}

/// Pixels inside any of the bands -> hole fill -> labeling -> area filter.
/// Regions carry per-channel mean intensities from `image`.
inline std::vector<Region> segment_fluorescent(const RasterImage& image, const std::vector<HsvBand>& bands,
                                               std::size_t min_area,
                                               Connectivity conn = Connectivity::eight) {
    const BinaryMask mask = fill_holes(band_mask(image, bands));
    std::vector<Region> kept;
    for (auto& r : label_components(mask, conn)) {
        if (r.pixel_count >= min_area) kept.push_back(std::move(r));
    }
    measure_intensity(kept, image);
    return kept;
}

inline std::vector<Region> segment_fluorescent(const RasterImage& image, const HsvBand& band,
                                               std::size_t min_area,
                                               Connectivity conn = Connectivity::eight) {
    return segment_fluorescent(image, std::vector<HsvBand>{band}, min_area, conn);
}

inline Morphometrics morphometrics(const Region& region, std::optional<double> pixel_pitch_um) {
    Morphometrics m;
    m.area_px = static_cast<double>(region.pixel_count);
    m.perimeter_px = region.perimeter;
    m.circularity = circularity(m.area_px, m.perimeter_px);
    if (pixel_pitch_um) {
        m.area_um2 = m.area_px * *pixel_pitch_um * *pixel_pitch_um;
        m.perimeter_um = m.perimeter_px * *pixel_pitch_um;
    }
    return m;
}

/// Live if G >= 2R, dead if R >= 2G, otherwise ambiguous; regions whose
/// G + R is below 5 gray levels are ambiguous and flagged dim.
inline CellViability classify(double mean_green, double mean_red) {
    CellViability v{mean_green, mean_red, Viability::ambiguous, false};
    if (mean_green + mean_red < 5.0) {
        v.dim = true;
        return v;
    }
    if (mean_green >= 2.0 * mean_red) v.viability = Viability::live;
    else if (mean_red >= 2.0 * mean_green) v.viability = Viability::dead;
    return v;
}

/// Per-region green/red channel means, viability class, and the field-level
/// green share of total green+red intensity over all region pixels.
inline LiveDeadResult live_dead(const RasterImage& image, const std::vector<Region>& regions) {
    if (image.channels() != 3) throw InputError("live/dead needs a 3-channel image");
    LiveDeadResult out;
    auto s = image.samples();
    double total_g = 0.0, total_r = 0.0;
    for (const auto& region : regions) {
        double g = 0.0, r = 0.0;
        for (auto p : region.pixels) {
            if (p >= image.pixel_count()) throw InputError("region lies outside image bounds");
            r += s[3 * static_cast<std::size_t>(p)];
            g += s[3 * static_cast<std::size_t>(p) + 1];
        }
        total_g += g;
        total_r += r;
        const double n = static_cast<double>(std::max<std::size_t>(region.pixels.size(), 1));
        out.cells.push_back(classify(g / n, r / n));
    }
    out.field_ratio = (total_g + total_r) > 0.0 ? total_g / (total_g + total_r) : 0.0;
    return out;
}

/// Output channel c takes input channel mapping[c]; duplicates are allowed.
inline RasterImage transfer_channel(const RasterImage& image, const std::array<int, 3>& mapping) {
    if (image.channels() != 3) throw InputError("channel transfer needs a 3-channel image");
    for (int m : mapping) {
        if (m < 0 || m > 2) throw InputError("channel mapping entries must be 0, 1 or 2");
    }
    RasterImage out(image.width(), image.height(), 3, 0, image.pixel_pitch());
    auto src = image.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) dst[3 * i + c] = src[3 * i + mapping[c]];
    }
    return out;
}

/// Parses "RGB"-style mappings: "GRB" means output R <- input G, G <- R, B <- B.
inline std::array<int, 3> parse_mapping(const std::string& text) {
    if (text.size() != 3) throw InputError("channel mapping must have three letters from R, G, B");
    std::array<int, 3> m{};
    for (int c = 0; c < 3; ++c) {
        switch (text[c]) {
            case 'R': case 'r': m[c] = 0; break;
            case 'G': case 'g': m[c] = 1; break;
            case 'B': case 'b': m[c] = 2; break;
            default: throw InputError("channel mapping must use only R, G, B");
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Time series

struct TrackedCell {
    int track_id = 0;
    Point2 centroid;
    Morphometrics morph;
};

struct FrameCells {
    std::size_t frame_index = 0;
    std::vector<TrackedCell> cells;
};

struct Track {
    int id = 0;
    std::size_t first_frame = 0;
    std::vector<double> area;
    std::vector<double> circularity;
};

struct Timeseries {
    std::vector<FrameCells> frames;
    std::vector<Track> tracks;
};

/// Sequential nearest-centroid tracker. A track stays alive only while it is
/// matched in consecutive frames; unmatched detections open new tracks.
class CellTracker {
public:
    explicit CellTracker(double match_radius = 15.0) : radius_(match_radius) {}

    /// Assigns track ids to this frame's detections, in detection order.
    std::vector<int> update(const std::vector<Point2>& centroids) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < active_.size(); ++a) {
            for (std::size_t d = 0; d < centroids.size(); ++d) {
                const double dist = std::hypot(active_[a].second.x - centroids[d].x,
                                               active_[a].second.y - centroids[d].y);
                if (dist <= radius_) pairs.emplace_back(dist, a, d);
            }
        }
        std::sort(pairs.begin(), pairs.end());
        std::vector<int> ids(centroids.size(), 0);
        std::vector<bool> used(active_.size(), false);
        for (const auto& [dist, a, d] : pairs) {
            if (used[a] || ids[d] != 0) continue;
            used[a] = true;
            ids[d] = active_[a].first;
        }
        std::vector<std::pair<int, Point2>> next;
        for (std::size_t d = 0; d < centroids.size(); ++d) {
            if (ids[d] == 0) ids[d] = ++last_id_;
            next.emplace_back(ids[d], centroids[d]);
        }
        active_ = std::move(next);
        return ids;
    }

private:
    double radius_;
    int last_id_ = 0;
    std::vector<std::pair<int, Point2>> active_;
};

/// Segments each pre-aligned frame and links cells across frames.
inline Timeseries region_timeseries(const std::vector<RasterImage>& aligned_frames,
                                    const std::vector<HsvBand>& bands, std::size_t min_area,
                                    double match_radius = 15.0,
                                    std::optional<double> pixel_pitch_um = std::nullopt) {
    Timeseries ts;
    CellTracker tracker(match_radius);
    std::map<int, std::size_t> track_index;
    for (std::size_t f = 0; f < aligned_frames.size(); ++f) {
        const auto regions = segment_fluorescent(aligned_frames[f], bands, min_area);
        std::vector<Point2> centroids;
        for (const auto& r : regions) centroids.push_back(r.centroid);
        const auto ids = tracker.update(centroids);
        FrameCells fc{f, {}};
        for (std::size_t i = 0; i < regions.size(); ++i) {
            TrackedCell cell{ids[i], regions[i].centroid, morphometrics(regions[i], pixel_pitch_um)};
            auto it = track_index.find(ids[i]);
            if (it == track_index.end()) {
                it = track_index.emplace(ids[i], ts.tracks.size()).first;
                ts.tracks.push_back(Track{ids[i], f, {}, {}});
            }
            ts.tracks[it->second].area.push_back(cell.morph.area_px);
            ts.tracks[it->second].circularity.push_back(cell.morph.circularity);
            fc.cells.push_back(cell);
        }
        ts.frames.push_back(std::move(fc));
    }
    return ts;
}

inline Timeseries region_timeseries(const std::vector<RasterImage>& aligned_frames, const HsvBand& band,
                                    std::size_t min_area, double match_radius = 15.0) {
    return region_timeseries(aligned_frames, std::vector<HsvBand>{band}, min_area, match_radius);
}

// ---------------------------------------------------------------------------
// Label-map import

/// Regions from an external label map: 1-channel value = id, or 3-channel
/// with id = R * 256 + G (16-bit ids). Regions are ordered by id; statistics
/// come from `source`. Perimeter sums the outer contours of every
/// 8-connected piece carrying the id.
inline std::vector<Region> import_labels(const RasterImage& label_map, const RasterImage& source) {
    if (label_map.width() != source.width() || label_map.height() != source.height()) {
        throw InputError("label map dimensions differ from source image");
    }
    const int w = label_map.width();
    auto s = label_map.samples();
    std::map<int, std::vector<std::uint32_t>> members;
    for (std::size_t i = 0; i < label_map.pixel_count(); ++i) {
        int id;
        if (label_map.channels() == 1) id = s[i];
        else id = s[3 * i] * 256 + s[3 * i + 1];
        if (id != 0) members[id].push_back(static_cast<std::uint32_t>(i));
    }
    std::vector<Region> regions;
    for (auto& [id, pixels] : members) {
        Region r;
        r.label = id;
        r.pixels = std::move(pixels);
        detail::fill_geometry(r, w);
        const auto& bb = r.bounding_box;
        BinaryMask piece_mask(bb.x1 - bb.x0, bb.y1 - bb.y0);
        for (auto p : r.pixels) {
            piece_mask.set(static_cast<int>(p % w) - bb.x0, static_cast<int>(p / w) - bb.y0, true);
        }
        double perimeter = 0.0;
        std::vector<Point2> longest;
        for (const auto& piece : label_components(piece_mask, Connectivity::eight)) {
            perimeter += piece.perimeter;
            if (piece.contour.size() > longest.size()) longest = piece.contour;
        }
        for (auto& v : longest) {
            v.x += bb.x0;
            v.y += bb.y0;
        }
        r.perimeter = perimeter;
        r.contour = std::move(longest);
        regions.push_back(std::move(r));
    }
    measure_intensity(regions, source);
    return regions;
}

}  // namespace dropcell::fluor
