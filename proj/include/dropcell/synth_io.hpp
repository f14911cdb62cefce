#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dropcell/synth.hpp"

namespace dropcell::synth {

// Scene files are INI text: a [scene] section plus one section per object,
// named kind:tag ([dye:red], [droplet:1], [cell:a], [speckle:3]). Vector
// values are whitespace separated. Unknown sections and keys are errors.

namespace io_detail {

namespace pt = boost::property_tree;

inline std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_list(std::initializer_list<double> values) {
    std::string out;
    for (double v : values) {
        if (!out.empty()) out += ' ';
        out += fmt(v);
    }
    return out;
}

inline std::vector<double> numbers(const std::string& text, const std::string& where) {
    std::istringstream is(text);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw SpecError(where + ": '" + tok + "' is not a number");
        }
    }
    return out;
}

inline std::vector<double> fixed(const std::string& text, std::size_t n, const std::string& where) {
    auto v = numbers(text, where);
    if (v.size() != n) throw SpecError(where + ": expected " + std::to_string(n) + " values");
    return v;
}

inline double scalar(const std::string& text, const std::string& where) { return fixed(text, 1, where)[0]; }

inline std::array<std::uint8_t, 3> rgb(const std::string& text, const std::string& where) {
    auto v = fixed(text, 3, where);
    std::array<std::uint8_t, 3> out{};
    for (int i = 0; i < 3; ++i) {
        if (v[i] < 0 || v[i] > 255) throw SpecError(where + ": color components must be 0-255");
        out[i] = static_cast<std::uint8_t>(v[i]);
    }
    return out;
}

inline ShapeKind shape_kind(const std::string& s, const std::string& where) {
    if (s == "disk") return ShapeKind::disk;
    if (s == "ellipse") return ShapeKind::ellipse;
    if (s == "star") return ShapeKind::star;
    if (s == "bleb") return ShapeKind::bleb;
    throw SpecError(where + ": unknown shape '" + s + "'");
}

inline const char* shape_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::ellipse: return "ellipse";
        case ShapeKind::star: return "star";
        case ShapeKind::bleb: return "bleb";
        default: return "disk";
    }
}

}  // namespace io_detail

inline SceneSpec read_scene(std::istream& is) {
    namespace pt = boost::property_tree;
    using namespace io_detail;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw SpecError(std::string("scene file: ") + e.what());
    }
    SceneSpec spec;
    for (const auto& [section, body] : tree) {
        const auto colon = section.find(':');
        const std::string kind = section.substr(0, colon);
        const std::string tag = colon == std::string::npos ? "" : section.substr(colon + 1);
        if (body.empty() && !body.data().empty()) throw SpecError("scene file: key '" + section + "' outside a section");
        if (kind == "scene") {
            for (const auto& [key, node] : body) {
                const std::string v = node.data();
                const std::string where = "[scene] " + key;
                if (key == "modality") {
                    if (v == "brightfield") spec.modality = Modality::brightfield;
                    else if (v == "fluorescence") spec.modality = Modality::fluorescence;
                    else throw SpecError(where + ": expected brightfield or fluorescence");
                } else if (key == "width") spec.width = static_cast<int>(scalar(v, where));
                else if (key == "height") spec.height = static_cast<int>(scalar(v, where));
                else if (key == "background") {
                    auto b = fixed(v, 3, where);
                    spec.background = {b[0], b[1], b[2]};
                } else if (key == "texture_amplitude") spec.texture_amplitude = scalar(v, where);
                else if (key == "texture_period") spec.texture_period = scalar(v, where);
                else if (key == "noise_sigma") spec.noise_sigma = scalar(v, where);
                else if (key == "exposure_gain") spec.exposure_gain = scalar(v, where);
                else if (key == "frame_gains") spec.frame_gains = numbers(v, where);
                else if (key == "gain_jitter") spec.gain_jitter = scalar(v, where);
                else if (key == "frame_shift") {
                    auto s = fixed(v, 2, where);
                    spec.frame_shift = {s[0], s[1]};
                } else if (key == "frame_shifts") {
                    auto s = numbers(v, where);
                    if (s.size() % 2 != 0) throw SpecError(where + ": expected dx dy pairs");
                    for (std::size_t i = 0; i < s.size(); i += 2) spec.frame_shifts.push_back({s[i], s[i + 1]});
                } else if (key == "seed") spec.seed = static_cast<std::uint64_t>(scalar(v, where));
                else if (key == "pixel_pitch") spec.pixel_pitch = scalar(v, where);
                else throw SpecError("scene file: unknown key " + where);
            }
        } else if (kind == "dye") {
            DyeSpec d;
            d.name = tag;
            if (tag.empty()) throw SpecError("scene file: dye section needs a name ([dye:<name>])");
            for (const auto& [key, node] : body) {
                const std::string where = "[" + section + "] " + key;
                if (key == "od") {
                    auto o = fixed(node.data(), 3, where);
                    d.od_vector = {o[0], o[1], o[2]};
                } else throw SpecError("scene file: unknown key " + where);
            }
            spec.dyes.push_back(d);
        } else if (kind == "droplet") {
            DropletSpec d;
            for (const auto& [key, node] : body) {
                const std::string v = node.data();
                const std::string where = "[" + section + "] " + key;
                if (key == "center") {
                    auto c = fixed(v, 2, where);
                    d.center = {c[0], c[1]};
                } else if (key == "diameter") d.diameter = scalar(v, where);
                else if (key == "concentrations") d.concentrations = numbers(v, where);
                else if (key == "rim_darkness") d.rim_darkness = scalar(v, where);
                else if (key == "rim_width") d.rim_width = scalar(v, where);
                else throw SpecError("scene file: unknown key " + where);
            }
            spec.droplets.push_back(d);
        } else if (kind == "cell") {
            CellSpec c;
            for (const auto& [key, node] : body) {
                const std::string v = node.data();
                const std::string where = "[" + section + "] " + key;
                if (key == "center") {
                    auto p = fixed(v, 2, where);
                    c.center = {p[0], p[1]};
                } else if (key == "radius") c.radius = scalar(v, where);
                else if (key == "shape") c.shape.kind = shape_kind(v, where);
                else if (key == "axes") {
                    auto a = fixed(v, 2, where);
                    c.shape.semi_axis_a = a[0];
                    c.shape.semi_axis_b = a[1];
                } else if (key == "points") c.shape.points = static_cast<int>(scalar(v, where));
                else if (key == "inner_radius") c.shape.inner_radius = scalar(v, where);
                else if (key == "rotation") c.shape.rotation = scalar(v, where);
                else if (key == "t") c.shape.t = scalar(v, where);
                else if (key == "bleb_count") c.shape.bleb_count = static_cast<int>(scalar(v, where));
                else if (key == "bleb_amplitude") c.shape.bleb_amplitude = scalar(v, where);
                else if (key == "color") c.color = rgb(v, where);
                else if (key == "intensity") c.intensity = scalar(v, where);
                else throw SpecError("scene file: unknown key " + where);
            }
            spec.cells.push_back(c);
        } else if (kind == "speckle") {
            SpeckleSpec s;
            for (const auto& [key, node] : body) {
                const std::string v = node.data();
                const std::string where = "[" + section + "] " + key;
                if (key == "rect") {
                    auto r = fixed(v, 4, where);
                    s.x = static_cast<int>(r[0]);
                    s.y = static_cast<int>(r[1]);
                    s.width = static_cast<int>(r[2]);
                    s.height = static_cast<int>(r[3]);
                } else if (key == "color") s.color = rgb(v, where);
                else throw SpecError("scene file: unknown key " + where);
            }
            spec.speckles.push_back(s);
        } else {
            throw SpecError("scene file: unknown section [" + section + "]");
        }
    }
    return spec;
}

inline void write_scene(std::ostream& os, const SceneSpec& spec) {
    using namespace io_detail;
    os << "[scene]\n";
    os << "modality = " << (spec.modality == Modality::fluorescence ? "fluorescence" : "brightfield") << '\n';
    os << "width = " << spec.width << '\n';
    os << "height = " << spec.height << '\n';
    os << "background = " << fmt_list({spec.background[0], spec.background[1], spec.background[2]}) << '\n';
    os << "texture_amplitude = " << fmt(spec.texture_amplitude) << '\n';
    os << "texture_period = " << fmt(spec.texture_period) << '\n';
    os << "noise_sigma = " << fmt(spec.noise_sigma) << '\n';
    os << "exposure_gain = " << fmt(spec.exposure_gain) << '\n';
    if (!spec.frame_gains.empty()) {
        os << "frame_gains =";
        for (double g : spec.frame_gains) os << ' ' << fmt(g);
        os << '\n';
    }
    os << "gain_jitter = " << fmt(spec.gain_jitter) << '\n';
    os << "frame_shift = " << fmt_list({spec.frame_shift.x, spec.frame_shift.y}) << '\n';
    if (!spec.frame_shifts.empty()) {
        os << "frame_shifts =";
        for (const auto& s : spec.frame_shifts) os << ' ' << fmt(s.x) << ' ' << fmt(s.y);
        os << '\n';
    }
    os << "seed = " << spec.seed << '\n';
    if (spec.pixel_pitch) os << "pixel_pitch = " << fmt(*spec.pixel_pitch) << '\n';
    for (const auto& d : spec.dyes) {
        os << "\n[dye:" << d.name << "]\n";
        os << "od = " << fmt_list({d.od_vector[0], d.od_vector[1], d.od_vector[2]}) << '\n';
    }
    int i = 1;
    for (const auto& d : spec.droplets) {
        os << "\n[droplet:" << i++ << "]\n";
        os << "center = " << fmt_list({d.center.x, d.center.y}) << '\n';
        os << "diameter = " << fmt(d.diameter) << '\n';
        if (!d.concentrations.empty()) {
            os << "concentrations =";
            for (double c : d.concentrations) os << ' ' << fmt(c);
            os << '\n';
        }
        os << "rim_darkness = " << fmt(d.rim_darkness) << '\n';
        os << "rim_width = " << fmt(d.rim_width) << '\n';
    }
    i = 1;
    for (const auto& c : spec.cells) {
        os << "\n[cell:" << i++ << "]\n";
        os << "center = " << fmt_list({c.center.x, c.center.y}) << '\n';
        os << "radius = " << fmt(c.radius) << '\n';
        os << "shape = " << shape_name(c.shape.kind) << '\n';
        switch (c.shape.kind) {
            case ShapeKind::ellipse:
                os << "axes = " << fmt_list({c.shape.semi_axis_a, c.shape.semi_axis_b}) << '\n';
                os << "rotation = " << fmt(c.shape.rotation) << '\n';
                break;
            case ShapeKind::star:
                os << "points = " << c.shape.points << '\n';
                os << "inner_radius = " << fmt(c.shape.inner_radius) << '\n';
                os << "rotation = " << fmt(c.shape.rotation) << '\n';
                break;
            case ShapeKind::bleb:
                os << "t = " << fmt(c.shape.t) << '\n';
                os << "bleb_count = " << c.shape.bleb_count << '\n';
                os << "bleb_amplitude = " << fmt(c.shape.bleb_amplitude) << '\n';
                os << "rotation = " << fmt(c.shape.rotation) << '\n';
                break;
            default: break;
        }
        os << "color = " << int(c.color[0]) << ' ' << int(c.color[1]) << ' ' << int(c.color[2]) << '\n';
        os << "intensity = " << fmt(c.intensity) << '\n';
    }
    i = 1;
    for (const auto& s : spec.speckles) {
        os << "\n[speckle:" << i++ << "]\n";
        os << "rect = " << s.x << ' ' << s.y << ' ' << s.width << ' ' << s.height << '\n';
        os << "color = " << int(s.color[0]) << ' ' << int(s.color[1]) << ' ' << int(s.color[2]) << '\n';
    }
}

}  // namespace dropcell::synth
