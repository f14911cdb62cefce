#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dropcell/core/image.hpp"

namespace dropcell::stainsep {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rgb = std::array<std::uint8_t, 3>;
using Vec3 = Eigen::Vector3d;

struct Dye {
    std::string name;
    Vec3 od_vector = Vec3::Zero();
};

/// Calibrated per-dye unit optical-density vectors plus the background white point.
struct StainBasis {
    std::vector<Dye> dyes;
    std::array<double, 3> white_point{255.0, 255.0, 255.0};

    Eigen::MatrixXd matrix() const {
        Eigen::MatrixXd m(3, static_cast<Eigen::Index>(dyes.size()));
        for (std::size_t i = 0; i < dyes.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = dyes[i].od_vector;
        return m;
    }

    /// Ratio of largest to smallest singular value of the 3 x k stain matrix.
    double condition_number() const {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix());
        const auto& s = svd.singularValues();
        if (s.size() == 0 || s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
        return s(0) / s(s.size() - 1);
    }

    void validate() const {
        if (dyes.empty() || dyes.size() > 3) throw CalibrationError("stain basis needs 1 to 3 dyes");
        for (double w : white_point) {
            if (!(w >= 1.0)) throw CalibrationError("white point channels must be >= 1");
        }
        for (const auto& d : dyes) {
            if (std::abs(d.od_vector.norm() - 1.0) > 1e-6) {
                throw CalibrationError("dye '" + d.name + "' OD vector is not unit length");
            }
        }
        if (!(condition_number() < 1e3)) throw CalibrationError("stain matrix is ill-conditioned");
    }
};

/// Per-pixel dye concentrations (OD units) plus unexplained OD norm.
struct ConcentrationMap {
    int width = 0;
    int height = 0;
    std::vector<std::vector<float>> concentration;  // [dye][pixel]
    std::vector<float> residual;
};

struct DyeRatio {
    std::vector<std::pair<std::string, double>> fractions;
    bool empty = false;
};

/// -log10(max(sample, 1) / white), clamped at zero.
inline Vec3 optical_density(const Rgb& sample, const std::array<double, 3>& white_point) {
    Vec3 od;
    for (int c = 0; c < 3; ++c) {
        const double v = std::max<double>(sample[c], 1.0);
        od(c) = std::max(0.0, -std::log10(v / white_point[c]));
    }
    return od;
}

inline double angle_degrees(const Vec3& a, const Vec3& b) {
    const double cosv = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
    return std::acos(cosv) * 180.0 / std::numbers::pi;
}

/// Builds a stain basis from single-dye pixel samples and background pixels.
/// White point is the per-channel background median; each dye vector is the
/// normalized mean OD of that dye's pixels.
inline StainBasis calibrate(const std::vector<std::pair<std::string, std::vector<Rgb>>>& single_dye_samples,
                            const std::vector<Rgb>& background_pixels) {
    constexpr std::size_t min_pixels = 20;
    if (background_pixels.size() < min_pixels) {
        throw CalibrationError("calibration needs at least 20 background pixels");
    }
    if (single_dye_samples.empty() || single_dye_samples.size() > 3) {
        throw CalibrationError("calibration needs 1 to 3 dyes");
    }
    StainBasis basis;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::uint8_t> ch;
        ch.reserve(background_pixels.size());
        for (const auto& p : background_pixels) ch.push_back(p[c]);
        const auto mid = ch.begin() + static_cast<std::ptrdiff_t>(ch.size() / 2);
        std::nth_element(ch.begin(), mid, ch.end());
        double median = *mid;
        if (ch.size() % 2 == 0) {
            const auto lower = *std::max_element(ch.begin(), mid);
            median = 0.5 * (median + lower);
        }
        basis.white_point[c] = std::max(1.0, median);
    }
    for (const auto& [name, pixels] : single_dye_samples) {
        if (pixels.size() < min_pixels) {
            throw CalibrationError("dye '" + name + "' has fewer than 20 calibration pixels");
        }
        Vec3 mean = Vec3::Zero();
        for (const auto& p : pixels) mean += optical_density(p, basis.white_point);
        mean /= static_cast<double>(pixels.size());
        if (mean.norm() < 1e-3) {
            throw CalibrationError("dye '" + name + "' indistinguishable from background");
        }
        basis.dyes.push_back({name, mean.normalized()});
    }
    for (std::size_t i = 0; i < basis.dyes.size(); ++i) {
        for (std::size_t j = i + 1; j < basis.dyes.size(); ++j) {
            if (angle_degrees(basis.dyes[i].od_vector, basis.dyes[j].od_vector) < 5.0) {
                throw CalibrationError("dyes '" + basis.dyes[i].name + "' and '" + basis.dyes[j].name +
                                       "' are nearly collinear");
            }
        }
    }
    if (!(basis.condition_number() < 1e3)) throw CalibrationError("stain matrix is ill-conditioned");
    return basis;
}

/// Non-negative least squares for up to three dyes by exact active-set
/// enumeration: every subset is solved by ordinary least squares and the
/// feasible subset with the smallest residual wins.
class Unmixer {
public:
    explicit Unmixer(const StainBasis& basis) : basis_(basis) {
        basis_.validate();
        const Eigen::MatrixXd m = basis_.matrix();
        const int k = static_cast<int>(basis_.dyes.size());
        for (int mask = 1; mask < (1 << k); ++mask) {
            Subset s;
            for (int i = 0; i < k; ++i) {
                if (mask & (1 << i)) s.members.push_back(i);
            }
            Eigen::MatrixXd sub(3, static_cast<Eigen::Index>(s.members.size()));
            for (std::size_t j = 0; j < s.members.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = m.col(s.members[j]);
            s.columns = sub;
            s.pseudo_inverse = (sub.transpose() * sub).inverse() * sub.transpose();
            subsets_.push_back(std::move(s));
        }
        full_ = static_cast<int>(subsets_.size()) - 1;
    }

    const StainBasis& basis() const noexcept { return basis_; }

    /// Concentrations (size = dye count) and residual OD norm for one OD vector.
    void solve(const Vec3& od, std::array<double, 3>& conc, double& residual) const {
        const int k = static_cast<int>(basis_.dyes.size());
        conc = {0.0, 0.0, 0.0};
        residual = od.norm();
        if (residual == 0.0) return;
        // Unconstrained solution first; it is optimal whenever feasible.
        {
            const Eigen::VectorXd c = subsets_[full_].pseudo_inverse * od;
            if ((c.array() >= 0.0).all()) {
                for (int i = 0; i < k; ++i) conc[i] = c(i);
                residual = (od - subsets_[full_].columns * c).norm();
                return;
            }
        }
        double best = residual;
        for (const auto& s : subsets_) {
            const Eigen::VectorXd c = s.pseudo_inverse * od;
            if ((c.array() < 0.0).any()) continue;
            const double r = (od - s.columns * c).norm();
            if (r < best) {
                best = r;
                conc = {0.0, 0.0, 0.0};
                for (std::size_t j = 0; j < s.members.size(); ++j) conc[s.members[j]] = c(static_cast<Eigen::Index>(j));
            }
        }
        residual = best;
    }

    std::array<double, 3> concentrations(const Rgb& pixel) const {
        std::array<double, 3> conc{};
        double r = 0.0;
        solve(optical_density(pixel, basis_.white_point), conc, r);
        return conc;
    }

private:
    struct Subset {
        std::vector<int> members;
        Eigen::MatrixXd columns;
        Eigen::MatrixXd pseudo_inverse;
    };
    StainBasis basis_;
    std::vector<Subset> subsets_;
    int full_ = 0;
};

/// Unmixes every ROI pixel of an RGB image; pixels outside the ROI stay zero.
inline ConcentrationMap unmix(const RasterImage& image, const StainBasis& basis, const BinaryMask& roi) {
    if (image.channels() != 3) throw InputError("unmixing needs a 3-channel image");
    if (roi.width() != image.width() || roi.height() != image.height()) {
        throw InputError("ROI dimensions differ from image");
    }
    const Unmixer unmixer(basis);
    const std::size_t n = image.pixel_count();
    ConcentrationMap map;
    map.width = image.width();
    map.height = image.height();
    map.concentration.assign(basis.dyes.size(), std::vector<float>(n, 0.0f));
    map.residual.assign(n, 0.0f);
    auto s = image.samples();
    std::array<double, 3> conc{};
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!roi.test(i)) continue;
        const Rgb px{s[3 * i], s[3 * i + 1], s[3 * i + 2]};
        unmixer.solve(optical_density(px, basis.white_point), conc, residual);
        for (std::size_t d = 0; d < basis.dyes.size(); ++d) map.concentration[d][i] = static_cast<float>(conc[d]);
        map.residual[i] = static_cast<float>(residual);
    }
    return map;
}

/// Fraction of each dye summed over the given pixels. Total concentration
/// below 1e-6 reports all-zero fractions with the empty flag set.
inline DyeRatio dye_ratio(const ConcentrationMap& conc, std::span<const std::uint32_t> pixels,
                          const StainBasis& basis) {
    DyeRatio out;
    const std::size_t n = static_cast<std::size_t>(conc.width) * conc.height;
    std::vector<double> sums(conc.concentration.size(), 0.0);
    for (auto p : pixels) {
        if (p >= n) throw InputError("region lies outside concentration map");
        for (std::size_t d = 0; d < sums.size(); ++d) sums[d] += conc.concentration[d][p];
    }
    double total = 0.0;
    for (double s : sums) total += s;
    out.empty = total < 1e-6;
    for (std::size_t d = 0; d < sums.size(); ++d) {
        const std::string name = d < basis.dyes.size() ? basis.dyes[d].name : "dye" + std::to_string(d);
        out.fractions.emplace_back(name, out.empty ? 0.0 : sums[d] / total);
    }
    return out;
}

inline DyeRatio dye_ratio(const ConcentrationMap& conc, const Region& region, const StainBasis& basis) {
    return dye_ratio(conc, region.pixels, basis);
}

// Calibration file: line-oriented key = value, '#' comments.
//   white_point = 230.000000 231.000000 229.000000
//   dye = red 0.981234 0.121000 0.150000

inline void write_basis(std::ostream& os, const StainBasis& basis) {
    os << "# stain basis: optical-density unit vectors (R G B) per dye\n";
    os << std::fixed << std::setprecision(6);
    os << "white_point = " << basis.white_point[0] << ' ' << basis.white_point[1] << ' '
       << basis.white_point[2] << '\n';
    for (const auto& d : basis.dyes) {
        os << "dye = " << d.name << ' ' << d.od_vector(0) << ' ' << d.od_vector(1) << ' '
           << d.od_vector(2) << '\n';
    }
}

/// Parses a calibration file. Vectors are renormalized after the 6-decimal
/// round trip so the unit-norm invariant holds exactly.
inline StainBasis read_basis(std::istream& is) {
    StainBasis basis;
    bool have_white = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw CalibrationError("calibration line " + std::to_string(lineno) + ": expected key = value");
        }
        std::istringstream key_stream(line.substr(0, eq));
        std::string key;
        key_stream >> key;
        std::istringstream vs(line.substr(eq + 1));
        if (key == "white_point") {
            for (auto& w : basis.white_point) {
                if (!(vs >> w)) throw CalibrationError("calibration: malformed white_point");
            }
            have_white = true;
        } else if (key == "dye") {
            Dye d;
            double x = 0, y = 0, z = 0;
            if (!(vs >> d.name >> x >> y >> z)) throw CalibrationError("calibration: malformed dye line");
            d.od_vector = Vec3(x, y, z);
            if (d.od_vector.norm() <= 0.0) throw CalibrationError("calibration: zero dye vector");
            d.od_vector.normalize();
            basis.dyes.push_back(std::move(d));
        } else {
            throw CalibrationError("calibration: unknown key '" + key + "'");
        }
    }
    if (!have_white) throw CalibrationError("calibration: missing white_point");
    basis.validate();
    return basis;
}

inline void save_basis(const std::string& path, const StainBasis& basis) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write calibration file " + path);
    write_basis(os, basis);
}

inline StainBasis load_basis(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read calibration file " + path);
    return read_basis(is);
}

}  // namespace dropcell::stainsep
