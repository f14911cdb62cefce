#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dropcell/core/image.hpp"

namespace dropcell::pipeline {

/// Unreadable, corrupt, or unsupported image file.
class ImageReadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

/// Natural filename order: digit runs compare numerically, so frame_9 < frame_10.
inline bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
            na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
            nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return a < b;
}

/// Image files from directories (non-recursive) and explicit file paths,
/// in natural filename order.
inline std::vector<std::string> list_images(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        std::filesystem::path p(in);
        if (std::filesystem::is_directory(p)) {
            for (const auto& e : std::filesystem::directory_iterator(p)) {
                if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path().string());
            }
        } else if (std::filesystem::is_regular_file(p)) {
            out.push_back(p.string());
        }
    }
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
        return natural_less(std::filesystem::path(a).filename().string(), std::filesystem::path(b).filename().string());
    });
    return out;
}

inline RasterImage from_mat(const cv::Mat& m, std::optional<double> pitch = std::nullopt) {
    if (m.depth() != CV_8U) throw ImageReadError("only 8-bit images are supported");
    cv::Mat src;
    if (m.channels() == 1) src = m;
    else if (m.channels() == 3) cv::cvtColor(m, src, cv::COLOR_BGR2RGB);
    else throw ImageReadError("only 1- or 3-channel images are supported");
    if (!src.isContinuous()) src = src.clone();
    std::vector<std::uint8_t> samples(src.data, src.data + src.total() * src.channels());
    return RasterImage(src.cols, src.rows, src.channels(), std::move(samples), pitch);
}

inline cv::Mat to_mat(const RasterImage& image) {
    cv::Mat m(image.height(), image.width(), image.channels() == 1 ? CV_8UC1 : CV_8UC3,
              const_cast<std::uint8_t*>(image.samples().data()));
    cv::Mat out;
    if (image.channels() == 3) cv::cvtColor(m, out, cv::COLOR_RGB2BGR);
    else out = m.clone();
    return out;
}

/// Reads an 8-bit PNG/TIFF with 1 or 3 channels.
inline RasterImage read_image(const std::string& path, std::optional<double> pitch = std::nullopt) {
    cv::Mat m;
    try {
        m = cv::imread(path, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw ImageReadError(path + ": " + e.what());
    }
    if (m.empty()) throw ImageReadError(path + ": unreadable or corrupt image");
    try {
        return from_mat(m, pitch);
    } catch (const ImageReadError& e) {
        throw ImageReadError(path + ": " + e.what());
    }
}

/// 1-channel 8- or 16-bit label image; 16-bit ids are packed as R*256 + G.
inline RasterImage read_label_map(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw ImageReadError(path + ": unreadable label map");
    if (m.channels() != 1) throw ImageReadError(path + ": label map must be single-channel");
    if (m.depth() == CV_8U) return from_mat(m);
    if (m.depth() != CV_16U) throw ImageReadError(path + ": label map must be 8- or 16-bit");
    RasterImage out(m.cols, m.rows, 3, 0);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            const std::uint16_t v = m.at<std::uint16_t>(y, x);
            out.at(x, y, 0) = static_cast<std::uint8_t>(v >> 8);
            out.at(x, y, 1) = static_cast<std::uint8_t>(v & 0xFF);
        }
    }
    return out;
}

inline void write_png(const std::string& path, const RasterImage& image) {
    if (!cv::imwrite(path, to_mat(image))) throw std::runtime_error("cannot write image " + path);
}

}  // namespace dropcell::pipeline
