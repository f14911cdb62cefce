#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dropcell {

/// Malformed or mismatched caller input (dimensions, empty lists, bad mappings).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// W x H x C raster of 8-bit samples, row-major, channels interleaved.
/// Channels are 1 (gray) or 3 (RGB in that order).
class RasterImage {
public:
    RasterImage() = default;

    RasterImage(int width, int height, int channels, std::uint8_t fill = 0,
                std::optional<double> pixel_pitch_um = std::nullopt)
        : width_(width), height_(height), channels_(channels), pitch_(pixel_pitch_um) {
        validate_shape();
        data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    RasterImage(int width, int height, int channels, std::vector<std::uint8_t> samples,
                std::optional<double> pixel_pitch_um = std::nullopt)
        : width_(width), height_(height), channels_(channels), data_(std::move(samples)),
          pitch_(pixel_pitch_um) {
        validate_shape();
        if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
            throw InputError("raster sample count does not match width*height*channels");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * height_;
    }
    bool empty() const noexcept { return data_.empty(); }

    std::optional<double> pixel_pitch() const noexcept { return pitch_; }
    void set_pixel_pitch(std::optional<double> pitch) {
        if (pitch && !(*pitch > 0.0)) throw InputError("pixel pitch must be > 0");
        pitch_ = pitch;
    }

    std::uint8_t at(int x, int y, int c = 0) const {
        return data_[index(x, y, c)];
    }
    std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    std::span<const std::uint8_t> samples() const noexcept { return data_; }
    std::span<std::uint8_t> samples() noexcept { return data_; }

    bool same_shape(const RasterImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ &&
               channels_ == other.channels_;
    }
    bool same_size(int w, int h) const noexcept { return width_ == w && height_ == h; }

    friend bool operator==(const RasterImage& a, const RasterImage& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        if (width_ < 1 || height_ < 1) throw InputError("raster dimensions must be >= 1");
        if (channels_ != 1 && channels_ != 3) throw InputError("raster must have 1 or 3 channels");
        if (pitch_ && !(*pitch_ > 0.0)) throw InputError("pixel pitch must be > 0");
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
    std::optional<double> pitch_;
};

/// One boolean per pixel, stored as bytes (0/1).
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false)
        : width_(width), height_(height),
          bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
        if (width < 1 || height < 1) throw InputError("mask dimensions must be >= 1");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    bool test(std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_ &&
               bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Continuous pixel-edge extents: pixel (i, j) covers [i, i+1) x [j, j+1).
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One connected segmented object.
///
/// Coordinates are continuous: pixel (i, j) has its center at (i + 0.5, j + 0.5),
/// so contour vertices fall on integer pixel corners. `pixels` holds linear
/// indices (y * width + x) in scan order.
struct Region {
    int label = 0;
    std::size_t pixel_count = 0;
    double perimeter = 0.0;
    Point2 centroid;
    BoundingBox bounding_box;
    std::vector<double> mean_intensity;
    std::vector<std::uint32_t> pixels;
    std::vector<Point2> contour;

    friend bool operator==(const Region&, const Region&) = default;
};

/// Converts to gray by the unweighted channel mean; gray input is copied.
inline RasterImage to_gray(const RasterImage& image) {
    if (image.channels() == 1) return image;
    RasterImage out(image.width(), image.height(), 1, 0, image.pixel_pitch());
    auto src = image.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        int sum = src[3 * i] + src[3 * i + 1] + src[3 * i + 2];
        dst[i] = static_cast<std::uint8_t>((sum + 1) / 3);
    }
    return out;
}

inline std::uint8_t clamp_sample(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(v + 0.5);
}

}  // namespace dropcell
