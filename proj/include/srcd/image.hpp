#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace srcd {

/// Single-channel raster plane, row-major, values nominally in [0, 255].
/// Values are kept as doubles; quantization happens only on PNG export.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(std::size_t height, std::size_t width, double fill = 0.0);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    double& at(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    double at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// RGB raster with planar channel storage (R, G, B), row-major per plane.
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width);
    static Image filled(std::size_t height, std::size_t width, double r, double g, double b);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    double& at(int channel, std::size_t y, std::size_t x) { return planes_[channel][y * width_ + x]; }
    double at(int channel, std::size_t y, std::size_t x) const { return planes_[channel][y * width_ + x]; }

    std::vector<double>& plane(int channel) { return planes_[channel]; }
    const std::vector<double>& plane(int channel) const { return planes_[channel]; }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::array<std::vector<double>, 3> planes_;
};

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_grayscale(const Image& img);

/// Bilinear resize. Source coordinates are mapped with corner alignment,
/// src = dst * (src_size - 1) / (dst_size - 1), so the four corners are
/// reproduced exactly and constant images stay constant.
Image resize_bilinear(const Image& img, std::size_t new_h, std::size_t new_w);

/// Columns reversed per channel; an involution.
Image hflip(const Image& img);

/// Clamp every sample to [0, 255] in place.
void clamp_pixels(Image& img);

}  // namespace srcd
