#include "srcd/image.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

GrayImage::GrayImage(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {
    if (height == 0 || width == 0) {
        throw ConfigInvalid("GrayImage: dimensions must be at least 1x1");
    }
}

Image::Image(std::size_t height, std::size_t width) : height_(height), width_(width) {
    if (height == 0 || width == 0) {
        throw ConfigInvalid("Image: dimensions must be at least 1x1");
    }
    for (auto& p : planes_) p.assign(height * width, 0.0);
}

Image Image::filled(std::size_t height, std::size_t width, double r, double g, double b) {
    Image img(height, width);
    std::fill(img.planes_[0].begin(), img.planes_[0].end(), r);
    std::fill(img.planes_[1].begin(), img.planes_[1].end(), g);
    std::fill(img.planes_[2].begin(), img.planes_[2].end(), b);
    return img;
}

GrayImage to_grayscale(const Image& img) {
    GrayImage gray(img.height(), img.width());
    const auto& r = img.plane(0);
    const auto& g = img.plane(1);
    const auto& b = img.plane(2);
    for (std::size_t i = 0; i < gray.data().size(); ++i) {
        gray.data()[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    return gray;
}

Image resize_bilinear(const Image& img, std::size_t new_h, std::size_t new_w) {
    if (new_h == 0 || new_w == 0) {
        throw ConfigInvalid("resize_bilinear: target dimensions must be at least 1x1");
    }
    if (new_h == img.height() && new_w == img.width()) return img;

    Image out(new_h, new_w);
    const double sy = new_h > 1 ? static_cast<double>(img.height() - 1) / (new_h - 1) : 0.0;
    const double sx = new_w > 1 ? static_cast<double>(img.width() - 1) / (new_w - 1) : 0.0;

    for (std::size_t y = 0; y < new_h; ++y) {
        const double fy = y * sy;
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (std::size_t x = 0; x < new_w; ++x) {
            const double fx = x * sx;
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1);
                const double bot = (1.0 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1);
                out.at(c, y, x) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

Image hflip(const Image& img) {
    Image out(img.height(), img.width());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < img.height(); ++y) {
            for (std::size_t x = 0; x < img.width(); ++x) {
                out.at(c, y, x) = img.at(c, y, img.width() - 1 - x);
            }
        }
    }
    return out;
}

void clamp_pixels(Image& img) {
    for (int c = 0; c < 3; ++c) {
        for (double& v : img.plane(c)) v = std::clamp(v, 0.0, 255.0);
    }
}

}  // namespace srcd
