#include "srcd/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "srcd/errors.hpp"

namespace srcd {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

// nearbyint under the default rounding mode is round-half-to-even.
png_byte quantize(double v) {
    const double rounded = std::nearbyint(v);
    if (rounded <= 0.0) return 0;
    if (rounded >= 255.0) return 255;
    return static_cast<png_byte>(rounded);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    FileHandle file(std::fopen(path.string().c_str(), "rb"));
    if (!file) {
        throw Error("read_png: cannot open " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("read_png: png_create_info_struct failed");
    }

    std::vector<png_byte> raster;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("read_png: failed to decode " + path.string());
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    // Normalize every input layout to 8-bit RGB.
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    const auto color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    const std::size_t height = png_get_image_height(png, info);
    const std::size_t width = png_get_image_width(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("read_png: unexpected row stride in " + path.string());
    }

    raster.resize(height * stride);
    row_ptrs.resize(height);
    for (std::size_t y = 0; y < height; ++y) row_ptrs[y] = raster.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const png_byte* px = raster.data() + y * stride + 3 * x;
            img.at(0, y, x) = px[0];
            img.at(1, y, x) = px[1];
            img.at(2, y, x) = px[2];
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    FileHandle file(std::fopen(path.string().c_str(), "wb"));
    if (!file) {
        throw Error("write_png: cannot open " + path.string());
    }

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("write_png: png_create_info_struct failed");
    }

    std::vector<png_byte> raster(img.height() * img.width() * 3);
    std::vector<png_bytep> row_ptrs(img.height());
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("write_png: failed to encode " + path.string());
    }

    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            png_byte* px = raster.data() + (y * img.width() + x) * 3;
            px[0] = quantize(img.at(0, y, x));
            px[1] = quantize(img.at(1, y, x));
            px[2] = quantize(img.at(2, y, x));
        }
        row_ptrs[y] = raster.data() + y * img.width() * 3;
    }

    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace srcd
