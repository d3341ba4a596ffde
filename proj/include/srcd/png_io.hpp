#pragma once

#include <filesystem>

#include "srcd/image.hpp"

namespace srcd {

/// Read a PNG as 8-bit RGB. Palette, grayscale, 16-bit and alpha variants are
/// converted on load.
Image read_png(const std::filesystem::path& path);

/// Write as 8-bit RGB. Samples are clamped to [0, 255] and quantized with
/// round-half-to-even. Output bytes are deterministic for identical pixels.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace srcd
