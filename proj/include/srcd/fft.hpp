#pragma once

#include <cstddef>
#include <vector>

#include "srcd/image.hpp"

namespace srcd {

/// Polar form of a 2-D DFT: amplitude (modulus, >= 0) and phase (argument,
/// in (-pi, pi]), both H x W row-major.
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> amplitude;
    std::vector<double> phase;
};

/// Unnormalized forward 2-D DFT of a real plane. Arbitrary (including prime)
/// dimensions are supported; planes are never padded.
Spectrum fft2(const std::vector<double>& plane, std::size_t height, std::size_t width);
Spectrum fft2(const GrayImage& plane);

/// Real part of the inverse DFT with 1/(H*W) normalization.
/// Convention pair is fixed: fft2 unnormalized, ifft2 carries the full factor.
std::vector<double> ifft2(const Spectrum& spec);

}  // namespace srcd
