#pragma once

#include <cstddef>
#include <vector>

#include "srcd/image.hpp"
#include "srcd/rng.hpp"

namespace srcd {

/// Co-occurrence configuration. theta_deg picks the offset direction:
///   0 -> (row, col+d)   45 -> (row-d, col+d)
///  90 -> (row-d, col)  135 -> (row-d, col-d)
struct GlcmConfig {
    int levels = 32;    // gray quantization bins in [2, 256]
    int distance = 1;   // relative pixel distance d >= 1
    int theta_deg = 0;  // one of {0, 45, 90, 135}

    void validate() const;
};

/// Normalized gray-level co-occurrence matrix. Entries are ordered-pair
/// probabilities (the matrix is not symmetrized) and sum to 1.
struct Glcm {
    int levels = 0;
    std::vector<double> probs;  // levels * levels, row-major
    std::size_t pair_count = 0;

    double at(int i, int j) const { return probs[static_cast<std::size_t>(i) * levels + j]; }
};

/// Patch sampling policy. Side fractions are relative to the image sides;
/// the defaults keep patches local, between 1/8 and 1/4 of the frame.
struct PatchPolicy {
    double min_frac = 0.125;
    double max_frac = 0.25;
    int max_retries = 10;

    void validate() const;
};

struct PatchBounds {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct Patch {
    Image image;
    PatchBounds bounds;
    double entropy = 0.0;        // ENT of the patch
    double image_entropy = 0.0;  // ENT of the whole source image
    bool fallback = false;       // true when max_retries were exhausted
};

/// Ordered co-occurrence counts of quantized gray levels, normalized to a
/// probability distribution. Throws DegenerateImage when the image admits no
/// valid (d, theta)-offset pixel pair.
Glcm compute_glcm(const GrayImage& gray, const GlcmConfig& cfg);

/// Shannon entropy -sum p ln p with 0 ln 0 = 0. Natural log.
double glcm_entropy(const Glcm& g);

/// Draws random patches until one is at least as texture-complex as the
/// whole image, i.e. ENT(P) >= ENT(X); a patch with lower entropy is
/// discarded and reselected. After max_retries rejections the
/// highest-entropy candidate seen is returned with fallback = true.
/// Throws ImageTooSmall for images under 8x8.
///
/// Draw order is part of the seeded-determinism contract: per attempt the
/// generator is consumed as height fraction, width fraction, top, left.
Patch select_patch(const Image& img, const PatchPolicy& policy, const GlcmConfig& cfg, Rng& rng);

}  // namespace srcd
