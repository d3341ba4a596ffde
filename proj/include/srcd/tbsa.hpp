#pragma once

#include <utility>

#include "srcd/glcm.hpp"
#include "srcd/image.hpp"
#include "srcd/rng.hpp"

namespace srcd {

/// Weak draws the mix ratio from [0, 0.5); Strong draws from [0.5, 1) and
/// additionally applies a horizontal flip after the spectral mix.
enum class AugMode { Weak, Strong };

struct MixRatio {
    double phi = 0.0;

    void validate() const;
};

/// Provenance of one augmentation, written to JSON sidecars by the CLI.
struct AugRecord {
    double phi = 0.0;
    PatchBounds patch_bounds;
    double patch_entropy = 0.0;
    double image_entropy = 0.0;
    bool flipped = false;
    bool patch_fallback = false;
};

struct Augmented {
    Image image;
    AugRecord record;
};

/// Grafts the patch's amplitude spectrum onto the image: the patch is resized
/// to the image's dimensions, then per channel
///   mixed_amp = (1 - phi) * Amp(img) + phi * Amp(patch)
/// and the output is the inverse transform of (mixed_amp, Pha(img)).
/// The phase spectrum of the image is kept untouched. Output is clamped to
/// [0, 255]; amplitude_mix_unclamped exposes the pre-clamp planes.
Image amplitude_mix(const Image& img, const Image& patch, MixRatio phi);
Image amplitude_mix_unclamped(const Image& img, const Image& patch, MixRatio phi);

/// Full augmentation: entropy-gated patch selection, a mode-dependent phi
/// draw, the amplitude mix, and (Strong only) a horizontal flip.
Augmented augment(const Image& img, AugMode mode, const PatchPolicy& policy, const GlcmConfig& cfg,
                  Rng& rng);

/// One weak and one strong augmentation of the same image; the two outputs
/// share the input's semantics but carry different styles.
std::pair<Augmented, Augmented> augment_pair(const Image& img, const PatchPolicy& policy,
                                             const GlcmConfig& cfg, Rng& rng);

}  // namespace srcd
