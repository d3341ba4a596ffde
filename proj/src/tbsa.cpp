#include "srcd/tbsa.hpp"

#include "srcd/errors.hpp"
#include "srcd/fft.hpp"

namespace srcd {

void MixRatio::validate() const {
    if (!(phi >= 0.0) || !(phi < 1.0)) {
        throw ConfigInvalid("MixRatio: phi must lie in [0, 1)");
    }
}

Image amplitude_mix_unclamped(const Image& img, const Image& patch, MixRatio phi) {
    phi.validate();
    if (patch.height() == 0 || patch.width() == 0) {
        throw ConfigInvalid("amplitude_mix: patch must be nonempty");
    }

    const Image resized = resize_bilinear(patch, img.height(), img.width());
    Image out(img.height(), img.width());
    for (int c = 0; c < 3; ++c) {
        Spectrum spec = fft2(img.plane(c), img.height(), img.width());
        const Spectrum patch_spec = fft2(resized.plane(c), img.height(), img.width());
        for (std::size_t i = 0; i < spec.amplitude.size(); ++i) {
            spec.amplitude[i] =
                (1.0 - phi.phi) * spec.amplitude[i] + phi.phi * patch_spec.amplitude[i];
        }
        out.plane(c) = ifft2(spec);
    }
    return out;
}

Image amplitude_mix(const Image& img, const Image& patch, MixRatio phi) {
    Image out = amplitude_mix_unclamped(img, patch, phi);
    clamp_pixels(out);
    return out;
}

Augmented augment(const Image& img, AugMode mode, const PatchPolicy& policy, const GlcmConfig& cfg,
                  Rng& rng) {
    const Patch patch = select_patch(img, policy, cfg, rng);
    const double phi =
        mode == AugMode::Weak ? rng.uniform(0.0, 0.5) : rng.uniform(0.5, 1.0);

    Image mixed = amplitude_mix(img, patch.image, MixRatio{phi});
    const bool flip = mode == AugMode::Strong;
    if (flip) mixed = hflip(mixed);

    AugRecord record;
    record.phi = phi;
    record.patch_bounds = patch.bounds;
    record.patch_entropy = patch.entropy;
    record.image_entropy = patch.image_entropy;
    record.flipped = flip;
    record.patch_fallback = patch.fallback;
    return Augmented{std::move(mixed), record};
}

std::pair<Augmented, Augmented> augment_pair(const Image& img, const PatchPolicy& policy,
                                             const GlcmConfig& cfg, Rng& rng) {
    Augmented weak = augment(img, AugMode::Weak, policy, cfg, rng);
    Augmented strong = augment(img, AugMode::Strong, policy, cfg, rng);
    return {std::move(weak), std::move(strong)};
}

}  // namespace srcd
