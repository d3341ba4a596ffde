#include "srcd/glcm.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

namespace {

struct Offset {
    int dr;
    int dc;
};

Offset offset_for(const GlcmConfig& cfg) {
    const int d = cfg.distance;
    switch (cfg.theta_deg) {
        case 0: return {0, d};
        case 45: return {-d, d};
        case 90: return {-d, 0};
        case 135: return {-d, -d};
        default: throw ConfigInvalid("GlcmConfig: theta must be one of 0, 45, 90, 135");
    }
}

int quantize_level(double v, int levels) {
    const int q = static_cast<int>(std::floor(v * levels / 256.0));
    return std::clamp(q, 0, levels - 1);
}

GrayImage crop_gray(const GrayImage& gray, const PatchBounds& b) {
    GrayImage out(b.height, b.width);
    for (std::size_t y = 0; y < b.height; ++y) {
        for (std::size_t x = 0; x < b.width; ++x) {
            out.at(y, x) = gray.at(b.top + y, b.left + x);
        }
    }
    return out;
}

Image crop_image(const Image& img, const PatchBounds& b) {
    Image out(b.height, b.width);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < b.height; ++y) {
            for (std::size_t x = 0; x < b.width; ++x) {
                out.at(c, y, x) = img.at(c, b.top + y, b.left + x);
            }
        }
    }
    return out;
}

}  // namespace

void GlcmConfig::validate() const {
    if (levels < 2 || levels > 256) throw ConfigInvalid("GlcmConfig: levels must be in [2, 256]");
    if (distance < 1) throw ConfigInvalid("GlcmConfig: distance must be >= 1");
    if (theta_deg != 0 && theta_deg != 45 && theta_deg != 90 && theta_deg != 135) {
        throw ConfigInvalid("GlcmConfig: theta must be one of 0, 45, 90, 135");
    }
}

void PatchPolicy::validate() const {
    if (!(min_frac > 0.0) || !(min_frac <= max_frac) || !(max_frac <= 1.0)) {
        throw ConfigInvalid("PatchPolicy: require 0 < min_frac <= max_frac <= 1");
    }
    if (max_retries < 1) throw ConfigInvalid("PatchPolicy: max_retries must be >= 1");
}

Glcm compute_glcm(const GrayImage& gray, const GlcmConfig& cfg) {
    cfg.validate();
    const Offset off = offset_for(cfg);
    const int h = static_cast<int>(gray.height());
    const int w = static_cast<int>(gray.width());

    Glcm g;
    g.levels = cfg.levels;
    g.probs.assign(static_cast<std::size_t>(cfg.levels) * cfg.levels, 0.0);

    for (int y = 0; y < h; ++y) {
        const int y2 = y + off.dr;
        if (y2 < 0 || y2 >= h) continue;
        for (int x = 0; x < w; ++x) {
            const int x2 = x + off.dc;
            if (x2 < 0 || x2 >= w) continue;
            const int i = quantize_level(gray.at(y, x), cfg.levels);
            const int j = quantize_level(gray.at(y2, x2), cfg.levels);
            g.probs[static_cast<std::size_t>(i) * cfg.levels + j] += 1.0;
            ++g.pair_count;
        }
    }

    if (g.pair_count == 0) {
        throw DegenerateImage("compute_glcm: no valid pixel pair for the requested offset");
    }
    const double inv = 1.0 / static_cast<double>(g.pair_count);
    for (double& p : g.probs) p *= inv;
    return g;
}

double glcm_entropy(const Glcm& g) {
    double ent = 0.0;
    for (double p : g.probs) {
        if (p > 0.0) ent -= p * std::log(p);
    }
    return ent;
}

Patch select_patch(const Image& img, const PatchPolicy& policy, const GlcmConfig& cfg, Rng& rng) {
    policy.validate();
    cfg.validate();
    if (img.height() < 8 || img.width() < 8) {
        throw ImageTooSmall("select_patch: image must be at least 8x8");
    }

    const GrayImage gray = to_grayscale(img);
    const double image_ent = glcm_entropy(compute_glcm(gray, cfg));

    // A patch must be able to hold at least one offset pair of its own GLCM.
    const Offset off = offset_for(cfg);
    const std::size_t min_h = static_cast<std::size_t>(std::abs(off.dr)) + 1;
    const std::size_t min_w = static_cast<std::size_t>(std::abs(off.dc)) + 1;

    Patch best;
    bool have_best = false;

    for (int attempt = 0; attempt < policy.max_retries; ++attempt) {
        const double fh = rng.uniform(policy.min_frac, policy.max_frac);
        const double fw = rng.uniform(policy.min_frac, policy.max_frac);
        PatchBounds b;
        b.height = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fh * img.height())),
                                           min_h, img.height());
        b.width = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fw * img.width())),
                                          min_w, img.width());
        b.top = rng.uniform_index(img.height() - b.height + 1);
        b.left = rng.uniform_index(img.width() - b.width + 1);

        const double ent = glcm_entropy(compute_glcm(crop_gray(gray, b), cfg));
        if (ent >= image_ent) {
            return Patch{crop_image(img, b), b, ent, image_ent, false};
        }
        if (!have_best || ent > best.entropy) {
            best = Patch{Image{}, b, ent, image_ent, true};
            have_best = true;
        }
    }

    best.image = crop_image(img, best.bounds);
    return best;
}

}  // namespace srcd
