#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "srcd/gsr.hpp"
#include "srcd/losses.hpp"
#include "srcd/lsr.hpp"
#include "srcd/rng.hpp"

namespace srcd {

struct TrainConfig {
    std::size_t attribute_count = 4;  // k
    std::size_t pool_capacity = 10;   // Z
    double gamma = 0.99;              // attribute-weight EMA rate
    double lambda = 0.1;              // weight of the local reasoning loss
    double beta = 0.01;               // weight of the global reasoning loss
    double learning_rate = 0.02;
    std::size_t iterations = 500;
    std::uint64_t seed = 17;
    std::size_t num_classes = 3;
    std::size_t feature_dim = 64;
    std::size_t batch_per_domain = 8;
    std::size_t eval_samples = 400;

    void validate() const;  // throws ConfigInvalid
};

/// One iteration's instances: weak (domain 1) and strong (domain 2) views of
/// the same underlying samples, sharing labels index for index.
struct SyntheticBatch {
    std::vector<InstanceFeature> weak;
    std::vector<InstanceFeature> strong;
};

/// Gaussian class blobs whose trailing attribute segment is a style block:
/// on the source domain it carries a clean class-correlated pattern (a
/// spurious shortcut), the strong view dilutes it with a random mix the way
/// the amplitude mixup perturbs image style, and the shifted test domain
/// scrambles it entirely while also applying the core-feature transform
/// (sparse rotation plus bias) beyond the trained strength.
class SyntheticTask {
public:
    SyntheticTask(const TrainConfig& cfg, Rng& rng);

    SyntheticBatch sample_batch(Rng& rng) const;

    /// Held-out draws; raw feature plus label.
    std::pair<std::vector<double>, int> sample_source(Rng& rng) const;
    std::pair<std::vector<double>, int> sample_shifted(Rng& rng) const;

private:
    struct Givens {
        std::size_t p = 0;
        std::size_t q = 0;
        double angle = 0.0;
    };
    struct StyleTransform {
        std::vector<Givens> rotations;
        std::vector<double> bias;

        /// Applies the transform at `strength` times the drawn magnitude.
        void apply(std::vector<double>& x, double strength) const;
    };

    std::vector<double> draw_core(int label, Rng& rng) const;
    void write_style(std::vector<double>& x, int label, double mix, Rng& rng) const;
    static StyleTransform draw_transform(std::size_t dim, double max_angle, double bias_norm,
                                         Rng& rng);

    std::size_t num_classes_;
    std::size_t dim_;
    std::size_t style_dim_;  // one attribute segment
    std::size_t core_dim_;
    std::size_t batch_per_domain_;
    Matrix centers_;         // C x core_dim
    Matrix style_patterns_;  // C x style_dim
    double noise_sigma_;
    double view_sigma_;
    double test_strength_;
    StyleTransform shift_;   // acts on the core block
};

/// Combined objective L_det + lambda * L_LSR + beta * L_GSR.
double total_loss(double det, double lsr, double gsr, double lambda, double beta);

struct TrainReport {
    std::vector<double> loss_trace;
    double source_accuracy = 0.0;
    double shifted_accuracy = 0.0;
    TrainConfig config;
    MemoryPool pool;  // final prototype pool, for state dumps
};

/// Full desk-scale loop: synthetic batch -> attribute-weight EMA -> local
/// graph + fusion + L_LSR -> prototypes + pool push + global graph + L_GSR ->
/// combined objective -> gradient step on the classifier head and a learnable
/// linear feature projection. Deterministic for a fixed seed.
TrainReport run_demo(const TrainConfig& cfg);

/// Central-difference gradient verification. Returns the worst guarded
/// relative error max |a - n| / max(floor, |a|, |n|) over all coordinates.
double gradcheck(const std::function<double(std::span<const double>)>& f,
                 std::span<const double> x, std::span<const double> analytic_grad, double step,
                 double floor = 1e-6);

/// Canned verification instances used by the CLI: a quadratic sanity check
/// plus end-to-end checks of the local and global loss paths (features and
/// classifier head jointly, relation graphs held fixed).
struct GradCheckReport {
    double quadratic = 0.0;
    double lsr = 0.0;
    double gsr = 0.0;
};

GradCheckReport run_gradcheck(std::uint64_t seed, double step = 1e-5);

}  // namespace srcd
