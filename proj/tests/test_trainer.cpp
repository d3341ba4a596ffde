#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "srcd/errors.hpp"
#include "srcd/trainer.hpp"

using namespace srcd;

TEST_CASE("total_loss") {
    CHECK(total_loss(3.7, 10.0, 20.0, 0.0, 0.0) == 3.7);
    CHECK(total_loss(1.0, 2.0, 3.0, 0.1, 0.01) == doctest::Approx(1.23));
    // linear in each component
    const double base = total_loss(1.0, 2.0, 3.0, 0.1, 0.01);
    CHECK(total_loss(1.0, 4.0, 3.0, 0.1, 0.01) - base == doctest::Approx(0.1 * 2.0));
    CHECK(total_loss(1.0, 2.0, 6.0, 0.1, 0.01) - base == doctest::Approx(0.01 * 3.0));
}

TEST_CASE("gradcheck is near-exact on a quadratic") {
    Rng rng(601);
    std::vector<double> x(8);
    for (double& v : x) v = rng.normal();
    std::vector<double> grad(8);
    for (std::size_t i = 0; i < 8; ++i) grad[i] = 2.0 * (i + 1.0) * x[i] - 3.0;
    auto f = [](std::span<const double> v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i + 1.0) * v[i] * v[i] - 3.0 * v[i];
        return s;
    };
    CHECK(gradcheck(f, x, grad, 1e-5) < 1e-8);
}

TEST_CASE("gradcheck flags a wrong gradient") {
    const std::vector<double> x{1.0, 2.0};
    const std::vector<double> wrong{2.0, 5.0};  // true gradient is (2, 4)
    auto f = [](std::span<const double> v) { return v[0] * v[0] + v[1] * v[1]; };
    CHECK(gradcheck(f, x, wrong, 1e-5) > 0.1);
}

TEST_CASE("canned loss-path gradchecks stay inside tolerance") {
    for (std::uint64_t seed : {1ULL, 42ULL, 977ULL}) {
        const GradCheckReport report = run_gradcheck(seed, 1e-5);
        CHECK(report.quadratic < 1e-8);
        CHECK(report.lsr < 1e-4);
        CHECK(report.gsr < 1e-4);
    }
}

TEST_CASE("run_demo is deterministic") {
    TrainConfig cfg;
    cfg.iterations = 40;
    cfg.seed = 7;
    const TrainReport a = run_demo(cfg);
    const TrainReport b = run_demo(cfg);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.source_accuracy == b.source_accuracy);
    CHECK(a.shifted_accuracy == b.shifted_accuracy);
}

TEST_CASE("run_demo descends on the synthetic task") {
    TrainConfig cfg;
    cfg.iterations = 500;
    cfg.num_classes = 3;
    cfg.feature_dim = 64;
    cfg.seed = 11;
    const TrainReport report = run_demo(cfg);
    REQUIRE(report.loss_trace.size() == 500);
    CHECK(report.loss_trace.back() < report.loss_trace.front());
    CHECK(report.source_accuracy > 0.5);
}

TEST_CASE("loss traces stay finite over a 100-seed sweep") {
    TrainConfig cfg;
    cfg.iterations = 50;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        cfg.seed = seed;
        const TrainReport report = run_demo(cfg);
        for (double v : report.loss_trace) CHECK(std::isfinite(v));
        CHECK(std::isfinite(report.source_accuracy));
        CHECK(std::isfinite(report.shifted_accuracy));
    }
}

TEST_CASE("orthogonal features collapse the reasoning terms to the CE path") {
    // Mutually orthogonal one-hot features: every similarity is 0, the local
    // graph vanishes and only the classification terms remain.
    const std::size_t dim = 8;
    std::vector<InstanceFeature> v1, v2;
    for (int i = 0; i < 2; ++i) {
        std::vector<double> a(dim, 0.0), b(dim, 0.0);
        a[i] = 1.0;
        b[4 + i] = 1.0;
        v1.push_back({a, i, 1});
        v2.push_back({b, i, 2});
    }
    AttributeWeights attr(2);
    const RelationGraph graph = build_local_graph(v1, v2, attr);
    for (double v : graph.adjacency.data()) CHECK(v == 0.0);

    Rng rng(613);
    const LinearClassifier head = LinearClassifier::random_init(3, dim, rng);
    const Matrix features = stack_features(v1, v2);
    const LsrBackprop bp = lsr_forward_backward(features, graph, {0, 1, 0, 1}, head);
    CHECK(bp.loss.kl == doctest::Approx(0.0));
    CHECK(bp.loss.total == doctest::Approx(bp.loss.cl));
}

TEST_CASE("invalid configurations are rejected") {
    TrainConfig cfg;
    cfg.feature_dim = 10;  // k = 4 does not divide 10
    CHECK_THROWS_AS(run_demo(cfg), ConfigInvalid);
    cfg = TrainConfig{};
    cfg.lambda = -0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
    cfg = TrainConfig{};
    cfg.num_classes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
}
