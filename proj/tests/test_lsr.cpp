#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "srcd/errors.hpp"
#include "srcd/lsr.hpp"
#include "srcd/trainer.hpp"

using namespace srcd;

namespace {

InstanceFeature feature(std::vector<double> v, int label, int domain = 1) {
    return InstanceFeature{std::move(v), label, domain};
}

std::vector<InstanceFeature> random_features(std::size_t count, std::size_t dim, int classes,
                                             int domain, Rng& rng) {
    std::vector<InstanceFeature> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        out.push_back(feature(std::move(v), static_cast<int>(rng.uniform_index(classes)), domain));
    }
    return out;
}

}  // namespace

TEST_CASE("split_attributes") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
    SUBCASE("k = 1 is the whole vector") {
        const auto segs = split_attributes(v, 1);
        REQUIRE(segs.size() == 1);
        CHECK(std::vector<double>(segs[0].begin(), segs[0].end()) == v);
    }
    SUBCASE("k = 4 slices contiguously") {
        const auto segs = split_attributes(v, 4);
        REQUIRE(segs.size() == 4);
        CHECK(segs[0][0] == 1);
        CHECK(segs[0][1] == 2);
        CHECK(segs[3][0] == 7);
        CHECK(segs[3][1] == 8);
    }
    SUBCASE("k = 3 does not divide 8") {
        CHECK_THROWS_AS(split_attributes(v, 3), IndivisibleDimension);
    }
}

TEST_CASE("weighted_similarity") {
    AttributeWeights uniform(2);
    SUBCASE("self-similarity is 1") {
        const auto a = feature({1, 2, 3, 4}, 0);
        CHECK(weighted_similarity(a, a, uniform) == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal segments give 0") {
        const auto a = feature({1, 0, 0, 2}, 0);
        const auto b = feature({0, 3, 5, 0}, 1);
        CHECK(weighted_similarity(a, b, uniform) == doctest::Approx(0.0));
    }
    SUBCASE("segment cosines (1, 0) average to 0.5") {
        const auto a = feature({1, 0, 0, 1}, 0);
        const auto b = feature({1, 0, 1, 0}, 1);
        CHECK(weighted_similarity(a, b, uniform) == doctest::Approx(0.5));
    }
    SUBCASE("asymmetric when the classes carry different weights") {
        AttributeWeights w(2, 0.5);
        w.ema_update({{0, {1.0, 0.0}}, {1, {0.0, 1.0}}});
        const auto a = feature({1, 0, 0, 1}, 0);
        const auto b = feature({1, 0, 1, 0}, 1);
        CHECK(weighted_similarity(a, b, w) != doctest::Approx(weighted_similarity(b, a, w)));
    }
    SUBCASE("zero weights are degenerate") {
        AttributeWeights w(2, 1.0);
        w.ema_update({{0, {0.0, 0.0}}});  // gamma=1 overwrites the all-ones init
        const auto a = feature({1, 0, 0, 1}, 0);
        CHECK_THROWS_AS(weighted_similarity(a, a, w), DegenerateWeights);
    }
}

TEST_CASE("weighted_similarity properties") {
    Rng rng(401);
    AttributeWeights w(4, 0.9);
    w.ema_update({{0, {0.3, 1.2, 0.0, 0.5}}});
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> va(16), vb(16);
        for (double& x : va) x = rng.normal();
        for (double& x : vb) x = rng.normal();
        auto a = feature(va, 0);
        auto b = feature(vb, 1);

        const double s = weighted_similarity(a, b, w);
        CHECK(std::abs(s) <= 1.0 + 1e-12);  // convex combination of cosines

        // Scaling one segment of both arguments leaves S unchanged.
        const double factor = 0.1 + rng.uniform(0.0, 5.0);
        for (std::size_t i = 4; i < 8; ++i) {
            a.vector[i] *= factor;
            b.vector[i] *= factor;
        }
        CHECK(weighted_similarity(a, b, w) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("estimate_attribute_weights") {
    SUBCASE("identical members give all-ones") {
        const std::vector<InstanceFeature> batch{feature({1, 2, 3, 4}, 5),
                                                 feature({1, 2, 3, 4}, 5)};
        const auto obs = estimate_attribute_weights(batch, 2);
        REQUIRE(obs.count(5) == 1);
        CHECK(obs.at(5)[0] == doctest::Approx(1.0));
        CHECK(obs.at(5)[1] == doctest::Approx(1.0));
    }
    SUBCASE("an orthogonal segment zeroes its weight") {
        const std::vector<InstanceFeature> batch{feature({1, 0, 1, 1}, 2),
                                                 feature({0, 1, 1, 1}, 2)};
        const auto obs = estimate_attribute_weights(batch, 2);
        CHECK(obs.at(2)[0] == doctest::Approx(0.0));
        CHECK(obs.at(2)[1] == doctest::Approx(1.0));
    }
    SUBCASE("singleton classes produce no observation") {
        const std::vector<InstanceFeature> batch{feature({1, 2}, 0), feature({3, 4}, 1),
                                                 feature({5, 6}, 1)};
        const auto obs = estimate_attribute_weights(batch, 1);
        CHECK(obs.count(0) == 0);
        CHECK(obs.count(1) == 1);
    }
}

TEST_CASE("ema_update") {
    SUBCASE("printed substitution case") {
        AttributeWeights w(1, 0.99);
        w.ema_update({{0, {0.0}}});  // prev = 1 (init), obs = 0
        CHECK(w.weights_for(0)[0] == doctest::Approx(0.01));
        CHECK(w.iteration() == 1);
    }
    SUBCASE("observation equal to the store is a fixed point") {
        AttributeWeights w(2, 0.99);
        w.ema_update({{1, {0.25, 0.75}}});
        const auto before = w.weights_for(1);
        AttributeObservation obs{{1, before}};
        w.ema_update(obs);
        CHECK(w.weights_for(1)[0] == doctest::Approx(before[0]));
        CHECK(w.weights_for(1)[1] == doctest::Approx(before[1]));
    }
    SUBCASE("unobserved classes are untouched") {
        AttributeWeights w(1, 0.5);
        w.ema_update({{0, {0.2}}});
        const double kept = w.weights_for(0)[0];
        w.ema_update({{7, {0.9}}});
        CHECK(w.weights_for(0)[0] == kept);
        CHECK(w.weights_for(3) == std::vector<double>{1.0});  // unseen reads all-ones
    }
    SUBCASE("constant observation converges geometrically at rate 1 - gamma") {
        const double gamma = 0.99;
        const double target = 0.4;
        AttributeWeights w(1, gamma);
        double prev_err = 1.0 - target;  // all-ones init
        for (int step = 0; step < 100; ++step) {
            w.ema_update({{0, {target}}});
            const double err = w.weights_for(0)[0] - target;
            if (std::abs(prev_err) > 1e-280) {
                CHECK(err == doctest::Approx(prev_err * (1.0 - gamma)).epsilon(1e-9));
            }
            prev_err = err;
        }
        CHECK(std::abs(prev_err) < std::pow(1.0 - gamma, 90));
    }
}

TEST_CASE("build_local_graph") {
    AttributeWeights w(2);
    SUBCASE("single identical pair") {
        const std::vector<InstanceFeature> v1{feature({1, 2, 3, 4}, 0, 1)};
        const std::vector<InstanceFeature> v2{feature({1, 2, 3, 4}, 0, 2)};
        const RelationGraph g = build_local_graph(v1, v2, w);
        CHECK(g.adjacency(0, 0) == 0.0);
        CHECK(g.adjacency(1, 1) == 0.0);
        CHECK(g.adjacency(0, 1) == doctest::Approx(1.0));
        CHECK(g.adjacency(1, 0) == doctest::Approx(1.0));
    }
    SUBCASE("diagonal blocks are exactly zero") {
        Rng rng(421);
        const auto v1 = random_features(3, 8, 2, 1, rng);
        const auto v2 = random_features(2, 8, 2, 2, rng);
        const RelationGraph g = build_local_graph(v1, v2, w);
        CHECK(g.adjacency.rows() == 5);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) CHECK(g.adjacency(i, j) == 0.0);
        for (std::size_t i = 3; i < 5; ++i)
            for (std::size_t j = 3; j < 5; ++j) CHECK(g.adjacency(i, j) == 0.0);
    }
    SUBCASE("orthogonal features give an all-zero graph") {
        const std::vector<InstanceFeature> v1{feature({1, 0, 2, 0}, 0, 1)};
        const std::vector<InstanceFeature> v2{feature({0, 3, 0, 4}, 1, 2)};
        const RelationGraph g = build_local_graph(v1, v2, w);
        for (double v : g.adjacency.data()) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("empty domains are rejected") {
        const std::vector<InstanceFeature> v1{feature({1, 2}, 0, 1)};
        CHECK_THROWS_AS(build_local_graph(v1, {}, w), EmptyDomain);
        CHECK_THROWS_AS(build_local_graph({}, v1, w), EmptyDomain);
    }
    SUBCASE("optional row normalization bounds each row's L1 mass") {
        Rng rng(439);
        const auto v1 = random_features(3, 8, 2, 1, rng);
        const auto v2 = random_features(4, 8, 2, 2, rng);
        const RelationGraph raw = build_local_graph(v1, v2, w);
        const RelationGraph scaled = build_local_graph(v1, v2, w, true);
        for (std::size_t r = 0; r < 7; ++r) {
            double raw_l1 = 0.0, scaled_l1 = 0.0;
            for (double v : raw.adjacency.row(r)) raw_l1 += std::abs(v);
            for (double v : scaled.adjacency.row(r)) scaled_l1 += std::abs(v);
            if (raw_l1 > 0.0) {
                CHECK(scaled_l1 == doctest::Approx(1.0));
                // Same direction, rescaled.
                CHECK(scaled.adjacency(r, 0) * raw_l1 == doctest::Approx(raw.adjacency(r, 0)));
            }
        }
    }
}

TEST_CASE("fuse_local") {
    SUBCASE("zero adjacency is the identity") {
        Rng rng(431);
        RelationGraph g{Matrix(4, 4), 2, 2};
        const Matrix v = oracle::random_matrix(4, 6, rng);
        const Matrix fused = fuse_local(g, v);
        CHECK(fused.data() == v.data());
    }
    SUBCASE("two identical unit nodes double") {
        RelationGraph g{Matrix(2, 2), 1, 1};
        g.adjacency(0, 1) = 1.0;
        g.adjacency(1, 0) = 1.0;
        Matrix v(2, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            v(0, c) = 0.5 + c;
            v(1, c) = 0.5 + c;
        }
        const Matrix fused = fuse_local(g, v);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(fused(0, c) == doctest::Approx(2.0 * v(0, c)));
            CHECK(fused(1, c) == doctest::Approx(2.0 * v(1, c)));
        }
    }
    SUBCASE("matches the brute-force product") {
        Rng rng(433);
        AttributeWeights w(2);
        const auto v1 = random_features(2, 8, 3, 1, rng);
        const auto v2 = random_features(1, 8, 3, 2, rng);
        const RelationGraph g = build_local_graph(v1, v2, w);
        const Matrix v = stack_features(v1, v2);
        const Matrix fused = fuse_local(g, v);
        const Matrix ref = oracle::naive_matmul(add_identity(g.adjacency), v);
        for (std::size_t i = 0; i < fused.data().size(); ++i) {
            CHECK(fused.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-9));
        }
    }
    SUBCASE("row mismatch is rejected") {
        RelationGraph g{Matrix(3, 3), 2, 1};
        CHECK_THROWS_AS(fuse_local(g, Matrix(4, 2)), ShapeMismatch);
    }
}

TEST_CASE("softmax, KL and cross entropy") {
    SUBCASE("identical distributions have zero divergence") {
        const std::vector<double> logits{0.3, -1.2, 2.0};
        const auto p = softmax(logits);
        CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
    }
    SUBCASE("uniform two-class CE is ln 2") {
        CHECK(cross_entropy(std::vector<double>{0.0, 0.0}, 0) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("hand-computed KL") {
        const std::vector<double> p{0.5, 0.5};
        const std::vector<double> q{0.9, 0.1};
        const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
        CHECK(kl_divergence(p, q) == doctest::Approx(expected));
    }
    SUBCASE("softmax is shift-invariant and sums to one") {
        const std::vector<double> logits{100.0, 101.0, 99.0};
        const std::vector<double> shifted{0.0, 1.0, -1.0};
        const auto a = softmax(logits);
        const auto b = softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == doctest::Approx(b[i]));
            sum += a[i];
        }
        CHECK(sum == doctest::Approx(1.0));
    }
}

TEST_CASE("lsr_loss") {
    SUBCASE("zero adjacency collapses the KL term") {
        Rng rng(443);
        const Matrix logits = oracle::random_matrix(4, 3, rng);
        const std::vector<int> labels{0, 2, 1, 0};
        const LsrLoss loss = lsr_loss(logits, logits, labels);
        CHECK(loss.kl == doctest::Approx(0.0));
        CHECK(loss.total == doctest::Approx(loss.cl));
    }
    SUBCASE("saturated correct logits give a tiny CE") {
        Matrix logits(2, 2);
        logits(0, 0) = 1000.0;
        logits(1, 1) = 1000.0;
        const LsrLoss loss = lsr_loss(logits, logits, {0, 1});
        CHECK(loss.cl < 1e-3);
    }
    SUBCASE("KL is nonnegative") {
        Rng rng(449);
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix a = oracle::random_matrix(3, 4, rng);
            const Matrix b = oracle::random_matrix(3, 4, rng);
            CHECK(lsr_loss(a, b, {0, 1, 2}).kl >= -1e-12);
        }
    }
}

TEST_CASE("lsr_loss logit gradients match finite differences") {
    Rng rng(457);
    const std::size_t rows = 4, classes = 3;
    const Matrix logits_graph = oracle::random_matrix(rows, classes, rng);
    const Matrix logits = oracle::random_matrix(rows, classes, rng);
    std::vector<int> labels(rows);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_index(classes));

    const LsrLoss base = lsr_loss(logits_graph, logits, labels);

    auto f_graph = [&](std::span<const double> v) {
        Matrix m(rows, classes);
        std::copy(v.begin(), v.end(), m.data().begin());
        return lsr_loss(m, logits, labels).total;
    };
    CHECK(gradcheck(f_graph, logits_graph.data(), base.d_logits_graph.data(), 1e-5) < 1e-4);

    auto f_raw = [&](std::span<const double> v) {
        Matrix m(rows, classes);
        std::copy(v.begin(), v.end(), m.data().begin());
        return lsr_loss(logits_graph, m, labels).total;
    };
    CHECK(gradcheck(f_raw, logits.data(), base.d_logits.data(), 1e-5) < 1e-4);
}

TEST_CASE("lsr_forward_backward gradients on an 8-node instance") {
    Rng rng(461);
    const std::size_t dim = 16, k = 4, classes = 3;
    const auto v1 = random_features(4, dim, classes, 1, rng);
    const auto v2 = random_features(4, dim, classes, 2, rng);
    std::vector<int> labels;
    for (const auto& f : v1) labels.push_back(f.label);
    for (const auto& f : v2) labels.push_back(f.label);

    std::vector<InstanceFeature> all = v1;
    all.insert(all.end(), v2.begin(), v2.end());
    AttributeWeights attr(k);
    attr.ema_update(estimate_attribute_weights(all, k));
    const RelationGraph graph = build_local_graph(v1, v2, attr);
    const Matrix features = stack_features(v1, v2);
    const LinearClassifier head = LinearClassifier::random_init(classes, dim, rng);

    const LsrBackprop bp = lsr_forward_backward(features, graph, labels, head);

    auto f_features = [&](std::span<const double> v) {
        Matrix m(features.rows(), features.cols());
        std::copy(v.begin(), v.end(), m.data().begin());
        return lsr_loss(head.logits(fuse_local(graph, m)), head.logits(m), labels).total;
    };
    CHECK(gradcheck(f_features, features.data(), bp.d_features.data(), 1e-5) < 1e-4);

    auto f_weights = [&](std::span<const double> v) {
        LinearClassifier h = head;
        std::copy(v.begin(), v.end(), h.weights.data().begin());
        return lsr_loss(h.logits(fuse_local(graph, features)), h.logits(features), labels).total;
    };
    CHECK(gradcheck(f_weights, head.weights.data(), bp.d_weights.data(), 1e-5) < 1e-4);

    auto f_bias = [&](std::span<const double> v) {
        LinearClassifier h = head;
        std::copy(v.begin(), v.end(), h.bias.begin());
        return lsr_loss(h.logits(fuse_local(graph, features)), h.logits(features), labels).total;
    };
    CHECK(gradcheck(f_bias, head.bias, bp.d_bias, 1e-5) < 1e-4);
}
