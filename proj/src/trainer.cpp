#include "srcd/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

namespace {

// Synthetic-task shape. The style block is a deliberate shortcut: clean and
// class-correlated on the source, diluted on the strong view, scrambled on
// the shifted test domain. The core block carries the real semantics and is
// perturbed by the rotation-plus-bias transform, at strength 1 in training
// and extrapolated to kTestStrength at test time.
constexpr double kCenterScale = 0.6;    // class-center spread per core coordinate
constexpr double kNoiseSigma = 0.6;     // intra-class spread on core features
constexpr double kViewSigma = 0.3;      // per-view jitter between weak/strong
constexpr double kStyleScale = 2.0;     // style-pattern spread per coordinate
constexpr double kStyleNoise = 0.3;     // style jitter on the source domain
constexpr double kTrainMaxAngle = 0.25; // radians per Givens plane
constexpr double kTrainBiasNorm = 1.5;
constexpr double kTestStrength = 2.0;

Matrix identity_matrix(std::size_t dim) {
    Matrix m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

std::size_t argmax_index(std::span<const double> row) {
    return static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

void TrainConfig::validate() const {
    if (attribute_count == 0) throw ConfigInvalid("TrainConfig: k must be >= 1");
    if (feature_dim == 0 || feature_dim % attribute_count != 0) {
        throw ConfigInvalid("TrainConfig: feature_dim must be a positive multiple of k");
    }
    if (pool_capacity == 0) throw ConfigInvalid("TrainConfig: Z must be >= 1");
    if (lambda < 0.0 || beta < 0.0) throw ConfigInvalid("TrainConfig: lambda/beta must be >= 0");
    if (!(gamma >= 0.0) || !(gamma <= 1.0)) throw ConfigInvalid("TrainConfig: gamma must be in [0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigInvalid("TrainConfig: learning rate must be positive");
    if (iterations == 0) throw ConfigInvalid("TrainConfig: iterations must be >= 1");
    if (num_classes < 2) throw ConfigInvalid("TrainConfig: need at least 2 classes");
    if (batch_per_domain == 0) throw ConfigInvalid("TrainConfig: batch size must be >= 1");
    if (eval_samples == 0) throw ConfigInvalid("TrainConfig: eval_samples must be >= 1");
}

void SyntheticTask::StyleTransform::apply(std::vector<double>& x, double strength) const {
    for (const auto& g : rotations) {
        const double c = std::cos(strength * g.angle);
        const double s = std::sin(strength * g.angle);
        const double xp = x[g.p];
        const double xq = x[g.q];
        x[g.p] = c * xp - s * xq;
        x[g.q] = s * xp + c * xq;
    }
    for (std::size_t d = 0; d < bias.size(); ++d) x[d] += strength * bias[d];
}

SyntheticTask::StyleTransform SyntheticTask::draw_transform(std::size_t dim, double max_angle,
                                                            double bias_norm, Rng& rng) {
    StyleTransform t;
    t.rotations.reserve(dim / 2);
    for (std::size_t i = 0; i < dim / 2; ++i) {
        Givens g;
        g.p = rng.uniform_index(dim);
        g.q = rng.uniform_index(dim);
        if (g.p == g.q) g.q = (g.q + 1) % dim;
        g.angle = rng.uniform(-max_angle, max_angle);
        t.rotations.push_back(g);
    }
    t.bias.resize(dim);
    for (double& b : t.bias) b = rng.normal();
    const double norm = l2_norm(t.bias);
    if (norm > 0.0) {
        for (double& b : t.bias) b *= bias_norm / norm;
    }
    return t;
}

SyntheticTask::SyntheticTask(const TrainConfig& cfg, Rng& rng)
    : num_classes_(cfg.num_classes),
      dim_(cfg.feature_dim),
      style_dim_(cfg.feature_dim / cfg.attribute_count),
      core_dim_(cfg.feature_dim - cfg.feature_dim / cfg.attribute_count),
      batch_per_domain_(cfg.batch_per_domain),
      centers_(cfg.num_classes, cfg.feature_dim - cfg.feature_dim / cfg.attribute_count),
      style_patterns_(cfg.num_classes, cfg.feature_dim / cfg.attribute_count),
      noise_sigma_(kNoiseSigma),
      view_sigma_(kViewSigma),
      test_strength_(kTestStrength) {
    for (double& v : centers_.data()) v = kCenterScale * rng.normal();
    for (double& v : style_patterns_.data()) v = kStyleScale * rng.normal();
    shift_ = draw_transform(core_dim_, kTrainMaxAngle, kTrainBiasNorm, rng);
}

std::vector<double> SyntheticTask::draw_core(int label, Rng& rng) const {
    std::vector<double> core(core_dim_);
    const auto center = centers_.row(static_cast<std::size_t>(label));
    for (std::size_t d = 0; d < core_dim_; ++d) core[d] = center[d] + noise_sigma_ * rng.normal();
    return core;
}

// mix = 0 reproduces the clean source style; mix in (0, 1) dilutes the class
// pattern with a random draw; mix = 1 scrambles it completely.
void SyntheticTask::write_style(std::vector<double>& x, int label, double mix, Rng& rng) const {
    const auto pattern = style_patterns_.row(static_cast<std::size_t>(label));
    for (std::size_t d = 0; d < style_dim_; ++d) {
        const double clean = pattern[d] + kStyleNoise * rng.normal();
        const double scramble = kStyleScale * rng.normal();
        x[core_dim_ + d] = (1.0 - mix) * clean + mix * scramble;
    }
}

SyntheticBatch SyntheticTask::sample_batch(Rng& rng) const {
    SyntheticBatch batch;
    batch.weak.reserve(batch_per_domain_);
    batch.strong.reserve(batch_per_domain_);
    for (std::size_t i = 0; i < batch_per_domain_; ++i) {
        const int label = static_cast<int>(rng.uniform_index(num_classes_));
        const std::vector<double> base = draw_core(label, rng);

        // Both views are augmented, mildly and strongly, mirroring the weak
        // and strong phi intervals of the image pipeline.
        InstanceFeature weak{std::vector<double>(dim_), label, 1};
        for (std::size_t d = 0; d < core_dim_; ++d) {
            weak.vector[d] = base[d] + view_sigma_ * rng.normal();
        }
        write_style(weak.vector, label, rng.uniform(0.0, 0.5), rng);

        InstanceFeature strong{std::vector<double>(dim_), label, 2};
        std::vector<double> core(core_dim_);
        for (std::size_t d = 0; d < core_dim_; ++d) core[d] = base[d] + view_sigma_ * rng.normal();
        shift_.apply(core, 1.0);
        std::copy(core.begin(), core.end(), strong.vector.begin());
        write_style(strong.vector, label, rng.uniform(0.5, 1.0), rng);

        batch.weak.push_back(std::move(weak));
        batch.strong.push_back(std::move(strong));
    }
    return batch;
}

std::pair<std::vector<double>, int> SyntheticTask::sample_source(Rng& rng) const {
    const int label = static_cast<int>(rng.uniform_index(num_classes_));
    std::vector<double> x(dim_);
    const std::vector<double> core = draw_core(label, rng);
    std::copy(core.begin(), core.end(), x.begin());
    write_style(x, label, 0.0, rng);
    return {x, label};
}

std::pair<std::vector<double>, int> SyntheticTask::sample_shifted(Rng& rng) const {
    const int label = static_cast<int>(rng.uniform_index(num_classes_));
    std::vector<double> x(dim_);
    std::vector<double> core = draw_core(label, rng);
    shift_.apply(core, test_strength_);
    std::copy(core.begin(), core.end(), x.begin());
    // On the unseen domain the style block is not just uninformative, it is
    // actively misleading: it carries the pattern of a random class. A model
    // that leaned on the source-domain shortcut pays for it here.
    const int style_label = static_cast<int>(rng.uniform_index(num_classes_));
    write_style(x, style_label, 0.0, rng);
    return {x, label};
}

double total_loss(double det, double lsr, double gsr, double lambda, double beta) {
    return det + lambda * lsr + beta * gsr;
}

TrainReport run_demo(const TrainConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng task_rng = root.split(0);
    Rng train_rng = root.split(1);
    Rng init_rng = root.split(2);
    Rng eval_source_rng = root.split(3);
    Rng eval_shift_rng = root.split(4);

    const SyntheticTask task(cfg, task_rng);

    LinearClassifier head =
        LinearClassifier::random_init(cfg.num_classes, cfg.feature_dim, init_rng);
    Matrix projection = identity_matrix(cfg.feature_dim);  // the surrogate extractor G

    AttributeWeights attr(cfg.attribute_count, cfg.gamma);
    MemoryPool pool(cfg.pool_capacity);

    TrainReport report;
    report.config = cfg;
    report.loss_trace.reserve(cfg.iterations);

    const std::size_t batch_rows = 2 * cfg.batch_per_domain;

    auto project_rows = [&](const Matrix& raw, const Matrix& proj) {
        return matmul(raw, proj.transposed());
    };

    for (std::uint64_t iter = 1; iter <= cfg.iterations; ++iter) {
        const SyntheticBatch raw = task.sample_batch(train_rng);
        const Matrix raw_stack = stack_features(raw.weak, raw.strong);
        const Matrix features = project_rows(raw_stack, projection);

        std::vector<InstanceFeature> v1(cfg.batch_per_domain), v2(cfg.batch_per_domain);
        std::vector<int> labels(batch_rows);
        std::vector<InstanceFeature> all;
        all.reserve(batch_rows);
        for (std::size_t i = 0; i < cfg.batch_per_domain; ++i) {
            const auto row1 = features.row(i);
            const auto row2 = features.row(cfg.batch_per_domain + i);
            v1[i] = InstanceFeature{{row1.begin(), row1.end()}, raw.weak[i].label, 1};
            v2[i] = InstanceFeature{{row2.begin(), row2.end()}, raw.strong[i].label, 2};
            labels[i] = raw.weak[i].label;
            labels[cfg.batch_per_domain + i] = raw.strong[i].label;
        }
        all.insert(all.end(), v1.begin(), v1.end());
        all.insert(all.end(), v2.begin(), v2.end());

        // Local semantic reasoning.
        attr.ema_update(estimate_attribute_weights(all, cfg.attribute_count));
        const RelationGraph graph = build_local_graph(v1, v2, attr);
        const LsrBackprop lsr = lsr_forward_backward(features, graph, labels, head);

        // Surrogate detection loss: plain CE on the raw (unfused) features.
        const Matrix logits = head.logits(features);
        double det = 0.0;
        Matrix d_logits_det(batch_rows, cfg.num_classes);
        const double inv_rows = 1.0 / static_cast<double>(batch_rows);
        for (std::size_t i = 0; i < batch_rows; ++i) {
            const auto p = softmax(logits.row(i));
            det -= std::log(p[labels[i]]);
            for (std::size_t c = 0; c < cfg.num_classes; ++c) {
                d_logits_det(i, c) =
                    inv_rows * (p[c] - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0));
            }
        }
        det *= inv_rows;

        // Global semantic reasoning over the refreshed pool.
        pool.push(compute_prototypes(all, iter));
        const GsrBackprop gsr = gsr_forward_backward(pool, head);

        report.loss_trace.push_back(
            total_loss(det, lsr.loss.total, gsr.loss.total, cfg.lambda, cfg.beta));

        // Accumulate gradients: features first.
        Matrix d_features(batch_rows, cfg.feature_dim);
        Matrix d_weights(cfg.num_classes, cfg.feature_dim);
        std::vector<double> d_bias(cfg.num_classes, 0.0);
        head.accumulate_backward(d_logits_det, features, d_weights, d_bias, &d_features);

        for (std::size_t i = 0; i < d_features.data().size(); ++i) {
            d_features.data()[i] += cfg.lambda * lsr.d_features.data()[i];
        }
        for (std::size_t i = 0; i < d_weights.data().size(); ++i) {
            d_weights.data()[i] += cfg.lambda * lsr.d_weights.data()[i] +
                                   cfg.beta * gsr.d_weights.data()[i];
        }
        for (std::size_t c = 0; c < cfg.num_classes; ++c) {
            d_bias[c] += cfg.lambda * lsr.d_bias[c] + cfg.beta * gsr.d_bias[c];
        }

        // Spread the current-set prototype gradients back over the batch:
        // a prototype is the mean of its class members.
        std::map<int, std::size_t> class_counts;
        for (int y : labels) ++class_counts[y];
        for (std::size_t i = 0; i < batch_rows; ++i) {
            const auto it = gsr.d_current_prototypes.find(labels[i]);
            if (it == gsr.d_current_prototypes.end()) continue;
            const double scale = cfg.beta / static_cast<double>(class_counts[labels[i]]);
            for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
                d_features(i, d) += scale * it->second[d];
            }
        }

        // Chain to the projection: V = X P^T  =>  dP = dV^T X.
        const Matrix d_projection = matmul(d_features.transposed(), raw_stack);

        const double lr = cfg.learning_rate;
        for (std::size_t i = 0; i < projection.data().size(); ++i) {
            projection.data()[i] -= lr * d_projection.data()[i];
        }
        for (std::size_t i = 0; i < head.weights.data().size(); ++i) {
            head.weights.data()[i] -= lr * d_weights.data()[i];
        }
        for (std::size_t c = 0; c < cfg.num_classes; ++c) head.bias[c] -= lr * d_bias[c];
    }

    auto evaluate = [&](Rng& rng, bool shifted) {
        std::size_t correct = 0;
        Matrix one(1, cfg.feature_dim);
        for (std::size_t n = 0; n < cfg.eval_samples; ++n) {
            const auto [x, label] = shifted ? task.sample_shifted(rng) : task.sample_source(rng);
            std::copy(x.begin(), x.end(), one.row(0).begin());
            const Matrix v = project_rows(one, projection);
            const Matrix l = head.logits(v);
            if (argmax_index(l.row(0)) == static_cast<std::size_t>(label)) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(cfg.eval_samples);
    };
    report.source_accuracy = evaluate(eval_source_rng, false);
    report.shifted_accuracy = evaluate(eval_shift_rng, true);
    report.pool = pool;
    return report;
}

namespace {

// Shared packing helpers for the canned gradcheck instances.
void append(std::vector<double>& out, std::span<const double> values) {
    out.insert(out.end(), values.begin(), values.end());
}

LinearClassifier unpack_head(std::span<const double> x, std::size_t offset, std::size_t classes,
                             std::size_t dim) {
    LinearClassifier head(classes, dim);
    std::copy(x.begin() + offset, x.begin() + offset + classes * dim,
              head.weights.data().begin());
    std::copy(x.begin() + offset + classes * dim, x.begin() + offset + classes * dim + classes,
              head.bias.begin());
    return head;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, double step) {
    GradCheckReport report;
    Rng rng(seed);

    // Quadratic sanity: central differences are exact up to roundoff here.
    {
        std::vector<double> x(10);
        for (double& v : x) v = rng.normal();
        std::vector<double> grad(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * (i + 1.0) * x[i] + 0.5;
        auto f = [](std::span<const double> v) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i + 1.0) * v[i] * v[i] + 0.5 * v[i];
            return s;
        };
        report.quadratic = gradcheck(f, x, grad, step);
    }

    const std::size_t dim = 16;
    const std::size_t k = 4;
    const std::size_t classes = 3;

    // Local path: 3 + 3 nodes, graph held fixed while features and the head
    // are perturbed jointly.
    {
        std::vector<InstanceFeature> v1(3), v2(3);
        std::vector<int> labels(6);
        for (std::size_t i = 0; i < 3; ++i) {
            const int label = static_cast<int>(rng.uniform_index(classes));
            v1[i] = InstanceFeature{std::vector<double>(dim), label, 1};
            v2[i] = InstanceFeature{std::vector<double>(dim), label, 2};
            for (double& v : v1[i].vector) v = rng.normal();
            for (double& v : v2[i].vector) v = rng.normal();
            labels[i] = label;
            labels[3 + i] = label;
        }
        std::vector<InstanceFeature> all = v1;
        all.insert(all.end(), v2.begin(), v2.end());

        AttributeWeights attr(k);
        attr.ema_update(estimate_attribute_weights(all, k));
        const RelationGraph graph = build_local_graph(v1, v2, attr);
        const Matrix features = stack_features(v1, v2);
        const LinearClassifier head = LinearClassifier::random_init(classes, dim, rng);

        const LsrBackprop bp = lsr_forward_backward(features, graph, labels, head);
        std::vector<double> x;
        append(x, features.data());
        append(x, head.weights.data());
        append(x, head.bias);
        std::vector<double> grad;
        append(grad, bp.d_features.data());
        append(grad, bp.d_weights.data());
        append(grad, bp.d_bias);

        const std::size_t rows = features.rows();
        auto f = [&](std::span<const double> v) {
            Matrix feats(rows, dim);
            std::copy(v.begin(), v.begin() + rows * dim, feats.data().begin());
            const LinearClassifier h = unpack_head(v, rows * dim, classes, dim);
            const Matrix fused = fuse_local(graph, feats);
            return lsr_loss(h.logits(fused), h.logits(feats), labels).total;
        };
        report.lsr = gradcheck(f, x, grad, step);
    }

    // Global path: pool of depth 3; only the current set and the head are
    // perturbed, with the adjacency held fixed.
    {
        MemoryPool pool(3);
        for (std::uint64_t iter = 1; iter <= 3; ++iter) {
            PrototypeSet set;
            set.creation_iteration = iter;
            for (std::size_t c = 0; c < classes; ++c) {
                std::vector<double> proto(dim);
                for (double& v : proto) v = rng.normal();
                set.prototypes.emplace(static_cast<int>(c), std::move(proto));
            }
            pool.push(std::move(set));
        }
        const GlobalGraph graph = build_global_graph(pool);
        const Matrix protos = stack_prototypes(pool);
        const LinearClassifier head = LinearClassifier::random_init(classes, dim, rng);
        std::vector<int> labels(graph.nodes.size());
        for (std::size_t i = 0; i < graph.nodes.size(); ++i) labels[i] = graph.nodes[i].label;

        const GsrBackprop bp = gsr_forward_backward(pool, head);
        std::vector<double> x;
        std::vector<double> grad;
        for (const auto& [label, proto] : pool.entries().front().set.prototypes) {
            append(x, proto);
            append(grad, bp.d_current_prototypes.at(label));
        }
        append(x, head.weights.data());
        append(x, head.bias);
        append(grad, bp.d_weights.data());
        append(grad, bp.d_bias);

        auto f = [&](std::span<const double> v) {
            Matrix p = protos;
            std::copy(v.begin(), v.begin() + classes * dim, p.data().begin());
            const LinearClassifier h = unpack_head(v, classes * dim, classes, dim);
            const Matrix fused = fuse_global(graph, p);
            return gsr_loss(h.logits(p), h.logits(fused), labels).total;
        };
        report.gsr = gradcheck(f, x, grad, step);
    }

    return report;
}

double gradcheck(const std::function<double(std::span<const double>)>& f,
                 std::span<const double> x, std::span<const double> analytic_grad, double step,
                 double floor) {
    if (x.size() != analytic_grad.size()) throw ShapeMismatch("gradcheck: size mismatch");
    if (!(step > 0.0)) throw ConfigInvalid("gradcheck: step must be positive");

    std::vector<double> work(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
        const double orig = work[i];
        work[i] = orig + step;
        const double fp = f(work);
        work[i] = orig - step;
        const double fm = f(work);
        work[i] = orig;

        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({floor, std::abs(analytic_grad[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic_grad[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace srcd
