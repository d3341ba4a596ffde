#include "srcd/lsr.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

AttributeWeights::AttributeWeights(std::size_t k, double gamma) : k_(k), gamma_(gamma) {
    if (k == 0) throw ConfigInvalid("AttributeWeights: k must be >= 1");
}

std::vector<double> AttributeWeights::weights_for(int label) const {
    const auto it = weights_.find(label);
    if (it == weights_.end()) return std::vector<double>(k_, 1.0);
    return it->second;
}

void AttributeWeights::ema_update(const AttributeObservation& observation) {
    for (const auto& [label, obs] : observation) {
        if (obs.size() != k_) throw ShapeMismatch("ema_update: observation has wrong k");
        auto [it, inserted] = weights_.try_emplace(label, std::vector<double>(k_, 1.0));
        auto& stored = it->second;
        for (std::size_t g = 0; g < k_; ++g) {
            stored[g] = (1.0 - gamma_) * stored[g] + gamma_ * obs[g];
        }
    }
    ++iteration_;
}

std::vector<std::span<const double>> split_attributes(std::span<const double> v, std::size_t k) {
    if (k == 0 || v.size() % k != 0) {
        throw IndivisibleDimension("split_attributes: k must divide the feature length");
    }
    const std::size_t seg = v.size() / k;
    std::vector<std::span<const double>> out;
    out.reserve(k);
    for (std::size_t g = 0; g < k; ++g) {
        out.push_back(v.subspan(g * seg, seg));
    }
    return out;
}

double weighted_similarity(const InstanceFeature& v_i, const InstanceFeature& v_j,
                           const AttributeWeights& weights) {
    if (v_i.vector.size() != v_j.vector.size()) {
        throw ShapeMismatch("weighted_similarity: feature dimension mismatch");
    }
    const auto segs_i = split_attributes(v_i.vector, weights.k());
    const auto segs_j = split_attributes(v_j.vector, weights.k());
    const auto eps = weights.weights_for(v_i.label);

    double num = 0.0;
    double den = 0.0;
    for (std::size_t g = 0; g < weights.k(); ++g) {
        num += eps[g] * cosine(segs_i[g], segs_j[g]);
        den += eps[g];
    }
    if (den == 0.0) {
        throw DegenerateWeights("weighted_similarity: attribute weights sum to zero");
    }
    return num / den;
}

AttributeObservation estimate_attribute_weights(const std::vector<InstanceFeature>& batch,
                                                std::size_t k) {
    std::map<int, std::vector<const InstanceFeature*>> by_class;
    for (const auto& f : batch) by_class[f.label].push_back(&f);

    AttributeObservation obs;
    for (const auto& [label, members] : by_class) {
        if (members.size() < 2) continue;
        std::vector<double> eps(k, 0.0);
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto segs_i = split_attributes(members[i]->vector, k);
            for (std::size_t j = 0; j < members.size(); ++j) {
                if (i == j) continue;
                const auto segs_j = split_attributes(members[j]->vector, k);
                for (std::size_t g = 0; g < k; ++g) {
                    eps[g] += cosine(segs_i[g], segs_j[g]);
                }
                ++pairs;
            }
        }
        for (double& e : eps) e /= static_cast<double>(pairs);
        obs.emplace(label, std::move(eps));
    }
    return obs;
}

RelationGraph build_local_graph(const std::vector<InstanceFeature>& v1,
                                const std::vector<InstanceFeature>& v2,
                                const AttributeWeights& weights, bool row_normalize) {
    if (v1.empty() || v2.empty()) {
        throw EmptyDomain("build_local_graph: both domains must be nonempty");
    }
    const std::size_t m = v1.size();
    const std::size_t n = v2.size();
    RelationGraph graph{Matrix(m + n, m + n), m, n};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            graph.adjacency(i, m + j) = weighted_similarity(v1[i], v2[j], weights);
            graph.adjacency(m + j, i) = weighted_similarity(v2[j], v1[i], weights);
        }
    }
    if (row_normalize) {
        for (std::size_t r = 0; r < m + n; ++r) {
            double l1 = 0.0;
            for (double v : graph.adjacency.row(r)) l1 += std::abs(v);
            if (l1 > 0.0) {
                for (double& v : graph.adjacency.row(r)) v /= l1;
            }
        }
    }
    return graph;
}

Matrix fuse_local(const RelationGraph& graph, const Matrix& features) {
    if (features.rows() != graph.m + graph.n) {
        throw ShapeMismatch("fuse_local: feature rows must equal m + n");
    }
    return matmul(add_identity(graph.adjacency), features);
}

Matrix stack_features(const std::vector<InstanceFeature>& v1,
                      const std::vector<InstanceFeature>& v2) {
    const std::size_t dim = v1.empty() ? (v2.empty() ? 0 : v2.front().vector.size())
                                       : v1.front().vector.size();
    Matrix out(v1.size() + v2.size(), dim);
    std::size_t row = 0;
    for (const auto* group : {&v1, &v2}) {
        for (const auto& f : *group) {
            if (f.vector.size() != dim) throw ShapeMismatch("stack_features: ragged batch");
            std::copy(f.vector.begin(), f.vector.end(), out.row(row).begin());
            ++row;
        }
    }
    return out;
}

LsrLoss lsr_loss(const Matrix& logits_graph, const Matrix& logits,
                 const std::vector<int>& labels) {
    if (logits_graph.rows() != logits.rows() || logits_graph.cols() != logits.cols() ||
        labels.size() != logits.rows()) {
        throw ShapeMismatch("lsr_loss: logits/labels shape mismatch");
    }
    const std::size_t count = logits.rows();
    const std::size_t classes = logits.cols();
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ShapeMismatch("lsr_loss: label out of range");
        }
    }
    const double inv = 1.0 / static_cast<double>(count);

    LsrLoss out;
    out.d_logits_graph = Matrix(count, classes);
    out.d_logits = Matrix(count, classes);

    for (std::size_t i = 0; i < count; ++i) {
        const auto p = softmax(logits_graph.row(i));  // fused branch
        const auto q = softmax(logits.row(i));        // raw branch

        double kl_i = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            kl_i += p[c] * (std::log(p[c]) - std::log(q[c]));
        }
        out.kl += kl_i;
        out.cl += -std::log(p[labels[i]]);

        for (std::size_t c = 0; c < classes; ++c) {
            const double log_ratio = std::log(p[c]) - std::log(q[c]);
            double g = p[c] * (log_ratio - kl_i);            // KL through the fused branch
            g += p[c] - (static_cast<int>(c) == labels[i]);  // CE on the fused branch
            out.d_logits_graph(i, c) = inv * g;
            out.d_logits(i, c) = inv * (q[c] - p[c]);        // KL through the raw branch
        }
    }
    out.kl *= inv;
    out.cl *= inv;
    out.total = out.kl + out.cl;
    return out;
}

LsrBackprop lsr_forward_backward(const Matrix& features, const RelationGraph& graph,
                                 const std::vector<int>& labels, const LinearClassifier& head) {
    const Matrix fused = fuse_local(graph, features);
    const Matrix logits = head.logits(features);
    const Matrix logits_graph = head.logits(fused);

    LsrBackprop out;
    out.loss = lsr_loss(logits_graph, logits, labels);
    out.d_features = Matrix(features.rows(), features.cols());
    out.d_weights = Matrix(head.weights.rows(), head.weights.cols());
    out.d_bias.assign(head.bias.size(), 0.0);

    // Raw branch: straight through the head.
    head.accumulate_backward(out.loss.d_logits, features, out.d_weights, out.d_bias,
                             &out.d_features);

    // Fused branch: through the head, then dV += (A + I)^T dV_graph.
    Matrix d_fused(fused.rows(), fused.cols());
    head.accumulate_backward(out.loss.d_logits_graph, fused, out.d_weights, out.d_bias, &d_fused);
    const Matrix fused_back = matmul(add_identity(graph.adjacency).transposed(), d_fused);
    for (std::size_t i = 0; i < out.d_features.data().size(); ++i) {
        out.d_features.data()[i] += fused_back.data()[i];
    }
    return out;
}

}  // namespace srcd
