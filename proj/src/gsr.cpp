#include "srcd/gsr.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

PrototypeSet compute_prototypes(const std::vector<InstanceFeature>& batch,
                                std::uint64_t iteration) {
    if (batch.empty()) throw EmptyDomain("compute_prototypes: batch is empty");

    PrototypeSet set;
    set.creation_iteration = iteration;
    std::map<int, std::size_t> counts;
    for (const auto& f : batch) {
        auto [it, inserted] = set.prototypes.try_emplace(f.label,
                                                         std::vector<double>(f.vector.size(), 0.0));
        if (it->second.size() != f.vector.size()) {
            throw ShapeMismatch("compute_prototypes: ragged batch");
        }
        for (std::size_t d = 0; d < f.vector.size(); ++d) it->second[d] += f.vector[d];
        ++counts[f.label];
    }
    for (auto& [label, proto] : set.prototypes) {
        const double inv = 1.0 / static_cast<double>(counts[label]);
        for (double& v : proto) v *= inv;
    }
    return set;
}

MemoryPool::MemoryPool(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigInvalid("MemoryPool: capacity must be >= 1");
}

void MemoryPool::push(PrototypeSet set) {
    for (const auto& e : entries_) {
        if (set.creation_iteration <= e.set.creation_iteration) {
            throw StaleSet("MemoryPool: pushed set does not advance the iteration");
        }
    }
    for (auto& e : entries_) ++e.age;
    entries_.insert(entries_.begin(), Entry{std::move(set), 0});
    if (entries_.size() > capacity_ + 1) {
        entries_.pop_back();
    }
}

double time_decayed_similarity(std::span<const double> p_i, std::span<const double> p_j,
                               double t_i, double t_j, double tau) {
    if (!(tau > 0.0)) throw ConfigInvalid("time_decayed_similarity: tau must be positive");
    return std::exp(-std::abs(t_i - t_j) / tau) * cosine(p_i, p_j);
}

GlobalGraph build_global_graph(const MemoryPool& pool) {
    if (pool.empty()) throw EmptyDomain("build_global_graph: pool is empty");

    GlobalGraph graph;
    for (std::size_t e = 0; e < pool.entries().size(); ++e) {
        const auto& entry = pool.entries()[e];
        for (const auto& [label, proto] : entry.set.prototypes) {
            graph.nodes.push_back(GlobalGraph::Node{e, label, entry.age});
        }
    }

    const std::size_t count = graph.nodes.size();
    graph.adjacency = Matrix(count, count);
    const Matrix protos = stack_prototypes(pool);
    for (std::size_t a = 0; a < count; ++a) {
        for (std::size_t b = a; b < count; ++b) {
            const double s = time_decayed_similarity(
                protos.row(a), protos.row(b), static_cast<double>(graph.nodes[a].age),
                static_cast<double>(graph.nodes[b].age), pool.tau());
            graph.adjacency(a, b) = s;
            graph.adjacency(b, a) = s;
        }
    }
    return graph;
}

Matrix stack_prototypes(const MemoryPool& pool) {
    std::size_t count = 0;
    std::size_t dim = 0;
    for (const auto& entry : pool.entries()) {
        count += entry.set.prototypes.size();
        if (dim == 0 && !entry.set.prototypes.empty()) {
            dim = entry.set.prototypes.begin()->second.size();
        }
    }
    Matrix out(count, dim);
    std::size_t row = 0;
    for (const auto& entry : pool.entries()) {
        for (const auto& [label, proto] : entry.set.prototypes) {
            if (proto.size() != dim) throw ShapeMismatch("stack_prototypes: ragged prototypes");
            std::copy(proto.begin(), proto.end(), out.row(row).begin());
            ++row;
        }
    }
    return out;
}

Matrix fuse_global(const GlobalGraph& graph, const Matrix& prototypes) {
    if (prototypes.rows() != graph.nodes.size()) {
        throw ShapeMismatch("fuse_global: prototype rows must match graph nodes");
    }
    return matmul(graph.adjacency, prototypes);
}

GsrLoss gsr_loss(const Matrix& logits, const Matrix& logits_graph,
                 const std::vector<int>& labels) {
    if (logits_graph.rows() != logits.rows() || logits_graph.cols() != logits.cols() ||
        labels.size() != logits.rows()) {
        throw ShapeMismatch("gsr_loss: logits/labels shape mismatch");
    }
    const std::size_t count = logits.rows();
    const std::size_t classes = logits.cols();
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ShapeMismatch("gsr_loss: label out of range");
        }
    }
    const double inv = 1.0 / static_cast<double>(count);

    GsrLoss out;
    out.d_logits = Matrix(count, classes);
    out.d_logits_graph = Matrix(count, classes);

    for (std::size_t i = 0; i < count; ++i) {
        const auto q = softmax(logits.row(i));        // raw branch
        const auto p = softmax(logits_graph.row(i));  // fused branch

        double kl_i = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            kl_i += p[c] * (std::log(p[c]) - std::log(q[c]));
        }
        out.kl += kl_i;
        out.cl += -std::log(q[labels[i]]) - std::log(p[labels[i]]);

        for (std::size_t c = 0; c < classes; ++c) {
            const int hit = static_cast<int>(c) == labels[i];
            out.d_logits(i, c) = inv * ((q[c] - hit) + (q[c] - p[c]));
            const double log_ratio = std::log(p[c]) - std::log(q[c]);
            out.d_logits_graph(i, c) = inv * ((p[c] - hit) + p[c] * (log_ratio - kl_i));
        }
    }
    out.kl *= inv;
    out.cl *= inv;
    out.total = out.cl + out.kl;
    return out;
}

GsrBackprop gsr_forward_backward(const MemoryPool& pool, const LinearClassifier& head) {
    const GlobalGraph graph = build_global_graph(pool);
    const Matrix protos = stack_prototypes(pool);
    const Matrix fused = fuse_global(graph, protos);

    std::vector<int> labels(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) labels[i] = graph.nodes[i].label;

    const Matrix logits = head.logits(protos);
    const Matrix logits_graph = head.logits(fused);

    GsrBackprop out;
    out.loss = gsr_loss(logits, logits_graph, labels);
    out.d_weights = Matrix(head.weights.rows(), head.weights.cols());
    out.d_bias.assign(head.bias.size(), 0.0);

    Matrix d_protos(protos.rows(), protos.cols());
    head.accumulate_backward(out.loss.d_logits, protos, out.d_weights, out.d_bias, &d_protos);

    Matrix d_fused(fused.rows(), fused.cols());
    head.accumulate_backward(out.loss.d_logits_graph, fused, out.d_weights, out.d_bias, &d_fused);

    // dP += A^T dP_graph; the adjacency is symmetric but keep the transpose
    // explicit to match the chain rule as written.
    const Matrix fused_back = matmul(graph.adjacency.transposed(), d_fused);
    for (std::size_t i = 0; i < d_protos.data().size(); ++i) {
        d_protos.data()[i] += fused_back.data()[i];
    }

    // Only the current (age 0) set receives gradient; historical rows are
    // detached constants.
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        if (graph.nodes[i].entry_index != 0) continue;
        const auto row = d_protos.row(i);
        out.d_current_prototypes.emplace(graph.nodes[i].label,
                                         std::vector<double>(row.begin(), row.end()));
    }
    return out;
}

}  // namespace srcd
