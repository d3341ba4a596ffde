#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "srcd/losses.hpp"
#include "srcd/lsr.hpp"
#include "srcd/matrix.hpp"

namespace srcd {

/// Per-class mean features of one iteration. Coverage may be partial; only
/// classes present in the batch get a prototype.
struct PrototypeSet {
    std::map<int, std::vector<double>> prototypes;
    std::uint64_t creation_iteration = 0;
};

PrototypeSet compute_prototypes(const std::vector<InstanceFeature>& batch,
                                std::uint64_t iteration);

/// FIFO cache of the current prototype set plus up to Z historical sets.
/// The current set has age 0; each push ages every stored set by one
/// iteration and evicts the oldest beyond capacity.
class MemoryPool {
public:
    explicit MemoryPool(std::size_t capacity = 10);

    struct Entry {
        PrototypeSet set;
        std::uint64_t age = 0;
    };

    std::size_t capacity() const { return capacity_; }

    /// Temperature for time decay; fixed to the pool capacity Z.
    double tau() const { return static_cast<double>(capacity_); }

    /// Throws StaleSet unless set.creation_iteration exceeds every stored one.
    void push(PrototypeSet set);

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    /// entries()[0] is the current set (age 0); ages strictly increase.
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::size_t capacity_;
    std::vector<Entry> entries_;
};

/// exp(-|t_i - t_j| / tau) * cos(p_i, p_j). Zero-vector prototypes have
/// cosine 0 by convention.
double time_decayed_similarity(std::span<const double> p_i, std::span<const double> p_j,
                               double t_i, double t_j, double tau);

/// Dense symmetric relation graph over the flattened prototype superset.
/// Node order: pool entries newest-first (matching MemoryPool::entries),
/// classes in ascending id within each set.
struct GlobalGraph {
    struct Node {
        std::size_t entry_index = 0;  // index into MemoryPool::entries()
        int label = 0;
        std::uint64_t age = 0;
    };

    Matrix adjacency;
    std::vector<Node> nodes;
};

GlobalGraph build_global_graph(const MemoryPool& pool);

/// Prototype superset as a matrix, rows aligned with GlobalGraph node order.
Matrix stack_prototypes(const MemoryPool& pool);

/// Structured prototypes P_graph = A P. No identity term is added; the unit
/// diagonal of the graph already carries the self contribution.
Matrix fuse_global(const GlobalGraph& graph, const Matrix& prototypes);

/// Loss bundle over raw and fused prototype logits. Unlike the local path,
/// the classification term covers BOTH branches:
///   cl = mean CE(softmax(O), y) + mean CE(softmax(O_graph), y)
///   kl = mean KL(softmax(O_graph) || softmax(O))
///   total = cl + kl
struct GsrLoss {
    double cl = 0.0;
    double kl = 0.0;
    double total = 0.0;
    Matrix d_logits;        // dTotal/dO
    Matrix d_logits_graph;  // dTotal/dO_graph
};

GsrLoss gsr_loss(const Matrix& logits, const Matrix& logits_graph, const std::vector<int>& labels);

/// End-to-end global path over the pool snapshot. Gradients flow to the
/// current (age 0) set's prototypes only; historical prototypes are stored
/// constants from past network states. The adjacency is likewise treated as
/// a constant of the iteration.
struct GsrBackprop {
    GsrLoss loss;
    std::map<int, std::vector<double>> d_current_prototypes;
    Matrix d_weights;
    std::vector<double> d_bias;
};

GsrBackprop gsr_forward_backward(const MemoryPool& pool, const LinearClassifier& head);

}  // namespace srcd
