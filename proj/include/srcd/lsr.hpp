#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "srcd/losses.hpp"
#include "srcd/matrix.hpp"

namespace srcd {

/// Flattened instance feature with its class id and origin domain
/// (1 = weak augmentation, 2 = strong augmentation).
struct InstanceFeature {
    std::vector<double> vector;
    int label = 0;
    int domain_tag = 1;
};

/// Attribute-weight observation: per class, one weight per attribute segment.
using AttributeObservation = std::map<int, std::vector<double>>;

/// Per-class attribute weights epsilon^Q maintained with an exponential
/// moving average. Classes never observed read as all-ones (uniform
/// attributes). The update assigns weight gamma to the NEW observation:
///   eps_t = (1 - gamma) * eps_{t-1} + gamma * eps_obs
class AttributeWeights {
public:
    explicit AttributeWeights(std::size_t k, double gamma = 0.99);

    std::size_t k() const { return k_; }
    double gamma() const { return gamma_; }
    std::uint64_t iteration() const { return iteration_; }

    /// Stored weights for a class, or all-ones when the class is unseen.
    std::vector<double> weights_for(int label) const;

    const AttributeObservation& store() const { return weights_; }

    /// Blends the observation into the store and increments the iteration.
    /// Classes absent from the observation are left unchanged.
    void ema_update(const AttributeObservation& observation);

private:
    std::size_t k_;
    double gamma_;
    std::uint64_t iteration_ = 0;
    AttributeObservation weights_;
};

/// Cross-domain relation graph over one batch. Node order is V1 then V2;
/// only the off-diagonal blocks carry similarities.
struct RelationGraph {
    Matrix adjacency;     // (m + n) x (m + n)
    std::size_t m = 0;    // |V1|
    std::size_t n = 0;    // |V2|
};

/// Contiguous equal-length views over the k attribute segments of v.
/// Throws IndivisibleDimension unless k divides v.size().
std::vector<std::span<const double>> split_attributes(std::span<const double> v, std::size_t k);

/// Attribute-weighted similarity
///   S(v_i in Q, v_j) = sum_g eps_g^Q cos(seg_g^i, seg_g^j) / sum_g eps_g^Q.
/// Asymmetric: the weights come from v_i's class. A zero segment contributes
/// cosine 0. Throws DegenerateWeights when the weights sum to zero.
double weighted_similarity(const InstanceFeature& v_i, const InstanceFeature& v_j,
                           const AttributeWeights& weights);

/// Per-class attribute observation: for each class with >= 2 members, the
/// mean per-segment cosine over ordered pairs i != j. Classes with fewer
/// members produce no observation.
AttributeObservation estimate_attribute_weights(const std::vector<InstanceFeature>& batch,
                                                std::size_t k);

/// Fills the off-diagonal blocks S(V1, V2) and S(V2, V1); the diagonal
/// blocks stay exactly zero. Throws EmptyDomain when either side is empty.
/// The adjacency is used raw by default; row_normalize divides each row by
/// its L1 norm (cosines may be negative), bounding the fusion mix-in.
RelationGraph build_local_graph(const std::vector<InstanceFeature>& v1,
                                const std::vector<InstanceFeature>& v2,
                                const AttributeWeights& weights, bool row_normalize = false);

/// Information fusion V_graph = (A + I) V.
Matrix fuse_local(const RelationGraph& graph, const Matrix& features);

/// Loss bundle over fused and raw logits from the shared head:
///   kl  = mean_i KL(softmax(O_graph_i) || softmax(O_i))
///   cl  = mean_i CE(softmax(O_graph_i), y_i)
///   total = kl + cl
/// d_logits_graph and d_logits are the analytic gradients of total.
struct LsrLoss {
    double kl = 0.0;
    double cl = 0.0;
    double total = 0.0;
    Matrix d_logits_graph;
    Matrix d_logits;
};

LsrLoss lsr_loss(const Matrix& logits_graph, const Matrix& logits, const std::vector<int>& labels);

/// End-to-end local path: fuse features through the graph, classify both the
/// raw and fused features with the shared head, evaluate lsr_loss, and
/// backpropagate to the features and the head. The adjacency is treated as a
/// constant of the iteration (its similarities are not differentiated
/// through).
struct LsrBackprop {
    LsrLoss loss;
    Matrix d_features;         // dTotal/dV, same shape as the stacked features
    Matrix d_weights;          // dTotal/dW of the shared head
    std::vector<double> d_bias;
};

LsrBackprop lsr_forward_backward(const Matrix& features, const RelationGraph& graph,
                                 const std::vector<int>& labels, const LinearClassifier& head);

/// Stacks instance vectors into a (m + n) x D matrix, V1 rows first.
Matrix stack_features(const std::vector<InstanceFeature>& v1,
                      const std::vector<InstanceFeature>& v2);

}  // namespace srcd
