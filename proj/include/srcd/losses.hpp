#pragma once

#include <span>
#include <vector>

#include "srcd/matrix.hpp"
#include "srcd/rng.hpp"

namespace srcd {

/// Log-sum-exp stabilized softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

/// KL(p || q) = sum p ln(p/q) on probability vectors.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// -log softmax(logits)[label].
double cross_entropy(std::span<const double> logits, int label);

/// Linear head shared by the instance and prototype paths: logits = V W^T + b.
class LinearClassifier {
public:
    LinearClassifier() = default;
    LinearClassifier(std::size_t classes, std::size_t dim)
        : weights(classes, dim), bias(classes, 0.0) {}

    static LinearClassifier random_init(std::size_t classes, std::size_t dim, Rng& rng);

    std::size_t classes() const { return weights.rows(); }
    std::size_t dim() const { return weights.cols(); }

    /// features: N x D -> logits: N x C.
    Matrix logits(const Matrix& features) const;

    /// Chain rule through this head. Adds d_logits^T * features into d_weights,
    /// column sums into d_bias, and d_logits * W into d_features when given.
    void accumulate_backward(const Matrix& d_logits, const Matrix& features, Matrix& d_weights,
                             std::vector<double>& d_bias, Matrix* d_features) const;

    Matrix weights;            // C x D
    std::vector<double> bias;  // C
};

}  // namespace srcd
