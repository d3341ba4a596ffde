#include "srcd/losses.hpp"

#include <algorithm>
#include <cmath>

#include "srcd/errors.hpp"

namespace srcd {

std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto probs = softmax(logits.row(r));
        std::copy(probs.begin(), probs.end(), out.row(r).begin());
    }
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeMismatch("kl_divergence: length mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

double cross_entropy(std::span<const double> logits, int label) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - peak);
    return std::log(denom) - (logits[label] - peak);
}

LinearClassifier LinearClassifier::random_init(std::size_t classes, std::size_t dim, Rng& rng) {
    LinearClassifier cls(classes, dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : cls.weights.data()) w = scale * rng.normal();
    return cls;
}

Matrix LinearClassifier::logits(const Matrix& features) const {
    if (features.cols() != dim()) {
        throw ShapeMismatch("LinearClassifier: feature dimension mismatch");
    }
    Matrix out(features.rows(), classes());
    for (std::size_t n = 0; n < features.rows(); ++n) {
        for (std::size_t c = 0; c < classes(); ++c) {
            out(n, c) = bias[c] + dot(weights.row(c), features.row(n));
        }
    }
    return out;
}

void LinearClassifier::accumulate_backward(const Matrix& d_logits, const Matrix& features,
                                           Matrix& d_weights, std::vector<double>& d_bias,
                                           Matrix* d_features) const {
    if (d_logits.rows() != features.rows() || d_logits.cols() != classes() ||
        features.cols() != dim()) {
        throw ShapeMismatch("LinearClassifier: backward shape mismatch");
    }
    for (std::size_t n = 0; n < features.rows(); ++n) {
        for (std::size_t c = 0; c < classes(); ++c) {
            const double g = d_logits(n, c);
            if (g == 0.0) continue;
            d_bias[c] += g;
            for (std::size_t d = 0; d < dim(); ++d) {
                d_weights(c, d) += g * features(n, d);
                if (d_features) (*d_features)(n, d) += g * weights(c, d);
            }
        }
    }
}

}  // namespace srcd
