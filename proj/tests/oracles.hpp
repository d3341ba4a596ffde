// Test-only reference implementations, kept independent of the library code
// paths they are used to verify.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "srcd/matrix.hpp"
#include "srcd/rng.hpp"

namespace oracle {

// Quadratic-time direct DFT; the reference for the library's transforms.
inline std::vector<std::complex<double>> naive_dft2(const std::vector<double>& plane,
                                                    std::size_t h, std::size_t w) {
    const double two_pi = 6.28318530717958647692;
    std::vector<std::complex<double>> out(h * w);
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double angle = -two_pi * (static_cast<double>(u) * y / h +
                                                    static_cast<double>(v) * x / w);
                    acc += plane[y * w + x] * std::complex<double>(std::cos(angle), std::sin(angle));
                }
            }
            out[u * w + v] = acc;
        }
    }
    return out;
}

// Inverse of naive_dft2 with the 1/(h*w) factor; returns the full complex
// plane so tests can inspect the imaginary residue.
inline std::vector<std::complex<double>> naive_idft2(const std::vector<std::complex<double>>& freq,
                                                     std::size_t h, std::size_t w) {
    const double two_pi = 6.28318530717958647692;
    std::vector<std::complex<double>> out(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t u = 0; u < h; ++u) {
                for (std::size_t v = 0; v < w; ++v) {
                    const double angle = two_pi * (static_cast<double>(u) * y / h +
                                                   static_cast<double>(v) * x / w);
                    acc += freq[u * w + v] * std::complex<double>(std::cos(angle), std::sin(angle));
                }
            }
            out[y * w + x] = acc / static_cast<double>(h * w);
        }
    }
    return out;
}

// Dense product by the plain triple loop.
inline srcd::Matrix naive_matmul(const srcd::Matrix& a, const srcd::Matrix& b) {
    srcd::Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    }
    return out;
}

inline srcd::Matrix random_matrix(std::size_t rows, std::size_t cols, srcd::Rng& rng) {
    srcd::Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

inline std::vector<double> random_plane(std::size_t n, srcd::Rng& rng, double lo = 0.0,
                                        double hi = 255.0) {
    std::vector<double> plane(n);
    for (double& v : plane) v = rng.uniform(lo, hi);
    return plane;
}

}  // namespace oracle
