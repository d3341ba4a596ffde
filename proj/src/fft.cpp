#include "srcd/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

#include "srcd/errors.hpp"

namespace srcd {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Complex-to-complex transform buffer with plans for both directions of one
// shape. FFTW_ESTIMATE keeps planning deterministic (no runtime measurement).
class TransformScratch {
public:
    TransformScratch(std::size_t height, std::size_t width, int sign)
        : size_(height * width) {
        in_ = fftw_alloc_complex(size_);
        out_ = fftw_alloc_complex(size_);
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), in_, out_,
                                 sign, FFTW_ESTIMATE);
    }

    TransformScratch(const TransformScratch&) = delete;
    TransformScratch& operator=(const TransformScratch&) = delete;

    ~TransformScratch() {
        {
            std::lock_guard<std::mutex> lock(plan_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }

    fftw_complex* in() { return in_; }
    const fftw_complex* out() const { return out_; }
    void execute() { fftw_execute(plan_); }

private:
    std::size_t size_;
    fftw_complex* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

}  // namespace

Spectrum fft2(const std::vector<double>& plane, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0 || plane.size() != height * width) {
        throw ShapeMismatch("fft2: plane size does not match dimensions");
    }
    TransformScratch scratch(height, width, FFTW_FORWARD);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        scratch.in()[i][0] = plane[i];
        scratch.in()[i][1] = 0.0;
    }
    scratch.execute();

    Spectrum spec;
    spec.height = height;
    spec.width = width;
    spec.amplitude.resize(plane.size());
    spec.phase.resize(plane.size());
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < plane.size(); ++i) {
        const double re = scratch.out()[i][0];
        const double im = scratch.out()[i][1];
        spec.amplitude[i] = std::hypot(re, im);
        // atan2 can land on -pi (negative-zero imaginary part); keep the
        // phase in (-pi, pi].
        const double phase = std::atan2(im, re);
        spec.phase[i] = phase == -pi ? pi : phase;
    }
    return spec;
}

Spectrum fft2(const GrayImage& plane) { return fft2(plane.data(), plane.height(), plane.width()); }

std::vector<double> ifft2(const Spectrum& spec) {
    const std::size_t n = spec.height * spec.width;
    if (n == 0 || spec.amplitude.size() != n || spec.phase.size() != n) {
        throw ShapeMismatch("ifft2: spectrum planes do not match dimensions");
    }
    TransformScratch scratch(spec.height, spec.width, FFTW_BACKWARD);
    for (std::size_t i = 0; i < n; ++i) {
        scratch.in()[i][0] = spec.amplitude[i] * std::cos(spec.phase[i]);
        scratch.in()[i][1] = spec.amplitude[i] * std::sin(spec.phase[i]);
    }
    scratch.execute();

    std::vector<double> plane(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        plane[i] = scratch.out()[i][0] * scale;
    }
    return plane;
}

}  // namespace srcd
