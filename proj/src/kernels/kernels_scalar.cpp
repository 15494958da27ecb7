// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against.
#include "prefdyn/kernels.hpp"

namespace prefdyn::kernels::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sqdist_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void matvec_scalar(const double* w, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot_scalar(w + r * cols, x, cols);
}

void matvec_t_scalar(const double* w, const double* u, double* y,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        axpy_scalar(u[r], w + r * cols, y, cols);
}

void rank1_acc_scalar(double* w, const double* u, const double* v,
                      std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy_scalar(u[r], v, w + r * cols, cols);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {dot_scalar,    sqdist_scalar,   axpy_scalar,
                            scal_scalar,   matvec_scalar,   matvec_t_scalar,
                            rank1_acc_scalar};
    return ops;
}

}  // namespace prefdyn::kernels::detail
