// Low-level f64 array kernels with a scalar reference implementation and an
// AVX2+FMA variant selected at runtime. All higher-level numerics route
// through these entry points. Matrices are dense row-major.
#pragma once

#include <cstddef>

namespace prefdyn::kernels {

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);

// Active backend. Defaults to the best available one; the PREFDYN_SIMD
// environment variable ("scalar" or "avx2") overrides the default.
Backend active_backend();

// Returns false and leaves the active backend unchanged if b is unavailable.
bool set_backend(Backend b);

// sum_i x[i]*y[i]
double dot(const double* x, const double* y, std::size_t n);

// sum_i (x[i]-y[i])^2
double sqdist(const double* x, const double* y, std::size_t n);

// y += a*x
void axpy(double a, const double* x, double* y, std::size_t n);

// x *= a
void scal(double a, double* x, std::size_t n);

// y = W x, W is rows x cols row-major
void matvec(const double* w, const double* x, double* y,
            std::size_t rows, std::size_t cols);

// y = W^T u, W is rows x cols row-major, u has rows entries
void matvec_t(const double* w, const double* u, double* y,
              std::size_t rows, std::size_t cols);

// W += u v^T
void rank1_acc(double* w, const double* u, const double* v,
               std::size_t rows, std::size_t cols);

namespace detail {

struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sqdist)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    void (*matvec)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*matvec_t)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*rank1_acc)(double*, const double*, const double*, std::size_t, std::size_t);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the AVX2 translation unit is absent
bool cpu_has_avx2();

}  // namespace detail

}  // namespace prefdyn::kernels
