// Runtime backend selection for the array kernels.
#include "prefdyn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace prefdyn::kernels {

namespace detail {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

}  // namespace detail

namespace {

using detail::Ops;

const Ops* ops_for(Backend b) {
    if (b == Backend::avx2) return detail::avx2_ops();
    return &detail::scalar_ops();
}

Backend pick_default() {
    if (const char* env = std::getenv("PREFDYN_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::avx2))
            return Backend::avx2;
    }
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

struct State {
    std::atomic<Backend> backend;
    State() : backend(pick_default()) {}
};

State& state() {
    static State s;
    return s;
}

const Ops& ops() { return *ops_for(state().backend.load(std::memory_order_relaxed)); }

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
    return detail::avx2_ops() != nullptr && detail::cpu_has_avx2();
}

Backend active_backend() { return state().backend.load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
    if (!backend_available(b)) return false;
    state().backend.store(b, std::memory_order_relaxed);
    return true;
}

double dot(const double* x, const double* y, std::size_t n) {
    return ops().dot(x, y, n);
}

double sqdist(const double* x, const double* y, std::size_t n) {
    return ops().sqdist(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    ops().axpy(a, x, y, n);
}

void scal(double a, double* x, std::size_t n) { ops().scal(a, x, n); }

void matvec(const double* w, const double* x, double* y,
            std::size_t rows, std::size_t cols) {
    ops().matvec(w, x, y, rows, cols);
}

void matvec_t(const double* w, const double* u, double* y,
              std::size_t rows, std::size_t cols) {
    ops().matvec_t(w, u, y, rows, cols);
}

void rank1_acc(double* w, const double* u, const double* v,
               std::size_t rows, std::size_t cols) {
    ops().rank1_acc(w, u, v, rows, cols);
}

}  // namespace prefdyn::kernels
