#include "pigrid/kernels.hpp"

#include "pigrid/errors.hpp"

#include <cstdlib>

namespace pigrid::kernels {

namespace scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

} // namespace scalar

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Backend detect_best_backend() {
    if (backend_available(Backend::Avx2)) return Backend::Avx2;
    if (backend_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "scalar";
}

Backend backend_from_name(const std::string& name) {
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    if (name == "neon") return Backend::Neon;
    throw UsageError("unknown kernel backend '" + name + "' (expected scalar, avx2, or neon)");
}

namespace {

using AxpyFn = void (*)(double, const double*, double*, std::size_t);
using DotFn = double (*)(const double*, const double*, std::size_t);

struct Dispatch {
    Backend backend;
    AxpyFn axpy;
    DotFn dot;
};

Dispatch make_dispatch(Backend b) {
    switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::Avx2: return {Backend::Avx2, &avx2::axpy, &avx2::dot};
#endif
#if defined(__aarch64__)
        case Backend::Neon: return {Backend::Neon, &neon::axpy, &neon::dot};
#endif
        default: return {Backend::Scalar, &scalar::axpy, &scalar::dot};
    }
}

Dispatch initial_dispatch() {
    if (const char* env = std::getenv("PIGRID_KERNELS")) {
        Backend b = backend_from_name(env);
        if (!backend_available(b))
            throw UsageError("kernel backend '" + std::string(env) + "' not available on this CPU");
        return make_dispatch(b);
    }
    return make_dispatch(detect_best_backend());
}

Dispatch& dispatch() {
    static Dispatch d = initial_dispatch();
    return d;
}

} // namespace

Backend active_backend() { return dispatch().backend; }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw UsageError("kernel backend '" + backend_name(b) + "' not available on this CPU");
    dispatch() = make_dispatch(b);
}

void axpy(double a, const double* x, double* y, std::size_t n) { dispatch().axpy(a, x, y, n); }

double dot(const double* x, const double* y, std::size_t n) { return dispatch().dot(x, y, n); }

} // namespace pigrid::kernels
