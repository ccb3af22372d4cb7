#pragma once

#include <cstddef>
#include <string>

namespace pigrid::kernels {

// The arithmetic inner loops of the network (convolution and dense layers)
// reduce to two primitives over contiguous float64 rows: axpy and dot.
// Scalar reference implementations are always available; SIMD variants are
// selected at runtime and must agree with the scalar path to tight tolerance
// (see the equivalence tests). The active backend is process-global and fixed
// once chosen, so a given run is deterministic.
enum class Backend { Scalar, Avx2, Neon };

Backend detect_best_backend();
bool backend_available(Backend b);
Backend active_backend();
void set_backend(Backend b);
std::string backend_name(Backend b);
Backend backend_from_name(const std::string& name);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
} // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
} // namespace neon
#endif

} // namespace pigrid::kernels
