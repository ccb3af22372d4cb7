#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pigrid/kernels.hpp"
#include "pigrid/rng.hpp"

#include <cmath>
#include <vector>

using namespace pigrid;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

} // namespace

TEST_CASE("scalar dot matches a simple accumulation") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> y{4.0, -5.0, 6.0};
    CHECK(kernels::scalar::dot(x.data(), y.data(), 3) == 12.0);
}

TEST_CASE("scalar axpy accumulates into y") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    std::vector<double> y{10.0, 20.0, 30.0};
    kernels::scalar::axpy(0.5, x.data(), y.data(), 3);
    CHECK(y[0] == 10.5);
    CHECK(y[1] == 21.0);
    CHECK(y[2] == 31.5);
}

TEST_CASE("zero-length inputs are no-ops") {
    double dummy = 7.0;
    CHECK(kernels::scalar::dot(&dummy, &dummy, 0) == 0.0);
    kernels::scalar::axpy(3.0, &dummy, &dummy, 0);
    CHECK(dummy == 7.0);
}

TEST_CASE("SIMD backends agree with the scalar reference") {
    Rng rng(123);
    // lengths straddling vector widths, unroll factors, and remainders
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 257u, 1000u}) {
        const std::vector<double> x = random_vec(rng, n);
        const std::vector<double> yref_init = random_vec(rng, n);
        const double a = rng.uniform(-1.0, 1.0);

        const double dref = kernels::scalar::dot(x.data(), yref_init.data(), n);
        std::vector<double> yref = yref_init;
        kernels::scalar::axpy(a, x.data(), yref.data(), n);

        for (kernels::Backend b : {kernels::Backend::Avx2, kernels::Backend::Neon}) {
            if (!kernels::backend_available(b)) continue;
            CAPTURE(kernels::backend_name(b));
            CAPTURE(n);
            kernels::set_backend(b);
            const double d = kernels::dot(x.data(), yref_init.data(), n);
            CHECK(std::abs(d - dref) <= 1e-12 * std::max(1.0, std::abs(dref)));
            std::vector<double> y = yref_init;
            kernels::axpy(a, x.data(), y.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::abs(y[i] - yref[i]) <= 1e-12 * std::max(1.0, std::abs(yref[i])));
        }
    }
    kernels::set_backend(kernels::detect_best_backend());
}

TEST_CASE("backend selection and naming round-trip") {
    CHECK(kernels::backend_available(kernels::Backend::Scalar));
    CHECK(kernels::backend_from_name("scalar") == kernels::Backend::Scalar);
    CHECK(kernels::backend_from_name(kernels::backend_name(kernels::active_backend())) ==
          kernels::active_backend());
    CHECK_THROWS(kernels::backend_from_name("sse9"));

    kernels::set_backend(kernels::Backend::Scalar);
    CHECK(kernels::active_backend() == kernels::Backend::Scalar);
    kernels::set_backend(kernels::detect_best_backend());
}

TEST_CASE("detected best backend is available") {
    CHECK(kernels::backend_available(kernels::detect_best_backend()));
}
