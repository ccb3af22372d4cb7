#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pigrid/errors.hpp"
#include "pigrid/tensor.hpp"

#include <limits>

using namespace pigrid;

TEST_CASE("construction sizes and fills") {
    Tensor t({2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(1) == 3);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 1.5);
}

TEST_CASE("row-major indexing is consistent between at and row accessors") {
    Tensor t({2, 3, 4});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    CHECK(t.at3(1, 2, 3) == 23.0);
    CHECK(t.row3(1, 2)[3] == 23.0);

    Tensor m({3, 5});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<double>(i);
    CHECK(m.at2(2, 4) == 14.0);
    CHECK(m.row2(2)[4] == 14.0);
}

TEST_CASE("zeros_like copies shape, not values") {
    Tensor t({4, 4}, 9.0);
    Tensor z = Tensor::zeros_like(t);
    CHECK(z.same_shape(t));
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("check_finite flags NaN and infinity") {
    Tensor t({3});
    CHECK_NOTHROW(t.check_finite("t"));
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.check_finite("t"), NumericError);
    t[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(t.check_finite("t"), NumericError);
}

TEST_CASE("shape_str formats dimensions") {
    CHECK(Tensor({2, 3}).shape_str() == "(2,3)");
    CHECK(Tensor({7}).shape_str() == "(7)");
}
