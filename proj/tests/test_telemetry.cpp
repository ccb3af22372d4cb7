#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pigrid/errors.hpp"
#include "pigrid/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace pigrid;
using namespace pigrid::telemetry;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

SeriesSet small_series(std::size_t length = 200) {
    GeneratorConfig cfg;
    cfg.length = length;
    cfg.seed = 5;
    return generate_synthetic(cfg);
}

} // namespace

TEST_CASE("generator produces the requested length and default split") {
    GeneratorConfig cfg; // length 10080
    SeriesSet s = generate_synthetic(cfg);
    CHECK(s.size() == 10080);
    CHECK(s.train_end == 7560);
    CHECK(s.val_end == 8568);
    CHECK(s.test_len() == 1512);
}

TEST_CASE("generated frames satisfy the power identities to machine precision") {
    SeriesSet s = small_series(500);
    for (const MeasurementFrame& f : s.frames) {
        CHECK(std::abs(f.active_power_residual()) <= 1e-9);
        CHECK(std::abs(f.reactive_power_residual()) <= 1e-9);
        CHECK(f.v > 0.0);
        CHECK(f.i > 0.0);
    }
}

TEST_CASE("same seed reproduces the series exactly") {
    SeriesSet a = small_series(), b = small_series();
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t c = 0; c < kChannels; ++c) CHECK(a.frames[t].get(c) == b.frames[t].get(c));
}

TEST_CASE("too-short generation is rejected") {
    GeneratorConfig cfg;
    cfg.length = 4;
    CHECK_THROWS_AS(generate_synthetic(cfg), UsageError);
}

TEST_CASE("CSV export/ingest round-trips every double exactly") {
    SeriesSet s = small_series();
    const std::string path = temp_path("pigrid_roundtrip.csv");
    export_csv(s, path);
    std::vector<std::string> warnings;
    SeriesSet r = ingest_csv(path, &warnings);
    CHECK(warnings.empty());
    REQUIRE(r.size() == s.size());
    for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(r.frames[t].t == s.frames[t].t);
        for (std::size_t c = 0; c < kChannels; ++c) CHECK(r.frames[t].get(c) == s.frames[t].get(c));
    }
    std::remove(path.c_str());
}

TEST_CASE("ingest rejects structural problems with row/column context") {
    const std::string path = temp_path("pigrid_bad.csv");

    SUBCASE("bad header") {
        std::ofstream(path) << "time,v,i\n1,2,3\n";
        CHECK_THROWS_AS(ingest_csv(path), DataError);
    }
    SUBCASE("wrong column count") {
        std::ofstream(path) << "t,v,i,theta,delta,p,q\n0,1.0,1.0,0.0\n";
        CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("row 2"), DataError);
    }
    SUBCASE("non-numeric cell") {
        std::ofstream(path) << "t,v,i,theta,delta,p,q\n0,1.0,oops,0.0,0.0,1.0,0.0\n";
        CHECK_THROWS_AS(ingest_csv(path), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ingest_csv(temp_path("pigrid_nonexistent.csv")), DataError);
    }
    std::remove(path.c_str());
}

TEST_CASE("ingest warns on power-identity violations beyond 1e-3") {
    const std::string path = temp_path("pigrid_warn.csv");
    std::ofstream out(path);
    out << "t,v,i,theta,delta,p,q\n";
    // consistent rows to clear the minimum-length bar
    for (int t = 0; t < 16; ++t)
        out << t << ",1.0,2.0,0.3,0.1," << 2.0 * std::cos(0.2) << "," << 2.0 * std::sin(0.2) << "\n";
    out << "16,1.0,2.0,0.3,0.1,1.5," << 2.0 * std::sin(0.2) << "\n"; // p off by ~0.46
    out.close();
    std::vector<std::string> warnings;
    SeriesSet s = ingest_csv(path, &warnings);
    CHECK(s.size() == 17);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("row 18") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("minmax normalization maps the fitted range to [0,1] and inverts") {
    SeriesSet s = small_series();
    fit_minmax(s, 0, s.train_end);
    SeriesSet norm = apply_minmax(s);
    for (std::size_t t = 0; t < s.train_end; ++t)
        for (std::size_t c = 0; c < kChannels; ++c) {
            CHECK(norm.frames[t].get(c) >= -1e-12);
            CHECK(norm.frames[t].get(c) <= 1.0 + 1e-12);
        }
    SeriesSet back = invert_minmax(norm);
    for (std::size_t t = 0; t < s.size(); ++t)
        for (std::size_t c = 0; c < kChannels; ++c)
            CHECK(std::abs(back.frames[t].get(c) - s.frames[t].get(c)) <= 1e-12);
}

TEST_CASE("normalization before fitting is rejected") {
    SeriesSet s = small_series();
    CHECK_THROWS_AS(apply_minmax(s), UsageError);
    CHECK_THROWS_AS(invert_minmax(s), UsageError);
}

TEST_CASE("degenerate channel range is an error at fit time") {
    SeriesSet s = small_series();
    for (auto& f : s.frames) f.theta = 0.25;
    CHECK_THROWS_AS(fit_minmax(s, 0, s.train_end), DataError);
}

TEST_CASE("windowize counts and contents") {
    SeriesSet s = small_series(20);

    SUBCASE("length 20, window 16, step 2 gives 3 windows") {
        WindowBatch b = windowize(s, 16, 2);
        CHECK(b.windows.dim(0) == 3);
        CHECK(b.windows.dim(1) == 16);
        CHECK(b.windows.dim(2) == 6);
        CHECK(b.origin == std::vector<std::size_t>{0, 2, 4});
    }
    SUBCASE("step 1 covers every start") {
        WindowBatch b = windowize(s, 16, 1);
        CHECK(b.windows.dim(0) == 5);
    }
    SUBCASE("windows are slices of the series") {
        WindowBatch b = windowize(s, 16, 2);
        for (std::size_t w = 0; w < b.windows.dim(0); ++w)
            for (std::size_t i = 0; i < 16; ++i)
                for (std::size_t c = 0; c < kChannels; ++c)
                    CHECK(b.windows.at3(w, i, c) == s.frames[b.origin[w] + i].get(c));
    }
    SUBCASE("window longer than series is rejected") {
        CHECK_THROWS_AS(windowize(s, 21, 1), UsageError);
    }
}

TEST_CASE("channel names round-trip") {
    for (std::size_t c = 0; c < kChannels; ++c) {
        const Channel ch = static_cast<Channel>(c);
        CHECK(channel_from_name(channel_name(ch)) == ch);
    }
    CHECK_THROWS_AS(channel_from_name("volts"), UsageError);
}
