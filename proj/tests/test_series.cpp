#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hints/errors.hpp"
#include "hints/series.hpp"
#include "helpers.hpp"

using namespace hints;

TEST_CASE("csv ingestion of literal values") {
    const auto dir = test::scratch_dir("series_csv");
    test::write_file(dir + "/tiny.csv", "a,b\n1,2\n3,4\n5,6\n");
    const auto s = load_csv(dir + "/tiny.csv");
    CHECK(s.dims() == 2);
    CHECK(s.length() == 3);
    CHECK(s.values(0, 0) == 1.0);
    CHECK(s.values(1, 0) == 2.0);
    CHECK(s.values(0, 2) == 5.0);
    CHECK(s.values(1, 2) == 6.0);
    CHECK(s.names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("csv ingestion reports non-numeric cells with their location") {
    const auto dir = test::scratch_dir("series_badcell");
    std::string body = "x,y\n";
    for (int r = 1; r <= 10; ++r) {
        if (r == 7)
            body += "1.0,abc\n";
        else
            body += "1.0,2.0\n";
    }
    test::write_file(dir + "/bad.csv", body);
    try {
        load_csv(dir + "/bad.csv");
        FAIL("expected NonNumericCell");
    } catch (const NonNumericCell& e) {
        CHECK(e.row == 7);
        CHECK(e.col == 2);
    }
}

TEST_CASE("csv ingestion error paths") {
    const auto dir = test::scratch_dir("series_errors");
    test::write_file(dir + "/empty.csv", "");
    CHECK_THROWS_AS(load_csv(dir + "/empty.csv"), EmptyFile);
    test::write_file(dir + "/header_only.csv", "a,b\n");
    CHECK_THROWS_AS(load_csv(dir + "/header_only.csv"), EmptyFile);

    test::write_file(dir + "/ok.csv", "a,b\n1,2\n3,4\n");
    CsvSchema schema;
    schema.columns = {"a", "missing"};
    CHECK_THROWS_AS(load_csv(dir + "/ok.csv", schema), MissingColumn);

    // NaN/Inf cells are rejected, not ingested
    test::write_file(dir + "/nan.csv", "a\n1\nnan\n");
    CHECK_THROWS_AS(load_csv(dir + "/nan.csv"), NonNumericCell);
}

TEST_CASE("csv timestamp column is excluded from D and kept as labels") {
    const auto dir = test::scratch_dir("series_ts");
    test::write_file(dir + "/ts.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n");
    const auto s = load_csv(dir + "/ts.csv");
    CHECK(s.dims() == 2);
    CHECK(s.timestamps.size() == 2);
    CHECK(s.timestamps[0] == "2020-01-01");
}

TEST_CASE("csv schema selects and orders columns; delimiter configurable") {
    const auto dir = test::scratch_dir("series_schema");
    test::write_file(dir + "/semi.csv", "a;b;c\n1;2;3\n4;5;6\n");
    CsvSchema schema;
    schema.delimiter = ';';
    schema.columns = {"c", "a"};
    const auto s = load_csv(dir + "/semi.csv", schema);
    CHECK(s.dims() == 2);
    CHECK(s.names[0] == "c");
    CHECK(s.values(0, 0) == 3.0);
    CHECK(s.values(1, 1) == 4.0);
}

TEST_CASE("benchmark-format csv has eight variables") {
    // The exchange-rate benchmark ships eight currency columns; use the real
    // file when present, otherwise an equally shaped stand-in.
    std::string path = "data/exchange_rate.csv";
    if (!std::filesystem::exists(path)) {
        const auto dir = test::scratch_dir("series_exchange");
        path = dir + "/exchange_like.csv";
        std::string body = "c0,c1,c2,c3,c4,c5,c6,c7\n";
        auto rng = make_rng(1, "exchange_like");
        for (int t = 0; t < 32; ++t) {
            for (int d = 0; d < 8; ++d)
                body += (d ? "," : "") + std::to_string(0.5 + 0.01 * uniform01(rng));
            body += "\n";
        }
        test::write_file(path, body);
    }
    CHECK(load_csv(path).dims() == 8);
}

TEST_CASE("window arithmetic") {
    const Mat x = test::random_mat(2, 10, 21);
    const auto w = make_windows(x, {0, 10}, 4, 2, 1);
    REQUIRE(w.size() == 5);
    CHECK(w[0].start == 0);
    for (std::size_t t = 0; t < 4; ++t) CHECK(w[0].input(0, t) == x(0, t));
    for (std::size_t t = 0; t < 2; ++t) CHECK(w[0].target(0, t) == x(0, 4 + t));
}

TEST_CASE("window preconditions") {
    const Mat x = test::random_mat(1, 6, 22);
    CHECK_THROWS_AS(make_windows(x, {0, 6}, 4, 3, 1), SeriesTooShort);
}

TEST_CASE("windows match brute-force index enumeration") {
    const Mat x = test::random_mat(3, 100, 23);
    const std::size_t L = 24, h = 12, stride = 12;
    const auto w = make_windows(x, {0, 100}, L, h, stride);
    // oracle: direct enumeration of every valid start index
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + L + h <= 100; s += stride) starts.push_back(s);
    REQUIRE(w.size() == starts.size());
    CHECK(w.size() == 6);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i].start == starts[i]);
        for (std::size_t d = 0; d < 3; ++d) {
            for (std::size_t t = 0; t < L; ++t) CHECK(w[i].input(d, t) == x(d, starts[i] + t));
            for (std::size_t t = 0; t < h; ++t) CHECK(w[i].target(d, t) == x(d, starts[i] + L + t));
        }
    }
}

TEST_CASE("window exhaustiveness under stride") {
    const Mat x = test::random_mat(1, 57, 24);
    for (std::size_t stride : {std::size_t(1), std::size_t(2), std::size_t(5)}) {
        const auto w = make_windows(x, {0, 57}, 8, 3, stride);
        CHECK(w.size() == (57 - 8 - 3) / stride + 1);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i].start == i * stride);
    }
}

TEST_CASE("normalizer two-point case and constant rejection") {
    Mat two(1, 2);
    two(0, 0) = 0.0;
    two(0, 1) = 2.0;
    const auto nm = fit_normalizer(two, {0, 2});
    CHECK(nm.mean[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nm.stddev[0] == doctest::Approx(1.0).epsilon(1e-15));

    Mat constant(1, 3, 1.0);
    try {
        fit_normalizer(constant, {0, 3});
        FAIL("expected ConstantVariable");
    } catch (const ConstantVariable& e) {
        CHECK(e.variable == 0);
    }
}

TEST_CASE("normalizer matches a two-pass oracle and round-trips") {
    const Mat x = test::random_mat(4, 50, 25, 3.0);
    const auto nm = fit_normalizer(x, {0, 50});
    for (std::size_t d = 0; d < 4; ++d) {
        // naive two-pass mean / population std
        double mu = 0;
        for (std::size_t t = 0; t < 50; ++t) mu += x(d, t);
        mu /= 50;
        double ss = 0;
        for (std::size_t t = 0; t < 50; ++t) ss += (x(d, t) - mu) * (x(d, t) - mu);
        const double sd = std::sqrt(ss / 50);
        CHECK(std::abs(nm.mean[d] - mu) < 1e-12);
        CHECK(std::abs(nm.stddev[d] - sd) < 1e-12);
    }
    const Mat back = nm.inverse(nm.transform(x));
    CHECK(max_abs_diff(back, x) < 1e-12);
}

TEST_CASE("normalizer fits on the train range only") {
    Mat x(1, 4);
    x(0, 0) = 0.0;
    x(0, 1) = 2.0;
    x(0, 2) = 100.0;
    x(0, 3) = -100.0;
    const auto nm = fit_normalizer(x, {0, 2});
    CHECK(nm.mean[0] == doctest::Approx(1.0));
    CHECK(nm.stddev[0] == doctest::Approx(1.0));
}

TEST_CASE("splits are contiguous, disjoint and time ordered") {
    const auto s = make_splits(1000, SplitSpec{});
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == s.val.begin);
    CHECK(s.val.end == s.test.begin);
    CHECK(s.test.end == 1000);
    CHECK(s.train.length() == 700);
    CHECK(s.val.length() == 100);
    CHECK(s.test.length() == 200);

    SplitSpec bad;
    bad.train_frac = 0.5;
    bad.val_frac = 0.2;
    bad.test_frac = 0.2;
    CHECK_THROWS_AS(make_splits(100, bad), UsageError);
}

TEST_CASE("series validation rejects duplicates and non-finite values") {
    MultivariateSeries s;
    s.values = Mat(2, 3, 1.0);
    s.values(1, 0) = 2.0;
    s.names = {"a", "a"};
    CHECK_THROWS(s.validate());
    s.names = {"a", "b"};
    CHECK_NOTHROW(s.validate());
    s.values(0, 1) = std::nan("");
    CHECK_THROWS(s.validate());
}

TEST_CASE("series csv round trip") {
    const auto dir = test::scratch_dir("series_roundtrip");
    MultivariateSeries s;
    s.values = test::random_mat(3, 20, 26);
    s.names = {"alpha", "beta", "gamma"};
    save_csv(s, dir + "/out.csv");
    const auto back = load_csv(dir + "/out.csv");
    CHECK(back.dims() == 3);
    CHECK(back.length() == 20);
    CHECK(max_abs_diff(back.values, s.values) < 1e-15);
}
