#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mpal/io.hpp"

using namespace mpal;

TEST(Config, ParseCommentsAndLists) {
    const auto c = Config::parse_string("# header\nN = 2   # particles\nI = -0.5, 0.5\nname = gauss\n\n");
    EXPECT_EQ(c.get_int("N", 0), 2);
    EXPECT_EQ(c.get_list("I", {}), (std::vector<double>{-0.5, 0.5}));
    EXPECT_EQ(c.get_string("name", ""), "gauss");
    EXPECT_EQ(c.get_double("missing", 7.5), 7.5);
}

TEST(Config, Errors) {
    EXPECT_THROW(Config::parse_string("N 2\n"), ConfigError);
    EXPECT_THROW(Config::parse_string("N = 2\nN = 3\n"), ConfigError);
    EXPECT_THROW(Config::parse_string(" = 3\n"), ConfigError);
    const auto c = Config::parse_string("a = x\nb = 1.5\nc = maybe\n");
    EXPECT_THROW(c.get_double("a", 0), ConfigError);
    EXPECT_THROW(c.get_int("b", 0), ConfigError);
    EXPECT_THROW(c.get_bool("c", false), ConfigError);
    EXPECT_THROW(c.get_int_list("b", {}), ConfigError);
    EXPECT_THROW(Config::load("/nonexistent/x.conf"), ConfigError);
}

TEST(Config, OverridesAndRoundTrip) {
    auto c = Config::parse_string("a = 1\nb = 2\n");
    c.apply_override("b=5");
    c.apply_override(" z = hello ");
    EXPECT_EQ(c.get_int("b", 0), 5);
    EXPECT_EQ(c.get_string("z", ""), "hello");
    EXPECT_THROW(c.apply_override("novalue"), ConfigError);
    const auto again = Config::parse_string(c.dump());
    EXPECT_EQ(again.entries(), c.entries());
    EXPECT_EQ(Config::from_json(c.to_json()).entries(), c.entries());
    EXPECT_EQ(c.unknown_keys({"a", "b"}), (std::vector<std::string>{"z"}));
}

TEST(FormatDouble, RoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(io::parse_double(io::format_double(v)), v);
    EXPECT_EQ(io::format_double(std::nan("")), "nan");
    EXPECT_TRUE(std::isinf(io::parse_double("inf")));
}

TEST(CurveCsv, RoundTrip) {
    EmpiricalCurve c;
    c.push(1.0, 0.25, 0.1, 0.4, std::nan(""), 25, 100);
    c.push(2.0, 0.0, 0.0, 0.03, 0.5, 0, 100);
    std::stringstream ss;
    write_curve_csv(ss, c);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kCurveHeader);
    const auto back = read_curve_csv(ss);
    EXPECT_TRUE(back == c);
    EXPECT_TRUE(back.well_formed());
}

TEST(CurveCsv, Malformed) {
    std::stringstream bad_header("a,b\n");
    EXPECT_THROW(read_curve_csv(bad_header), IoError);
    std::stringstream short_row(std::string(kCurveHeader) + "\n1,2,3\n");
    EXPECT_THROW(read_curve_csv(short_row), IoError);
}

TEST(Files, WriteReadAndFailure) {
    const auto p = std::filesystem::temp_directory_path() / "mpal_io_test" / "sub" / "f.txt";
    write_text_file(p, "abc\n");
    EXPECT_EQ(read_text_file(p), "abc\n");
    std::filesystem::remove_all(p.parent_path().parent_path());
    EXPECT_THROW(read_text_file(p), IoError);
    EXPECT_THROW(write_text_file("/proc/mpal_no/x.txt", "x"), IoError);
}
