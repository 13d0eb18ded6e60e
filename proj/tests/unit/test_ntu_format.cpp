#include <gtest/gtest.h>

#include <sstream>

#include "asma/error.hpp"
#include "asma/io_util.hpp"
#include "asma/ntu_format.hpp"

namespace asma {
namespace {

std::string golden_text() { return read_text_file(std::string(ASMA_TEST_DATA_DIR) + "/golden.skeleton"); }

ErrorCode parse_error_code(const std::string& text) {
    try {
        parse_ntu_skeleton(text, build_ntu_graph());
    } catch (const ParseError& e) {
        return e.code();
    }
    ADD_FAILURE() << "parser accepted corrupt input";
    return ErrorCode::Io;
}

// Replaces the n-th line (0-based) of text.
std::string with_line(const std::string& text, std::size_t n, const std::string& line) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string l;
    for (std::size_t i = 0; std::getline(in, l); ++i) out << (i == n ? line : l) << '\n';
    return out.str();
}

TEST(NtuFormat, GoldenFixture) {
    const auto bodies = parse_ntu_skeleton(golden_text(), build_ntu_graph());
    ASSERT_EQ(bodies.size(), 2u);
    const auto& a = bodies[0];
    EXPECT_EQ(a.frames(), 3u);
    EXPECT_EQ(a.channels(), 3u);
    EXPECT_FLOAT_EQ(a.at(0, 0, 4), 0.4f);
    EXPECT_FLOAT_EQ(a.at(1, 2, 10), 2.1f);
    EXPECT_FLOAT_EQ(a.at(2, 1, 24), 3.024f);
    // The second body only appears in frame 1.
    const auto& b = bodies[1];
    EXPECT_FLOAT_EQ(b.at(0, 1, 0), 5.0f);
    EXPECT_EQ(b.at(0, 0, 0), 0.0f);
    EXPECT_EQ(b.at(2, 2, 3), 0.0f);
}

TEST(NtuFormat, Truncation) {
    const auto text = golden_text();
    EXPECT_EQ(parse_error_code(text.substr(0, text.size() / 2)), ErrorCode::MalformedRecord);
}

TEST(NtuFormat, FieldCount) {
    // Line 4 is the first joint record.
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 4, "0.1 0.2")), ErrorCode::MalformedRecord);
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 0, "3 4")), ErrorCode::MalformedRecord);
}

TEST(NtuFormat, NonNumeric) {
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 4, "0.1 abc 0.3 1 2 3 4 5 6 7 8 2")), ErrorCode::NonNumericField);
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 0, "three")), ErrorCode::NonNumericField);
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 4, "0.1 nan 0.3")), ErrorCode::NonNumericField);
}

TEST(NtuFormat, Empty) {
    EXPECT_EQ(parse_error_code(""), ErrorCode::EmptyFile);
    EXPECT_EQ(parse_error_code("  \n\n \r\n"), ErrorCode::EmptyFile);
}

TEST(NtuFormat, JointCountMismatch) {
    EXPECT_EQ(parse_error_code(with_line(golden_text(), 3, "24")), ErrorCode::MalformedRecord);
}

TEST(NtuFormat, ErrorsCarryLineNumbers) {
    try {
        parse_ntu_skeleton(with_line(golden_text(), 6, "1 2 x"), build_ntu_graph());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 7u);
    }
}

TEST(NtuFormat, WriteParseRoundTrip) {
    const auto g = build_ntu_graph();
    SkeletonSequence x(3, 4, g);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = static_cast<real>(0.37 * i - 11.5);
    std::ostringstream out;
    write_ntu_skeleton(out, {x, x});
    const auto back = parse_ntu_skeleton(out.str(), g);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_TRUE(back[0] == x);
    EXPECT_TRUE(back[1] == x);
}

TEST(NtuFormat, LabelFromFilename) {
    EXPECT_EQ(ntu_label_from_filename("S001C002P003R002A017.skeleton"), 16);
    EXPECT_EQ(ntu_label_from_filename("S001C001P001R001A001"), 0);
    EXPECT_FALSE(ntu_label_from_filename("walk.skeleton").has_value());
}

}  // namespace
}  // namespace asma
