#include "doctest.h"

#include <cstring>
#include <limits>
#include <random>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"
#include "support.hpp"

using namespace dlfd;

TEST_CASE("doubles round trip through their shortest form") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    double x;
    const std::uint64_t b = bits(rng);
    std::memcpy(&x, &b, sizeof x);
    if (!std::isfinite(x)) continue;
    REQUIRE(text::parse_double(text::format_double(x)) == x);
  }
  CHECK(text::format_double(0.1) == "0.1");
  CHECK(text::format_double(-2.0) == "-2");
}

TEST_CASE("strict number parsing") {
  CHECK(text::parse_double(" 1.5 ") == 1.5);
  CHECK_THROWS_AS(text::parse_double("1.5x"), Error);
  CHECK_THROWS_AS(text::parse_double(""), Error);
  CHECK(text::parse_uint("42") == 42);
  CHECK_THROWS_AS(text::parse_uint("-1"), Error);
  CHECK_THROWS_AS(text::parse_uint("4.2"), Error);
}

TEST_CASE("splitting and trimming") {
  const auto parts = text::split("a,,b", ',');
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].empty());
  CHECK(text::split_whitespace("  a \t b  ").size() == 2);
  CHECK(text::trim("\t x \r\n") == "x");
}

TEST_CASE("files") {
  dlfd::testing::TempDir dir("io");
  text::write_file(dir / "f.txt", "hello\n");
  CHECK(text::read_file(dir / "f.txt") == "hello\n");
  try {
    text::read_file(dir / "missing.txt");
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}

TEST_CASE("fnv-1a reference values") {
  CHECK(text::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(text::fnv1a_hex("a") == "af63dc4c8601ec8c");
}
