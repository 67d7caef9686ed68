#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "gps/text.hpp"
#include "oracle.hpp"

using namespace gps;

TEST_SUITE("text") {

TEST_CASE("fnv1a64 matches published vectors and the test oracle") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  for (std::string s : {"x", "hello world", "⟦P0⟧", "Select the most plausible"}) {
    CHECK(fnv1a64(s) == oracle::fnv(s));
  }
}

TEST_CASE("hash_fields joins with the section sign") {
  CHECK(hash_fields({"abc", "7"}) == oracle::fnv("abc\xC2\xA7" "7"));
  CHECK(hash_fields({"a", "b", "c"}) == oracle::fnv(oracle::key({"a", "b", "c"})));
  CHECK(hash_fields({"ab", "c"}) != hash_fields({"a", "bc"}));
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("SplitMix64 reference sequence") {
  // First outputs for seed 0 from the reference implementation.
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xe220a8397b1dcdafull);
  CHECK(rng.next() == 0x6e789e6aa1b965f4ull);
  CHECK(rng.next() == 0x06c45d188009454full);
}

TEST_CASE("below stays in range and fisher_yates permutes") {
  SplitMix64 rng(42);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  SplitMix64 r2(9);
  fisher_yates(w, r2);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("sentinels") {
  CHECK(sentinel_token(3) == "⟦P3⟧");
  CHECK(contains_sentinel_char("a ⟧ b"));
  CHECK_FALSE(contains_sentinel_char("plain text"));
}

TEST_CASE("token helpers") {
  const auto spans = whitespace_tokens("  ab  c\td ");
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].begin == 2);
  CHECK(spans[0].end == 4);
  CHECK(spans[2].text == "d");
  CHECK(split_words(" a  b ") == std::vector<std::string>{"a", "b"});
  CHECK(join({"a", "b"}, "-") == "a-b");
  CHECK(trim("  x y ") == "x y");
  CHECK(normalize_whitespace(" a \n b\t") == "a b");
  CHECK(sentinel_aware_tokens("x⟦P0⟧y z") ==
        std::vector<std::string>{"x", "⟦P0⟧", "y", "z"});
  CHECK(levenshtein({"a", "b", "c"}, {"a", "c"}) == 1);
  CHECK(levenshtein({}, {"a", "b"}) == 2);
  CHECK(is_identifier("span1_text"));
  CHECK_FALSE(is_identifier("1abc"));
  CHECK(to_lower_ascii("AbC") == "abc");
}

}
