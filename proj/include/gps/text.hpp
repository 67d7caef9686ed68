#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace gps {

// 64-bit FNV-1a. Every deterministic component (mock backend, oracle, ids)
// hashes with exactly these constants.
inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// Field separator used when hashing composite keys ("§", U+00A7).
inline constexpr std::string_view kKeySeparator = "\xC2\xA7";

/// FNV-1a over the fields joined by `§`: h(a § b § c ...).
std::uint64_t hash_fields(std::initializer_list<std::string_view> fields);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

/// SplitMix64 generator (Steele, Lea, Flood constants). The full state is a
/// single word, which is what checkpoints persist.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound) via the high word of a 128-bit product.
  std::uint64_t below(std::uint64_t bound) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(next()) * bound;
    return static_cast<std::uint64_t>(product >> 64);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// In-place Fisher-Yates shuffle, iterating i = n-1 .. 1 with j = below(i+1).
template <typename T>
void fisher_yates(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Protection sentinels: ⟦P0⟧, ⟦P1⟧, ...
inline constexpr std::string_view kSentinelOpen = "\xE2\x9F\xA6";   // ⟦
inline constexpr std::string_view kSentinelClose = "\xE2\x9F\xA7";  // ⟧

std::string sentinel_token(std::size_t index);
bool contains_sentinel_char(std::string_view text);

struct TokenSpan {
  std::size_t begin;
  std::size_t end;
  std::string_view text;
};

/// Maximal runs of non-whitespace, with byte offsets into `text`.
std::vector<TokenSpan> whitespace_tokens(std::string_view text);
std::vector<std::string> split_words(std::string_view text);

std::string join(const std::vector<std::string>& words, std::string_view sep);
std::string_view trim(std::string_view text);

/// Trim and collapse internal whitespace runs to a single space.
std::string normalize_whitespace(std::string_view text);

/// Whitespace tokens with sentinels split out as standalone atoms, so that
/// `"⟦P1⟧"?` becomes `"`, `⟦P1⟧`, `"?`.
std::vector<std::string> sentinel_aware_tokens(std::string_view text);

std::size_t levenshtein(const std::vector<std::string>& a,
                        const std::vector<std::string>& b);

bool is_identifier(std::string_view text);
std::string to_lower_ascii(std::string_view text);

}  // namespace gps
