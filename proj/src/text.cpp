#include "gps/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace gps {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::uint64_t hash_fields(std::initializer_list<std::string_view> fields) {
  std::uint64_t h = kFnvOffsetBasis;
  bool first = true;
  for (std::string_view f : fields) {
    if (!first) h = fnv1a64(kKeySeparator, h);
    h = fnv1a64(f, h);
    first = false;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string sentinel_token(std::size_t index) {
  std::string out(kSentinelOpen);
  out += 'P';
  out += std::to_string(index);
  out += kSentinelClose;
  return out;
}

bool contains_sentinel_char(std::string_view text) {
  return text.find(kSentinelOpen) != std::string_view::npos ||
         text.find(kSentinelClose) != std::string_view::npos;
}

std::vector<TokenSpan> whitespace_tokens(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    out.push_back({i, j, text.substr(i, j - i)});
    i = j;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& tok : whitespace_tokens(text)) out.emplace_back(tok.text);
  return out;
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

std::string normalize_whitespace(std::string_view text) {
  return join(split_words(text), " ");
}

std::vector<std::string> sentinel_aware_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& tok : whitespace_tokens(text)) {
    std::string_view rest = tok.text;
    while (!rest.empty()) {
      const auto open = rest.find(kSentinelOpen);
      if (open == std::string_view::npos) {
        out.emplace_back(rest);
        break;
      }
      const auto close = rest.find(kSentinelClose, open);
      if (close == std::string_view::npos) {
        out.emplace_back(rest);
        break;
      }
      if (open > 0) out.emplace_back(rest.substr(0, open));
      const auto end = close + kSentinelClose.size();
      out.emplace_back(rest.substr(open, end - open));
      rest.remove_prefix(end);
    }
  }
  return out;
}

std::size_t levenshtein(const std::vector<std::string>& a,
                        const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto head = static_cast<unsigned char>(text[0]);
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(text.begin() + 1, text.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace gps
