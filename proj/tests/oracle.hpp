#pragma once

// Independent reimplementations used as test oracles. Nothing here calls into
// the library's hashing or rendering code.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string key(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += "§";
    out += parts[i];
  }
  return out;
}

inline double mock_logprob(const std::string& prompt, const std::string& choice) {
  return -static_cast<double>(fnv(key({prompt, choice})) % 1000) / 100.0;
}

// Plain "{{name}}" substitution, no spacing inside braces.
inline std::string substitute(std::string tmpl,
                              const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) {
    const std::string slot = "{{" + k + "}}";
    for (std::size_t p = tmpl.find(slot); p != std::string::npos;
         p = tmpl.find(slot, p + v.size())) {
      tmpl.replace(p, slot.size(), v);
    }
  }
  return tmpl;
}

struct Example {
  std::map<std::string, std::string> values;
  std::vector<std::string> choices;
  int gold;
};

struct Score {
  long correct = 0;
  double accuracy = 0.0;
  double avg_gold = 0.0;
};

inline Score brute_force(const std::string& tmpl, const std::vector<Example>& dev) {
  Score s;
  double sum = 0.0;
  for (const auto& ex : dev) {
    const std::string prompt = substitute(tmpl, ex.values);
    int best = 0;
    double best_lp = mock_logprob(prompt, ex.choices[0]);
    for (int c = 1; c < static_cast<int>(ex.choices.size()); ++c) {
      const double lp = mock_logprob(prompt, ex.choices[static_cast<std::size_t>(c)]);
      if (lp > best_lp) {
        best_lp = lp;
        best = c;
      }
    }
    if (best == ex.gold) ++s.correct;
    sum += mock_logprob(prompt, ex.choices[static_cast<std::size_t>(ex.gold)]);
  }
  s.accuracy = static_cast<double>(s.correct) / static_cast<double>(dev.size());
  s.avg_gold = sum / static_cast<double>(dev.size());
  return s;
}

}  // namespace oracle
