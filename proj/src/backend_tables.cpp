#include "gps/backend.hpp"

namespace gps {

namespace {

// Each row is a synonym group; a word belongs to exactly one row.
const std::vector<std::vector<std::string_view>> kSynonyms = {
    {"plausible", "believable", "likely", "reasonable", "agreeable"},
    {"select", "choose", "pick"},
    {"say", "state", "claim"},
    {"justified", "entitled", "warranted"},
    {"think", "believe", "suppose"},
    {"answer", "reply", "response"},
    {"passage", "paragraph", "excerpt"},
    {"continue", "proceed", "unfold"},
    {"situation", "scenario", "circumstance"},
    {"begins", "starts", "opens"},
    {"reason", "grounds", "basis"},
    {"happen", "occur"},
    {"true", "correct", "accurate"},
    {"above", "preceding", "earlier"},
    {"refer", "point", "relate"},
    {"determine", "decide", "judge"},
    {"statement", "sentence", "assertion"},
    {"question", "query"},
    {"describe", "explain", "depict"},
    {"following", "next", "subsequent"},
    {"good", "fine", "great"},
    {"given", "provided", "supplied"},
    {"read", "review", "examine"},
};

const std::vector<std::string_view> kFillers = {
    "very",  "really", "the",    "a",     "new",    "simple", "clear",
    "short", "given",  "best",   "main",  "one",    "this",   "that",
    "same",  "other",  "each",   "any",   "true",   "only",   "first",
    "last",  "whole",  "exact",  "good",  "such",   "common", "usual",
    "basic", "most",
};

}  // namespace

std::span<const std::vector<std::string_view>> MockBackend::synonym_table() {
  return kSynonyms;
}

std::span<const std::string_view> MockBackend::filler_table() {
  return kFillers;
}

}  // namespace gps
