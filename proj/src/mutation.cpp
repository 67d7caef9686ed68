#include "gps/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gps/text.hpp"

namespace gps {

using nlohmann::json;

const char* to_string(Operator op) {
  switch (op) {
    case Operator::back_translation: return "back_translation";
    case Operator::cloze: return "cloze";
    case Operator::sentence_continuation: return "sentence_continuation";
  }
  return "unknown";
}

Operator operator_from_string(const std::string& name) {
  if (name == "back_translation" || name == "bt") return Operator::back_translation;
  if (name == "cloze") return Operator::cloze;
  if (name == "sentence_continuation" || name == "sc") {
    return Operator::sentence_continuation;
  }
  throw std::invalid_argument("unknown mutation operator '" + name + "'");
}

void MutationConfig::check() const {
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
    throw std::invalid_argument("mask_fraction must be in (0,1)");
  }
  if (n_fill_candidates < 1) {
    throw std::invalid_argument("n_fill_candidates must be >= 1");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw std::invalid_argument("top_p must be in (0,1]");
  }
  if (children_per_parent < 0) {
    throw std::invalid_argument("children_per_parent must be >= 0");
  }
  if (max_gen_tokens < 1) throw std::invalid_argument("max_gen_tokens must be >= 1");
  if (sc_meta_prompt.find("{parent}") == std::string::npos) {
    throw std::invalid_argument("sc_meta_prompt must contain {parent}");
  }
  if (op == Operator::back_translation && bt_languages.empty()) {
    throw std::invalid_argument("bt_languages is empty");
  }
  for (const auto& l : bt_languages) {
    if (l == "en" || !is_supported_language(l)) {
      throw std::invalid_argument("unsupported pivot language '" + l + "'");
    }
  }
}

MutationConfig MutationConfig::from_json(const json& j) {
  MutationConfig cfg;
  if (j.contains("operator")) cfg.op = operator_from_string(j["operator"].get<std::string>());
  if (j.contains("bt_languages")) {
    cfg.bt_languages = j["bt_languages"].get<std::vector<std::string>>();
  }
  cfg.mask_fraction = j.value("mask_fraction", cfg.mask_fraction);
  cfg.n_fill_candidates = j.value("n_fill_candidates", cfg.n_fill_candidates);
  cfg.sc_meta_prompt = j.value("sc_meta_prompt", cfg.sc_meta_prompt);
  cfg.top_p = j.value("top_p", cfg.top_p);
  cfg.children_per_parent = j.value("children_per_parent", cfg.children_per_parent);
  cfg.max_gen_tokens = j.value("max_gen_tokens", cfg.max_gen_tokens);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.check();
  return cfg;
}

json MutationConfig::to_json() const {
  return {{"operator", to_string(op)},
          {"bt_languages", bt_languages},
          {"mask_fraction", mask_fraction},
          {"n_fill_candidates", n_fill_candidates},
          {"sc_meta_prompt", sc_meta_prompt},
          {"top_p", top_p},
          {"children_per_parent", children_per_parent},
          {"max_gen_tokens", max_gen_tokens},
          {"seed", seed}};
}

MutationError::MutationError(Kind kind, std::string message)
    : std::runtime_error(std::move(message)), kind_(kind) {}

json Candidate::to_json() const {
  return {{"template", tmpl.raw()},
          {"parent_id", parent_id},
          {"op", op},
          {"provenance", provenance}};
}

Candidate Candidate::from_json(const json& j) {
  return {Template::parse(j.at("template").get<std::string>()),
          j.at("parent_id").get<std::string>(), j.at("op").get<std::string>(),
          j.value("provenance", json::object())};
}

namespace {

std::string reason(const std::string& what, const std::exception& e) {
  return what + ": " + e.what();
}

}  // namespace

MutationResult mutate_back_translation(const Template& parent,
                                       const Backend& backend,
                                       const MutationConfig& cfg) {
  const ProtectedText prot = protect(parent);
  MutationResult out;
  for (const auto& lang : cfg.bt_languages) {
    try {
      const auto there = backend.translate({prot.text, "en", lang});
      out.forward_passes += there.forward_passes;
      const auto back = backend.translate({there.text, lang, "en"});
      out.forward_passes += back.forward_passes;
      Template child = restore(back.text, prot.map);
      out.children.push_back({std::move(child), parent.id(),
                              to_string(Operator::back_translation),
                              {{"pivot", lang}}});
    } catch (const BackendError& e) {
      out.dropped.push_back(reason("pivot " + lang, e));
    } catch (const TemplateError& e) {
      out.dropped.push_back(reason("pivot " + lang, e));
    }
  }
  if (out.children.empty()) {
    throw MutationError(MutationError::Kind::AllPivotsFailed,
                        "no pivot language produced a valid prompt");
  }
  return out;
}

MutationResult mutate_cloze(const Template& parent, const Backend& backend,
                            const MutationConfig& cfg) {
  const ProtectedText prot = protect(parent);
  const auto tokens = whitespace_tokens(prot.text);
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!contains_sentinel_char(tokens[i].text)) maskable.push_back(i);
  }
  if (maskable.empty()) {
    throw MutationError(MutationError::Kind::NoMaskableTokens,
                        "protected prompt has no maskable word");
  }
  // The epsilon keeps products like 0.1 * 30 from rounding up a whole token.
  const double want = std::ceil(cfg.mask_fraction * tokens.size() - 1e-9);
  const std::size_t n_mask = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(want, 1.0)), 1, maskable.size());

  SplitMix64 rng(static_cast<std::uint64_t>(cfg.seed));
  fisher_yates(maskable, rng);
  std::vector<std::size_t> masked(maskable.begin(), maskable.begin() + n_mask);
  std::sort(masked.begin(), masked.end());

  // Splice markers over the chosen tokens, keeping all other bytes.
  auto splice = [&](const std::vector<std::string>& fills) {
    std::string text;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < masked.size(); ++b) {
      const auto& tok = tokens[masked[b]];
      text.append(prot.text, pos, tok.begin - pos);
      text += fills[b];
      pos = tok.end;
    }
    text.append(prot.text, pos, std::string::npos);
    return text;
  };
  std::vector<std::string> markers;
  for (std::size_t b = 0; b < masked.size(); ++b) markers.push_back(blank_marker(b));
  const std::string blanked = splice(markers);

  MutationResult out;
  const auto resp = backend.fill_blanks({blanked, cfg.n_fill_candidates});
  out.forward_passes += resp.forward_passes;
  json positions = json::array();
  for (auto m : masked) positions.push_back(m);

  auto ranked = resp.candidates;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const FillCandidate& a, const FillCandidate& b) {
                     return a.score > b.score;
                   });
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& cand = ranked[k];
    if (cand.fills.size() != masked.size()) {
      out.dropped.push_back("candidate " + std::to_string(k) +
                            ": wrong number of fills");
      continue;
    }
    try {
      Template child = restore(splice(cand.fills), prot.map);
      out.children.push_back({std::move(child), parent.id(),
                              to_string(Operator::cloze),
                              {{"masked_positions", positions},
                               {"fill_score", cand.score},
                               {"rank", k}}});
    } catch (const TemplateError& e) {
      out.dropped.push_back(reason("candidate " + std::to_string(k), e));
    }
  }
  return out;
}

MutationResult mutate_sentence_continuation(const Template& parent,
                                            const Backend& backend,
                                            const MutationConfig& cfg) {
  const ProtectedText prot = protect(parent);
  std::string meta = cfg.sc_meta_prompt;
  meta.replace(meta.find("{parent}"), std::string_view("{parent}").size(),
               prot.text);

  const int children = std::max(cfg.children_per_parent, 1);
  MutationResult out;
  for (int i = 0; i < children; ++i) {
    GenRequest req;
    req.prompt = meta;
    req.max_tokens = cfg.max_gen_tokens;
    req.top_p = cfg.top_p;
    req.stop = {"\n"};
    req.seed = cfg.seed + i;
    try {
      const auto resp = backend.generate(req);
      out.forward_passes += resp.forward_passes;
      const std::string_view text = trim(resp.text);
      if (text.empty()) {
        out.dropped.push_back("child " + std::to_string(i) + ": EmptyGeneration");
        continue;
      }
      Template child = restore(text, prot.map);
      out.children.push_back({std::move(child), parent.id(),
                              to_string(Operator::sentence_continuation),
                              {{"seed", req.seed}, {"top_p", req.top_p}}});
    } catch (const BackendError& e) {
      out.dropped.push_back(reason("child " + std::to_string(i), e));
    } catch (const TemplateError& e) {
      out.dropped.push_back(reason("child " + std::to_string(i), e));
    }
  }
  return out;
}

MutationResult reproduce(const Template& parent, const Backend& backend,
                         const MutationConfig& cfg) {
  MutationResult out;
  try {
    switch (cfg.op) {
      case Operator::back_translation:
        out = mutate_back_translation(parent, backend, cfg);
        break;
      case Operator::cloze:
        out = mutate_cloze(parent, backend, cfg);
        break;
      case Operator::sentence_continuation:
        out = mutate_sentence_continuation(parent, backend, cfg);
        break;
    }
  } catch (const MutationError& e) {
    out.dropped.push_back(e.what());
  } catch (const BackendError& e) {
    out.dropped.push_back(e.what());
  }
  if (out.children.empty()) {
    out.children.push_back({parent, parent.id(), to_string(cfg.op),
                            {{"fallback", "keep_parent"}}});
  }
  return out;
}

std::vector<Candidate> filter_candidates(std::vector<Candidate> candidates,
                                         const std::set<std::string>& existing,
                                         const TaskSpec& schema) {
  std::vector<Candidate> kept;
  std::set<std::string> taken;
  for (auto& c : candidates) {
    std::string norm = c.tmpl.normalized();
    if (existing.contains(norm) || taken.contains(norm)) continue;
    if (!validate_for_task(c.tmpl, schema)) continue;
    taken.insert(std::move(norm));
    kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace gps
