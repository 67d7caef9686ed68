#include <doctest.h>

#include <random>

#include "gps/mutation.hpp"
#include "gps/text.hpp"
#include "helpers.hpp"

using namespace gps;
using nlohmann::json;

namespace {

struct Broken : MockBackend {
  GenResponse generate(const GenRequest&) const override {
    throw BackendError(BackendError::Kind::Timeout, "down");
  }
  TranslateResponse translate(const TranslateRequest&) const override {
    throw BackendError(BackendError::Kind::Transport, "down");
  }
};

const Template kParent = Template::parse(
    "{{premise}} Are we justified in saying that \"{{hypothesis}}\"? Yes, no, or maybe?");

}  // namespace

TEST_SUITE("mutation") {

TEST_CASE("operator names") {
  CHECK(operator_from_string("bt") == Operator::back_translation);
  CHECK(operator_from_string("cloze") == Operator::cloze);
  CHECK(operator_from_string("sentence_continuation") == Operator::sentence_continuation);
  CHECK_THROWS(operator_from_string("crossover"));
}

TEST_CASE("config json and checks") {
  MutationConfig c;
  CHECK(c.bt_languages.size() == 11);
  CHECK(c.mask_fraction == 0.15);
  CHECK(MutationConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.mask_fraction = 0.0;
  CHECK_THROWS(c.check());
}

TEST_CASE("back translation keeps placeholders, one child per pivot") {
  MockBackend m;
  MutationConfig cfg;
  const auto r = mutate_back_translation(kParent, m, cfg);
  CHECK(r.children.size() == 11);
  CHECK(r.forward_passes == 11 * 2 * 2);
  for (std::size_t i = 0; i < r.children.size(); ++i) {
    const auto& c = r.children[i];
    CHECK(c.op == "back_translation");
    CHECK(c.parent_id == kParent.id());
    CHECK(c.provenance["pivot"] == cfg.bt_languages[i]);
    CHECK(c.tmpl.placeholders() == kParent.placeholders());
    CHECK(c.tmpl.raw().find("{{premise}}") != std::string::npos);
  }
}

TEST_CASE("back translation with every pivot failing") {
  Broken b;
  try {
    mutate_back_translation(kParent, b, MutationConfig{});
    FAIL("expected MutationError");
  } catch (const MutationError& e) {
    CHECK(e.kind() == MutationError::Kind::AllPivotsFailed);
  }
}

TEST_CASE("cloze masks the expected count and never touches placeholders") {
  MockBackend m;
  MutationConfig cfg;
  cfg.op = Operator::cloze;
  cfg.seed = 3;
  const auto r = mutate_cloze(kParent, m, cfg);
  // Protected text has 12 whitespace tokens; ceil(0.15 * 12) = 2.
  REQUIRE(r.children.size() == 5);
  CHECK(r.forward_passes == 10);
  for (std::size_t k = 0; k < r.children.size(); ++k) {
    const auto& c = r.children[k];
    CHECK(c.provenance["masked_positions"].size() == 2);
    CHECK(c.provenance["rank"] == k);
    CHECK(c.tmpl.placeholders() == kParent.placeholders());
    CHECK(split_words(c.tmpl.raw()).size() == split_words(kParent.raw()).size());
  }
  CHECK(mutate_cloze(kParent, m, cfg).children[0].tmpl.raw() == r.children[0].tmpl.raw());

  cfg.mask_fraction = 0.1;
  const auto tiny = mutate_cloze(Template::parse("{{a}} word {{b}}"), m, cfg);
  CHECK(tiny.children[0].provenance["masked_positions"] == json::array({1}));
  try {
    mutate_cloze(Template::parse("{{a}} {{b}}"), m, cfg);
    FAIL("expected NoMaskableTokens");
  } catch (const MutationError& e) {
    CHECK(e.kind() == MutationError::Kind::NoMaskableTokens);
  }
}

TEST_CASE("sentence continuation") {
  MockBackend m;
  MutationConfig cfg;
  cfg.children_per_parent = 4;
  cfg.seed = 10;
  const auto r = mutate_sentence_continuation(kParent, m, cfg);
  REQUIRE(r.children.size() == 4);
  CHECK(r.forward_passes == 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(r.children[static_cast<std::size_t>(i)].provenance["seed"] == 10 + i);
    CHECK(r.children[static_cast<std::size_t>(i)].tmpl.placeholders() ==
          kParent.placeholders());
  }
}

TEST_CASE("reproduce falls back to the parent") {
  Broken b;
  for (auto op : {Operator::back_translation, Operator::sentence_continuation}) {
    MutationConfig cfg;
    cfg.op = op;
    const auto r = reproduce(kParent, b, cfg);
    REQUIRE(r.children.size() == 1);
    CHECK(r.children[0].tmpl == kParent);
    CHECK(r.children[0].provenance["fallback"] == "keep_parent");
    CHECK_FALSE(r.dropped.empty());
  }
}

TEST_CASE("candidate json round trip") {
  Candidate c{kParent, "abc", "cloze", {{"rank", 1}}};
  const auto back = Candidate::from_json(c.to_json());
  CHECK(back.tmpl == c.tmpl);
  CHECK(back.provenance == c.provenance);
}

TEST_CASE("filter drops duplicates, seen texts and invalid prompts") {
  const auto task = testing_support::text_task();
  auto cand = [](std::string s) { return Candidate{Template::parse(s), "", "seed", {}}; };
  std::vector<Candidate> in = {cand("{{text}} a b"), cand("{{text}}  a\tb"),
                               cand("no slot"), cand("{{text}} c"),
                               cand("{{text}} {{ghost}}"), cand("{{text}} seen")};
  const auto out = filter_candidates(in, {"{{text}} seen"}, task);
  REQUIRE(out.size() == 2);
  CHECK(out[0].tmpl.raw() == "{{text}} a b");
  CHECK(out[1].tmpl.raw() == "{{text}} c");
}

}
