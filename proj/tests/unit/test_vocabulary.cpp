#include <gtest/gtest.h>

#include "kriss/augment.hpp"
#include "kriss/error.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/vocabulary.hpp"

using namespace kriss;

namespace {

MentionExample example(std::vector<std::string> l, std::string mention, std::vector<std::string> r) {
  MentionExample m;
  m.doc_id = "d";
  m.entity_id = "E";
  m.mention = std::move(mention);
  m.end_char = m.mention.size();
  m.ctx_l = std::move(l);
  m.ctx_r = std::move(r);
  return m;
}

std::vector<std::string> seq(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

Vocabulary vocab_for(const std::vector<MentionExample>& xs) {
  MentionStore s;
  for (const auto& x : xs) s.add(x);
  return Vocabulary::build(s, 1);
}

}  // namespace

TEST(Vocabulary, ReservedIdsAreFixed) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(v.id("[CLS]"), token::cls);
  EXPECT_EQ(v.id("[SEP]"), token::sep);
  EXPECT_EQ(v.id("[M_s]"), token::mention_start);
  EXPECT_EQ(v.id("[M_e]"), token::mention_end);
  EXPECT_EQ(v.id("[MASK]"), token::mask);
  EXPECT_EQ(v.id("[UNK]"), token::unk);
  EXPECT_EQ(v.id("[PAD]"), token::pad);
  EXPECT_EQ(v.id("nothing"), token::unk);
}

TEST(Vocabulary, FrequencyCutoffAndBijection) {
  MentionStore s;
  s.add(example({"a", "b"}, "m", {"a"}));
  s.add(example({"c"}, "m", {}));
  const auto v = Vocabulary::build(s, 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("m"));
  EXPECT_FALSE(v.contains("b"));
  for (TokenId i = 0; i < static_cast<TokenId>(v.size()); ++i) EXPECT_EQ(v.id(v.token(i)), i);
}

TEST(Vocabulary, CatalogReferenceTokensIncluded) {
  Entity e{"A", "n", {"rare alias", "other"}, "B1.2", "Gene", {}};
  EntityCatalog c({e});
  const auto v = Vocabulary::build(MentionStore{}, 2, &c);
  EXPECT_TRUE(v.contains("rare"));
  EXPECT_TRUE(v.contains("B1.2"));
  EXPECT_TRUE(v.contains(";"));
}

TEST(Vocabulary, JsonlRoundTripAndValidation) {
  const auto v = vocab_for({example({"x", "y"}, "z", {})});
  EXPECT_EQ(Vocabulary::parse(v.serialize()), v);
  EXPECT_THROW(Vocabulary::parse("{\"id\":0,\"token\":\"[SEP]\"}\n"), DataError);
}

TEST(TokenizeMention, EmptyContexts) {
  const auto x = example({}, "m", {});
  const auto v = vocab_for({x});
  const auto t = tokenize_mention(x, v, 128);
  EXPECT_EQ(t, (TokenSequence{token::cls, token::mention_start, v.id("m"), token::mention_end, token::sep}));
}

TEST(TokenizeMention, TemplateOrder) {
  const auto x = example({"a"}, "x y", {"b"});
  const auto v = vocab_for({x});
  EXPECT_EQ(tokenize_mention(x, v, 128), (TokenSequence{token::cls, v.id("a"), token::mention_start, v.id("x"), v.id("y"),
                                                        token::mention_end, v.id("b"), token::sep}));
}

TEST(TokenizeMention, TrimsOuterContextToHandOracle) {
  const auto x = example(seq("l", 40), "m", seq("r", 40));
  const auto v = vocab_for({x});
  const auto t = tokenize_mention(x, v, 32);
  // Budget 32 - 5 = 27 context tokens: longest side trimmed first, left on ties,
  // which leaves 13 on the left (l27..l39) and 14 on the right (r0..r13).
  TokenSequence expected = {token::cls};
  for (int i = 27; i < 40; ++i) expected.push_back(v.id("l" + std::to_string(i)));
  expected.insert(expected.end(), {token::mention_start, v.id("m"), token::mention_end});
  for (int i = 0; i < 14; ++i) expected.push_back(v.id("r" + std::to_string(i)));
  expected.push_back(token::sep);
  EXPECT_EQ(t, expected);
}

TEST(TokenizeMention, SkeletonTooLong) {
  const auto x = example({}, "a b c d e", {});
  EXPECT_THROW(tokenize_mention(x, vocab_for({x}), 8), DataError);
  EXPECT_NO_THROW(tokenize_mention(x, vocab_for({x}), 9));
}

TEST(TokenizeMention, OutOfVocabularyMapsToUnk) {
  const auto t = tokenize_mention(example({"zzz"}, "m", {}), Vocabulary{}, 16);
  EXPECT_EQ(t[1], token::unk);
}

TEST(TokenizeReference, TruncatesWithClosingSep) {
  Entity e{"A", "n", {"a b c d e f g h i j"}, "S", "T", {}};
  const auto t = tokenize_reference(e, Vocabulary{}, 8);
  ASSERT_EQ(t.size(), 8u);
  EXPECT_EQ(t.front(), token::cls);
  EXPECT_EQ(t.back(), token::sep);
}

TEST(MaskAugmentation, ProbabilityExtremes) {
  const TokenSequence s = {token::cls, 9, token::mention_start, 10, 11, token::mention_end, 12, token::sep};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(apply_mask_augmentation(s, 0.0, rng), s);
  const auto masked = apply_mask_augmentation(s, 1.0, rng);
  EXPECT_EQ(masked, (TokenSequence{token::cls, 9, token::mention_start, token::mask, token::mask, token::mention_end, 12,
                                   token::sep}));
}

TEST(MaskAugmentation, RateAndAllOrNothing) {
  const TokenSequence s = {token::cls, token::mention_start, 10, 11, 12, token::mention_end, token::sep};
  Rng rng(2);
  int masked = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto out = apply_mask_augmentation(s, 0.2, rng);
    const int m = static_cast<int>(std::count(out.begin(), out.end(), token::mask));
    ASSERT_TRUE(m == 0 || m == 3);
    masked += m == 3;
  }
  EXPECT_NEAR(static_cast<double>(masked) / n, 0.2, 0.02);
}

TEST(MaskAugmentation, RequiresMarkers) {
  Rng rng(0);
  EXPECT_THROW(apply_mask_augmentation({token::cls, token::sep}, 0.5, rng), DataError);
}

TEST(ReplacementAugmentation, NoAliasesIsIdentity) {
  EntityCatalog c({Entity{"E", "tumor", {}, {}, {}, {}}});
  Rng rng(0);
  const auto x = example({"a"}, "tumor", {"b"});
  for (int i = 0; i < 20; ++i) EXPECT_EQ(apply_replacement_augmentation(x, c, 1.0, rng), x);
}

TEST(ReplacementAugmentation, SwapsToAliasKeepingContext) {
  EntityCatalog c({Entity{"E", "tumour", {"tumor", "neoplasm"}, {}, {}, {}}});
  Rng rng(0);
  const auto x = example({"a"}, "tumor", {"b"});
  for (int i = 0; i < 20; ++i) {
    const auto y = apply_replacement_augmentation(x, c, 1.0, rng);
    EXPECT_EQ(y.mention, "neoplasm");
    EXPECT_EQ(y.entity_id, x.entity_id);
    EXPECT_EQ(y.ctx_l, x.ctx_l);
    EXPECT_EQ(y.ctx_r, x.ctx_r);
  }
}
