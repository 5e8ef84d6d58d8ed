#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "kriss/error.hpp"
#include "kriss/reranker.hpp"
#include "kriss/rng.hpp"

using namespace kriss;

namespace {

Vocabulary words(std::initializer_list<const char*> ws) {
  Vocabulary v;
  for (const char* w : ws) v.add(w);
  return v;
}

MentionExample example(std::string mention, std::vector<std::string> l, std::vector<std::string> r,
                       std::string entity = "E") {
  return {"doc", std::move(entity), std::move(mention), 0, 1, std::move(l), std::move(r), MentionSource::self_supervised};
}

LinkResult candidates(std::initializer_list<const char*> ids) {
  LinkResult r;
  double s = 10.0;
  for (const char* id : ids) r.candidates.push_back({id, s--, std::nullopt});
  r.pool_size = r.candidates.size();
  return r;
}

}  // namespace

TEST(CrossInput, FollowsTemplate) {
  const auto v = words({"heart", "attack", "acute", "pain", "mi", "old"});
  const auto q = example("heart attack", {"acute"}, {"pain"});
  const auto c = example("mi", {"old"}, {});
  const auto seq = build_cross_input(q, c, v, 64);
  const TokenSequence want{token::cls,      v.id("acute"),      token::mention_start, v.id("heart"),
                           v.id("attack"),  token::mention_end, v.id("pain"),         token::sep,
                           v.id("old"),     token::mention_start, v.id("mi"),          token::mention_end,
                           token::sep};
  EXPECT_EQ(seq, want);
  EXPECT_EQ(std::count(seq.begin(), seq.end(), token::cls), 1);
  EXPECT_EQ(std::count(seq.begin(), seq.end(), token::mention_start), 2);
  EXPECT_EQ(std::count(seq.begin(), seq.end(), token::sep), 2);
}

TEST(CrossInput, TrimsLongestContextFromOuterEnd) {
  const auto v = words({"a", "b", "c", "d", "e", "f", "g", "h", "i", "q", "m"});
  const auto q = example("q", {"a", "b", "c", "d", "e"}, {"f"});
  const auto c = example("m", {"g", "h", "i"}, {});
  const auto seq = build_cross_input(q, c, v, 13);
  const TokenSequence want{token::cls, v.id("e"), token::mention_start, v.id("q"), token::mention_end,
                           v.id("f"),  token::sep, v.id("h"),          v.id("i"), token::mention_start,
                           v.id("m"),  token::mention_end, token::sep};
  EXPECT_EQ(seq, want);
  EXPECT_EQ(build_cross_input(q, c, v, 9).size(), 9u);
  EXPECT_THROW(build_cross_input(q, c, v, 8), DataError);
}

TEST(CrossInput, ReferenceCandidateDropsItsClsAndFits) {
  const auto w = fixture::small_world();
  const auto v = Vocabulary::build(w.mentions, 1, &w.world.catalog);
  const auto& q = w.mentions[0];
  const auto& e = w.world.catalog.at(q.entity_id);
  for (std::size_t max_len : {24u, 48u, 128u}) {
    const auto seq = build_cross_input(q, e, v, max_len);
    EXPECT_LE(seq.size(), max_len);
    EXPECT_EQ(std::count(seq.begin(), seq.end(), token::cls), 1);
    EXPECT_EQ(seq.front(), token::cls);
    EXPECT_EQ(seq.back(), token::sep);
  }
}

TEST(RerankScore, ZeroHeadGivesBias) {
  const auto v = words({"x"});
  auto m = RerankModel::from_encoder(v, EncoderParams::initialize(fixture::tiny_encoder(), v.size(), 1));
  EXPECT_EQ(m.head_weight.size(), 16);
  EXPECT_TRUE(m.head_weight.isZero(0.0));
  m.head_bias = 0.75;
  const auto seq = build_cross_input(example("x", {}, {}), example("x", {"x"}, {}), v, 32);
  EXPECT_EQ(rerank_score(seq, m), 0.75);
}

TEST(RerankCrossEntropy, ValuesAndErrors) {
  const std::vector<double> equal(8, 3.0);
  EXPECT_NEAR(rerank_cross_entropy(equal, 5), std::log(8.0), 1e-12);
  EXPECT_EQ(rerank_cross_entropy(std::vector<double>{4.0}, 0), 0.0);
  const std::vector<double> s{1.0, 2.0, 3.0};
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(rerank_cross_entropy(s, 1), -std::log(std::exp(2.0) / z), 1e-12);
  EXPECT_TRUE(std::isfinite(rerank_cross_entropy(std::vector<double>{1000.0, -1000.0}, 1)));
  EXPECT_THROW(rerank_cross_entropy(s, 3), DataError);
}

TEST(Rerank, OracleScorerPutsGoldFirstAndKeepsSet) {
  const auto q = example("m", {}, {}, "C");
  const PairScorer oracle = [](const MentionExample& query, const Candidate& c) {
    return c.entity_id == query.entity_id ? 1.0 : 0.0;
  };
  const auto in = candidates({"A", "B", "C", "D"});
  const auto out = rerank(in, q, oracle);
  ASSERT_EQ(out.candidates.size(), 4u);
  EXPECT_EQ(out.candidates[0].entity_id, "C");
  EXPECT_EQ(out.candidates[1].entity_id, "A");
  EXPECT_EQ(out.candidates[0].score, 1.0);
  EXPECT_EQ(out.pool_size, in.pool_size);
}

TEST(Rerank, DepthLimitsReorderingToTheHead) {
  const auto q = example("m", {}, {}, "D");
  const PairScorer oracle = [](const MentionExample& query, const Candidate& c) {
    return c.entity_id == query.entity_id ? 1.0 : 0.0;
  };
  const auto in = candidates({"A", "B", "C", "D"});
  const auto shallow = rerank(in, q, oracle, 2);
  EXPECT_EQ(shallow.candidates[0].entity_id, "A");
  EXPECT_EQ(shallow.candidates[0].score, 0.0);
  EXPECT_EQ(shallow.candidates[2], in.candidates[2]);
  EXPECT_EQ(shallow.candidates[3], in.candidates[3]);
  EXPECT_EQ(rerank(in, q, oracle, 4).candidates[0].entity_id, "D");
  EXPECT_EQ(rerank(in, q, oracle, 0), in);
}

TEST(Rerank, OutputIndependentOfInputOrder) {
  Rng rng(21);
  const auto q = example("m", {}, {}, "E3");
  const PairScorer scorer = [](const MentionExample&, const Candidate& c) {
    return static_cast<double>((c.entity_id.back() * 7) % 5);
  };
  for (int t = 0; t < 100; ++t) {
    LinkResult in;
    for (int i = 0; i < 10; ++i) in.candidates.push_back({"E" + std::to_string(i), uniform_unit(rng), std::nullopt});
    const auto base = rerank(in, q, scorer);
    shuffle(in.candidates, rng);
    EXPECT_EQ(rerank(in, q, scorer), base);
  }
}

TEST(TrainReranker, StartsAtLogKAndLearns) {
  const auto w = fixture::small_world();
  auto enc = fixture::tiny_encoder();
  const auto bi = BiEncoder::initialize(Vocabulary::build(w.mentions, 1, &w.world.catalog), enc);
  const auto protos = sample_prototypes(w.mentions, w.world.catalog, 4, 2);
  const auto idx = build_index(protos, bi, w.world.catalog, true);
  RerankConfig cfg;
  cfg.k = 4;
  cfg.steps = 40;
  cfg.lr = 5e-3;
  const auto r = train_reranker(cap_per_entity(w.mentions, 4), idx, bi, w.world.catalog, cfg);
  ASSERT_EQ(r.loss_log.size(), 40u);
  EXPECT_NEAR(r.loss_log.front(), std::log(4.0), 1e-9);
  EXPECT_GT(r.usable_queries, 0u);
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += r.loss_log[i];
    late += r.loss_log[30 + i];
  }
  EXPECT_LT(late, early);

  cfg.k = 1;
  cfg.steps = 2;
  const auto one = train_reranker(cap_per_entity(w.mentions, 2), idx, bi, w.world.catalog, cfg);
  for (double l : one.loss_log) EXPECT_EQ(l, 0.0);
}

TEST(TrainReranker, NoUsableQueriesIsAnError) {
  const auto w = fixture::small_world();
  const auto bi = BiEncoder::initialize(Vocabulary::build(w.mentions, 1, &w.world.catalog), fixture::tiny_encoder());
  VectorIndex idx(16);
  idx.add({"NOT_GOLD", w.mentions[0]}, std::vector<float>(16, 1.0f));
  MentionStore qs;
  qs.add(w.mentions[1]);
  EXPECT_THROW(train_reranker(qs, idx, bi, w.world.catalog, {}), DataError);
}

TEST(RerankerCheckpoint, SaveLoadRoundTrip) {
  const auto v = words({"x", "y"});
  auto m = RerankModel::from_encoder(v, EncoderParams::initialize(fixture::tiny_encoder(), v.size(), 3));
  Rng rng(5);
  for (Eigen::Index i = 0; i < m.head_weight.size(); ++i) m.head_weight(i) = uniform_float(rng, -1.0f, 1.0f);
  m.head_bias = 0.5;
  const auto path = fixture::scratch_dir("reranker") / "r.krsm";
  save_reranker(m, path);
  const auto back = load_reranker(path);
  EXPECT_EQ(back.vocab, m.vocab);
  EXPECT_EQ(back.head_weight, m.head_weight);
  EXPECT_EQ(back.head_bias, m.head_bias);
  const auto seq = build_cross_input(example("x", {"y"}, {}), example("y", {}, {"x"}), v, 32);
  EXPECT_EQ(rerank_score(seq, back), rerank_score(seq, m));
}
