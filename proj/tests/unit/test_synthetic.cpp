#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kriss/evaluation.hpp"
#include "kriss/synthetic.hpp"

using namespace kriss;

namespace {

SyntheticConfig small_config(std::uint64_t seed = 5) {
  SyntheticConfig c;
  c.entities = 10;
  c.documents = 300;
  c.shared_alias_pairs = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = make_synthetic_world(small_config());
  const auto b = make_synthetic_world(small_config());
  const auto c = make_synthetic_world(small_config(6));
  EXPECT_EQ(serialize_catalog(a.catalog), serialize_catalog(b.catalog));
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(serialize_mentions(a.ambiguous_test), serialize_mentions(b.ambiguous_test));
  EXPECT_NE(serialize_catalog(a.catalog), serialize_catalog(c.catalog));
}

TEST(Synthetic, SplitsHaveTheAdvertisedSurfaces) {
  const auto cfg = small_config();
  const auto w = make_synthetic_world(cfg);
  ASSERT_EQ(w.catalog.size(), cfg.entities);
  EXPECT_EQ(w.corpus.size(), cfg.documents);
  EXPECT_EQ(w.domain.size(), cfg.entities);
  const SurfaceIndex surfaces(w.catalog, true);

  EXPECT_EQ(w.heldout.size(), cfg.entities * cfg.heldout_per_entity);
  for (const auto& m : w.heldout.examples()) {
    EXPECT_EQ(surfaces.lookup(m.mention), std::vector<std::string>{m.entity_id}) << m.mention;
  }
  EXPECT_EQ(w.shared_alias_test.size(), 2 * cfg.shared_alias_pairs * cfg.shared_test_per_entity);
  for (const auto& m : w.shared_alias_test.examples()) {
    const auto& ids = surfaces.lookup(m.mention);
    EXPECT_EQ(ids.size(), 2u);
    EXPECT_NE(std::find(ids.begin(), ids.end(), m.entity_id), ids.end());
  }
  EXPECT_EQ(w.hard_gold.size(), cfg.entities);
  EXPECT_EQ(w.hard_test.size(), cfg.entities * cfg.hard_test_per_entity);
  for (const auto& m : w.hard_test.examples()) {
    EXPECT_EQ(m.mention, kHardSurface);
    EXPECT_TRUE(surfaces.lookup(m.mention).empty());
    EXPECT_EQ(m.source, MentionSource::gold);
  }
}

TEST(Synthetic, AmbiguousSplitIsMostlyAmbiguous) {
  const auto w = make_synthetic_world(small_config());
  const auto p = ambiguity_partition(w.ambiguous_test, w.catalog);
  EXPECT_GE(static_cast<double>(p.ambiguous.size()) / static_cast<double>(w.ambiguous_test.size()), 0.5);
  EXPECT_FALSE(p.unambiguous.empty());
}

TEST(Synthetic, EveryEntityReceivesSelfSupervisedMentions) {
  const auto w = fixture::small_world();
  for (const auto& e : w.world.catalog) EXPECT_GE(w.mentions.count(e.id), 2u) << e.id;
}

TEST(Synthetic, WrittenWorldReloads) {
  const auto w = make_synthetic_world(small_config());
  const auto dir = fixture::scratch_dir("synthetic");
  write_synthetic_world(w, dir);
  EXPECT_EQ(serialize_catalog(load_catalog(dir / "entities.jsonl")), serialize_catalog(w.catalog));
  EXPECT_EQ(load_corpus(dir / "corpus.jsonl"), w.corpus);
  EXPECT_EQ(load_mentions(dir / "hard_gold.jsonl").examples(), w.hard_gold.examples());
  EXPECT_EQ(load_gold(dir / "heldout.jsonl", dir / "domain_entities.txt").domain, w.domain);
  for (const char* f : {"shared_alias_test.jsonl", "ambiguous_test.jsonl", "hard_test.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}
