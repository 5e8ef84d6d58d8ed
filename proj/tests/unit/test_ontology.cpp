#include <gtest/gtest.h>

#include <map>
#include <set>

#include "kriss/error.hpp"
#include "kriss/ontology.hpp"
#include "kriss/rng.hpp"

using namespace kriss;

namespace {

Entity make(std::string id, std::string name, std::vector<std::string> aliases = {}) {
  Entity e;
  e.id = std::move(id);
  e.name = std::move(name);
  e.aliases = std::move(aliases);
  return e;
}

}  // namespace

TEST(Catalog, LoadsSingleRecord) {
  const auto c = parse_catalog(R"({"id":"C0037813","name":"Mass Spectrometry"})" "\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.at("C0037813").name, "Mass Spectrometry");
  EXPECT_TRUE(c.at("C0037813").aliases.empty());
}

TEST(Catalog, EmptyFileIsEmptyCatalog) { EXPECT_EQ(parse_catalog("").size(), 0u); }

TEST(Catalog, DuplicateIdIsRejectedWithId) {
  try {
    parse_catalog("{\"id\":\"X1\",\"name\":\"a\"}\n{\"id\":\"X1\",\"name\":\"b\"}\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("X1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Catalog, ParseErrorCarriesLineNumber) {
  try {
    parse_catalog("{\"id\":\"A\",\"name\":\"a\"}\n{not json\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Catalog, MissingRequiredFieldAndUnknownKey) {
  EXPECT_THROW(parse_catalog("{\"id\":\"A\"}\n"), DataError);
  EXPECT_THROW(parse_catalog("{\"name\":\"a\"}\n"), DataError);
  EXPECT_THROW(parse_catalog("{\"id\":\"A\",\"name\":\"a\",\"colour\":\"red\"}\n"), DataError);
}

TEST(Catalog, EntityInvariants) {
  EXPECT_THROW(validate_entity(make("", "n")), DataError);
  EXPECT_THROW(validate_entity(make("A", "")), DataError);
  EXPECT_THROW(validate_entity(make("A", "n", {"n"})), DataError);
  EXPECT_THROW(validate_entity(make("A", "n", {"x", "x"})), DataError);
  EXPECT_NO_THROW(validate_entity(make("A", "n", {"x", "y"})));
}

TEST(Catalog, UnknownIdIsAnError) {
  EntityCatalog c({make("A", "a")});
  EXPECT_THROW(c.at("B"), DataError);
  EXPECT_EQ(c.find("B"), nullptr);
}

TEST(Catalog, RoundTripIsByteExact) {
  const std::string text =
      "{\"id\":\"C1\",\"name\":\"ER gene\",\"aliases\":[\"ER\",\"estrogen receptor\"],\"stn\":\"A1.2.3.5\","
      "\"semtype\":\"Gene or Genome\",\"description\":\"a receptor\"}\n"
      "{\"id\":\"C2\",\"name\":\"Emergency Room\",\"aliases\":[\"ER\"]}\n"
      "{\"id\":\"C3\",\"name\":\"caf\\u00e9 \\\"q\\\"\",\"aliases\":[]}\n";
  const auto c = parse_catalog(text);
  const std::string once = serialize_catalog(c);
  EXPECT_EQ(serialize_catalog(parse_catalog(once)), once);
  EXPECT_EQ(parse_catalog(once).entities(), c.entities());
}

TEST(SurfaceIndex, SharedAliasIsAmbiguous) {
  EntityCatalog c({make("A", "ER gene", {"ER"}), make("B", "Emergency Room", {"ER"})});
  const auto idx = build_surface_index(c, true);
  EXPECT_EQ(idx.lookup("ER"), (std::vector<std::string>{"A", "B"}));
  EXPECT_TRUE(idx.ambiguous("ER"));
  EXPECT_FALSE(idx.ambiguous("ER gene"));
  EXPECT_TRUE(build_surface_index(c, false).lookup("ER").empty());
}

TEST(SurfaceIndex, SingleEntityNoAliases) {
  EntityCatalog c({make("A", "asthma", {"x"})});
  const auto idx = build_surface_index(c, false);
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_EQ(idx.lookup("asthma"), std::vector<std::string>{"A"});
}

TEST(SurfaceIndex, CaseIsPreserved) {
  EntityCatalog c({make("A", "PDF"), make("B", "pdf")});
  const auto idx = build_surface_index(c, true);
  EXPECT_EQ(idx.size(), 2u);
  EXPECT_FALSE(idx.ambiguous("PDF"));
  const SurfaceIndex folded(c, true, SurfaceKey::folded);
  EXPECT_TRUE(folded.ambiguous("Pdf"));
}

TEST(SurfaceIndex, NameOfOneEntityEqualToAliasOfAnotherIsAmbiguous) {
  EntityCatalog c({make("A", "MS", {"Mass Spectrometry"}), make("B", "Multiple Sclerosis", {"MS"})});
  const auto u = unambiguous_surfaces(build_surface_index(c, true));
  EXPECT_FALSE(u.contains("MS"));
  EXPECT_EQ(u.at("Mass Spectrometry"), "A");
}

TEST(SurfaceIndex, UnambiguousSurfacesExample) {
  EntityCatalog c({make("e1", "Mass Spectrometry", {"MS"}), make("e2", "Multiple Sclerosis", {"MS"})});
  const auto u = unambiguous_surfaces(build_surface_index(c, true));
  EXPECT_EQ(u, (std::map<std::string, std::string>{{"Mass Spectrometry", "e1"}, {"Multiple Sclerosis", "e2"}}));
}

TEST(SurfaceIndex, AllAmbiguousGivesEmptyMap) {
  EntityCatalog c({make("A", "x"), make("B", "x")});
  EXPECT_TRUE(unambiguous_surfaces(build_surface_index(c, true)).empty());
}

TEST(SurfaceIndexProperty, UnambiguousFilterMatchesBruteForceCount) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    std::vector<Entity> ents;
    std::vector<std::string> shared;
    for (int s = 0; s < 10; ++s) shared.push_back("shared" + std::to_string(s));
    for (int i = 0; i < 100; ++i) {
      Entity e = make("E" + std::to_string(i), "name" + std::to_string(i));
      if (bernoulli(rng, 0.3)) e.aliases.push_back(shared[uniform_index(rng, shared.size())]);
      if (bernoulli(rng, 0.5)) e.aliases.push_back("own" + std::to_string(i));
      ents.push_back(e);
    }
    EntityCatalog c(ents);
    const bool aliases = seed % 2 == 0;
    std::map<std::string, std::set<std::string>> brute;
    for (const auto& e : ents) {
      brute[e.name].insert(e.id);
      if (aliases) {
        for (const auto& a : e.aliases) brute[a].insert(e.id);
      }
    }
    std::size_t expected = 0;
    for (const auto& [s, ids] : brute) expected += ids.size() == 1;
    const auto u = unambiguous_surfaces(build_surface_index(c, aliases));
    EXPECT_EQ(u.size(), expected);
    for (const auto& [s, id] : u) EXPECT_EQ(brute.at(s), std::set<std::string>{id});
  }
}

TEST(ReferenceText, FullEntityLayout) {
  Entity e = make("C1", "ER gene", {"ER", "estrogen receptor"});
  e.stn = "A1.2.3.5";
  e.semtype = "Gene or Genome";
  EXPECT_EQ(entity_reference_text(e, false), "[CLS] A1.2.3.5 [SEP] Gene or Genome [SEP] ER ; estrogen receptor [SEP]");
}

TEST(ReferenceText, EmptyFieldsKeepSeparators) {
  EXPECT_EQ(entity_reference_text(make("A", "n"), false), "[CLS] [SEP] [SEP] [SEP]");
}

TEST(ReferenceText, DescriptionAppendedOnlyWhenRequested) {
  Entity e = make("A", "n", {"x"});
  e.description = "a short gloss";
  const std::string base = entity_reference_text(e, false);
  EXPECT_EQ(base, "[CLS] [SEP] [SEP] x [SEP]");
  EXPECT_EQ(entity_reference_text(e, true), base + " a short gloss [SEP]");
}

TEST(ReferenceText, InjectiveOverFieldsWithFixedDelimiter) {
  Entity a = make("A", "n", {"x", "y"});
  Entity b = make("B", "n", {"x ; y"});
  EXPECT_THROW(validate_entity(b), DataError);  // the delimiter cannot appear inside an alias
  Entity c = make("C", "n", {"x"});
  c.stn = "B1";
  Entity d = make("D", "n", {"x"});
  d.semtype = "B1";
  EXPECT_NE(entity_reference_text(a, false), entity_reference_text(c, false));
  EXPECT_NE(entity_reference_text(c, false), entity_reference_text(d, false));
}
