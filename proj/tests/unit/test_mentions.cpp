#include <gtest/gtest.h>

#include <filesystem>

#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/matcher.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/pipeline.hpp"
#include "kriss/rng.hpp"

using namespace kriss;
namespace fs = std::filesystem;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
  return s;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kriss_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Context, MentionAtStart) {
  const std::string text = "Asthma " + words(40);
  auto [l, r] = extract_context(text, 0, 6, 64);
  EXPECT_TRUE(l.empty());
  EXPECT_EQ(r.size(), 32u);
  EXPECT_EQ(r.front(), "w0");
}

TEST(Context, MentionMidDocument) {
  const std::string text = words(40, "l") + " Asthma " + words(40, "r");
  const auto start = text.find("Asthma");
  auto [l, r] = extract_context(text, start, start + 6, 64);
  EXPECT_EQ(l.size(), 32u);
  EXPECT_EQ(r.size(), 32u);
  EXPECT_EQ(l.back(), "l39");
  EXPECT_EQ(l.front(), "l8");
  EXPECT_EQ(r.front(), "r0");
}

TEST(Context, TenTokenDocument) {
  const std::string text = "a b c mild asthma d e f g h";
  const auto start = text.find("mild");
  auto [l, r] = extract_context(text, start, start + 11, 64);
  EXPECT_EQ(l.size() + r.size(), 10u - 2u);
}

TEST(Context, UnusedBudgetIsNotTransferred) {
  const std::string text = "x " + words(10);
  auto [l, r] = extract_context(text, 0, 1, 8);
  EXPECT_EQ(l.size(), 0u);
  EXPECT_EQ(r.size(), 4u);
}

TEST(Context, UnicodeWhitespaceSplits) {
  const std::string text = "a\xc2\xa0" "b\xe2\x80\x83" "X c";
  const auto start = text.find('X');
  auto [l, r] = extract_context(text, start, start + 1, 64);
  EXPECT_EQ(l, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(r, (std::vector<std::string>{"c"}));
}

TEST(Context, InvalidSpan) {
  EXPECT_THROW(extract_context("abc", 2, 1, 64), DataError);
  EXPECT_THROW(extract_context("abc", 1, 9, 64), DataError);
}

TEST(Generation, ZeroDocuments) {
  MentionStore store;
  const auto r = generate_corpus(Matcher(std::map<std::string, std::string>{{"x", "e"}}), {}, 64, store);
  EXPECT_EQ(r, (GenerationReport{0, 0, 0}));
}

TEST(Generation, PlantedMentionsAreRecoveredExactly) {
  Rng rng(3);
  const std::vector<std::string> surfaces = {"alpha protein", "beta", "gamma ray", "delta"};
  std::map<std::string, std::string> dict;
  for (std::size_t i = 0; i < surfaces.size(); ++i) dict[surfaces[i]] = "E" + std::to_string(i);
  std::vector<Document> docs;
  std::set<std::tuple<std::string, std::size_t, std::string>> planted;
  for (int d = 0; d < 100; ++d) {
    std::string text;
    const std::string id = "d" + std::to_string(1000 + d);
    for (int t = 0; t < 12; ++t) {
      if (!text.empty()) text += ' ';
      if (bernoulli(rng, 0.25)) {
        const auto k = uniform_index(rng, surfaces.size());
        planted.emplace(id, text.size(), "E" + std::to_string(k));
        text += surfaces[k];
      } else {
        text += "filler" + std::to_string(uniform_index(rng, 9));
      }
    }
    docs.push_back({id, text});
  }
  MentionStore store;
  const auto r = generate_corpus(Matcher(dict), docs, 64, store);
  std::set<std::tuple<std::string, std::size_t, std::string>> got;
  for (const auto& m : store.examples()) {
    got.emplace(m.doc_id, m.start_char, m.entity_id);
    const auto& text = std::find_if(docs.begin(), docs.end(), [&](const Document& d) { return d.doc_id == m.doc_id; })->text;
    EXPECT_EQ(text.substr(m.start_char, m.end_char - m.start_char), m.mention);
    EXPECT_LE(m.ctx_l.size() + m.ctx_r.size(), 64u);
    EXPECT_EQ(m.source, MentionSource::self_supervised);
  }
  EXPECT_EQ(got, planted);
  EXPECT_EQ(r.documents, 100u);
  EXPECT_EQ(r.mentions, planted.size());
  EXPECT_EQ(store.counts().size(), r.entities);
}

TEST(Generation, AmbiguousSurfacesNeverEmitted) {
  Entity a{"A", "ER gene", {"ER"}, {}, {}, {}};
  Entity b{"B", "Emergency Room", {"ER"}, {}, {}, {}};
  EntityCatalog c({a, b});
  MentionStore store;
  const auto r = generate_mentions(c, {{"d", "the ER was busy"}}, {64, true}, store);
  EXPECT_EQ(r.mentions, 0u);
}

TEST(Generation, DeterministicBytes) {
  std::vector<Document> docs = {{"b", "x y beta z"}, {"a", "beta beta"}};
  MentionStore s1, s2;
  generate_corpus(Matcher(std::map<std::string, std::string>{{"beta", "E"}}), docs, 4, s1);
  std::reverse(docs.begin(), docs.end());
  generate_corpus(Matcher(std::map<std::string, std::string>{{"beta", "E"}}), docs, 4, s2);
  EXPECT_EQ(serialize_mentions(s1), serialize_mentions(s2));
  EXPECT_EQ(s1[0].doc_id, "a");
}

TEST(MentionStore, CountsTrackExamples) {
  MentionStore s;
  MentionExample m;
  m.doc_id = "d";
  m.mention = "x";
  m.end_char = 1;
  for (int i = 0; i < 5; ++i) {
    m.entity_id = i < 3 ? "A" : "B";
    m.start_char = static_cast<std::size_t>(i);
    m.end_char = m.start_char + 1;
    s.add(m);
  }
  EXPECT_EQ(s.count("A"), 3u);
  EXPECT_EQ(s.count("B"), 2u);
  EXPECT_EQ(s.count("C"), 0u);
  EXPECT_EQ(s.by_entity().at("B"), (std::vector<std::size_t>{3, 4}));
}

TEST(MentionStore, JsonlRoundTripAndKeyOrder) {
  MentionStore s;
  s.add({"doc1", "E1", "mild asthma", 4, 15, {"a", "b"}, {"c"}, MentionSource::gold});
  const auto text = serialize_mentions(s);
  EXPECT_EQ(text,
            "{\"doc_id\":\"doc1\",\"entity_id\":\"E1\",\"mention\":\"mild asthma\",\"start_char\":4,\"end_char\":15,"
            "\"ctx_l\":[\"a\",\"b\"],\"ctx_r\":[\"c\"],\"source\":\"gold\"}\n");
  EXPECT_EQ(parse_mentions(text).examples(), s.examples());
  EXPECT_THROW(parse_mentions("{\"doc_id\":\"d\"}\n"), DataError);
}

TEST(MentionStore, CapIsDeterministicAndBounded) {
  MentionStore s;
  for (int i = 0; i < 20; ++i) s.add({"d" + std::to_string(i), i % 2 ? "A" : "B", "x", 0, 1, {}, {}, {}});
  const auto c1 = cap_per_entity(s, 3);
  MentionStore reversed;
  for (auto it = s.examples().rbegin(); it != s.examples().rend(); ++it) reversed.add(*it);
  const auto c2 = cap_per_entity(reversed, 3);
  EXPECT_EQ(c1.count("A"), 3u);
  EXPECT_EQ(c1.count("B"), 3u);
  auto key = [](const MentionStore& st) {
    std::set<std::string> k;
    for (const auto& m : st.examples()) k.insert(m.doc_id);
    return k;
  };
  EXPECT_EQ(key(c1), key(c2));
}

TEST(Corpus, DirectoryOfTextFiles) {
  const auto dir = scratch("corpus");
  io::write_file(dir / "b.txt", "second doc");
  io::write_file(dir / "a.txt", "first doc");
  io::write_file(dir / "skip.md", "ignored");
  const auto docs = load_corpus(dir);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].doc_id, "a");
  EXPECT_EQ(docs[1].text, "second doc");
}

TEST(Corpus, JsonlDuplicateIdRejected) {
  EXPECT_THROW(parse_corpus_jsonl("{\"doc_id\":\"a\",\"text\":\"x\"}\n{\"doc_id\":\"a\",\"text\":\"y\"}\n"), DataError);
}
