#include "kriss/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "kriss/error.hpp"
#include "kriss/io.hpp"

namespace kriss {

namespace {

constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                   "br", "cl", "dr", "gr", "pl", "st", "tr"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ae", "io"};
constexpr const char* kTypes[] = {"Disease or Syndrome", "Pharmacologic Substance", "Gene or Genome",
                                  "Body Part", "Laboratory Procedure"};
constexpr const char* kHeads[] = {"syndrome", "disorder", "protein", "agent", "lesion"};

class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string next(std::size_t syllables) {
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[uniform_index(rng_, std::size(kOnsets))];
        w += kVowels[uniform_index(rng_, std::size(kVowels))];
      }
      w += kOnsets[uniform_index(rng_, 15)];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_ = {"this", "finding"};
};

struct Plan {
  std::vector<std::vector<std::string>> topics;      // per entity
  std::vector<std::string> filler;
  std::vector<std::vector<std::size_t>> signature;   // per entity, filler indices
  std::vector<std::vector<std::string>> own_surfaces;
  std::vector<std::string> shared_alias;             // per entity, "" when none
};

std::vector<std::string> pick(Rng& rng, const std::vector<std::string>& pool, std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i : sample_without_replacement(rng, pool.size(), k)) out.push_back(pool[i]);
  return out;
}

// Builds a document around `surface`; returns the text and the surface's byte span.
struct Built {
  std::string text;
  std::size_t start = 0, end = 0;
};

Built assemble(Rng& rng, std::vector<std::string> words, const std::string& surface) {
  shuffle(words, rng);
  const std::size_t at = uniform_index(rng, words.size() + 1);
  Built b;
  for (std::size_t i = 0; i <= words.size(); ++i) {
    if (i == at) {
      if (!b.text.empty()) b.text += ' ';
      b.start = b.text.size();
      b.text += surface;
      b.end = b.text.size();
    }
    if (i < words.size()) {
      if (!b.text.empty()) b.text += ' ';
      b.text += words[i];
    }
  }
  return b;
}

std::vector<std::string> context_words(Rng& rng, const Plan& plan, std::size_t e) {
  auto words = pick(rng, plan.topics[e], 3);
  for (auto& f : pick(rng, plan.filler, 2 + uniform_index(rng, 4))) words.push_back(std::move(f));
  return words;
}

MentionExample labeled(const std::string& doc_id, const std::string& entity_id, const Built& b,
                       std::size_t window) {
  MentionExample m;
  m.doc_id = doc_id;
  m.entity_id = entity_id;
  m.mention = b.text.substr(b.start, b.end - b.start);
  m.start_char = b.start;
  m.end_char = b.end;
  std::tie(m.ctx_l, m.ctx_r) = extract_context(b.text, b.start, b.end, window);
  m.source = MentionSource::gold;
  return m;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SyntheticConfig& config) {
  if (config.entities < 2 || config.shared_alias_pairs * 2 > config.entities || config.topic_words < 3 ||
      config.filler_words < 8) {
    throw UsageError("synthetic world configuration out of range");
  }
  Rng rng(derive_seed(config.seed, 100));
  WordFactory words(rng);
  Plan plan;
  std::vector<Entity> entities;

  for (std::size_t i = 0; i < config.filler_words; ++i) plan.filler.push_back(words.next(1));
  std::set<std::vector<std::size_t>> signatures;
  for (std::size_t e = 0; e < config.entities; ++e) {
    Entity ent;
    ent.id = numbered("SYN:", e);
    ent.name = words.next(3);
    ent.aliases = {words.next(2) + " " + kHeads[e % std::size(kHeads)], words.next(2)};
    const std::size_t type = e % std::size(kTypes);
    ent.semtype = kTypes[type];
    ent.stn = "B" + std::to_string(type + 1) + "." + std::to_string(e / std::size(kTypes) + 1);
    std::vector<std::string> topic;
    for (std::size_t t = 0; t < config.topic_words; ++t) topic.push_back(words.next(2));
    ent.description = "related to " + topic[0] + " and " + topic[1];
    plan.topics.push_back(std::move(topic));
    plan.own_surfaces.push_back({ent.name, ent.aliases[0], ent.aliases[1]});
    std::vector<std::size_t> sig;
    do {
      sig = sample_without_replacement(rng, config.filler_words, 3);
      std::sort(sig.begin(), sig.end());
    } while (!signatures.insert(sig).second);
    plan.signature.push_back(std::move(sig));
    plan.shared_alias.emplace_back();
    entities.push_back(std::move(ent));
  }
  for (std::size_t p = 0; p < config.shared_alias_pairs; ++p) {
    const std::string alias = words.next(1) + "x";
    for (std::size_t e : {2 * p, 2 * p + 1}) {
      entities[e].aliases.push_back(alias);
      plan.shared_alias[e] = alias;
    }
  }

  SyntheticWorld w;
  w.catalog = EntityCatalog(entities);
  for (const auto& e : entities) w.domain.insert(e.id);

  // Corpus: mostly unambiguous surfaces, sometimes the shared alias.
  for (std::size_t d = 0; d < config.documents; ++d) {
    const std::size_t e = uniform_index(rng, config.entities);
    const bool use_shared = !plan.shared_alias[e].empty() && bernoulli(rng, 0.15);
    const std::string& surface =
        use_shared ? plan.shared_alias[e] : plan.own_surfaces[e][uniform_index(rng, plan.own_surfaces[e].size())];
    Built b = assemble(rng, context_words(rng, plan, e), surface);
    w.corpus.push_back({numbered("doc", d), std::move(b.text)});
  }

  Rng test_rng(derive_seed(config.seed, 101));
  std::size_t serial = 0;
  for (std::size_t e = 0; e < config.entities; ++e) {
    const std::string& id = entities[e].id;
    for (std::size_t k = 0; k < config.heldout_per_entity; ++k) {
      const auto& s = plan.own_surfaces[e][k % plan.own_surfaces[e].size()];
      const Built b = assemble(test_rng, context_words(test_rng, plan, e), s);
      w.heldout.add(labeled(numbered("heldout", serial++), id, b, config.window));
    }
    if (!plan.shared_alias[e].empty()) {
      for (std::size_t k = 0; k < config.shared_test_per_entity; ++k) {
        const Built b = assemble(test_rng, context_words(test_rng, plan, e), plan.shared_alias[e]);
        w.shared_alias_test.add(labeled(numbered("shared", serial++), id, b, config.window));
      }
    }
    for (std::size_t k = 0; k <= config.hard_test_per_entity; ++k) {
      std::vector<std::string> ctx;
      for (std::size_t f : plan.signature[e]) ctx.push_back(plan.filler[f]);
      ctx.push_back(plan.filler[uniform_index(test_rng, plan.filler.size())]);
      const Built b = assemble(test_rng, std::move(ctx), kHardSurface);
      MentionExample m = labeled(numbered("hard", serial++), id, b, config.window);
      (k == 0 ? w.hard_gold : w.hard_test).add(std::move(m));
    }
  }
  w.ambiguous_test.append(w.shared_alias_test);
  const std::size_t extra = w.shared_alias_test.size() / 2;
  for (std::size_t i = 0; i < extra && i < w.heldout.size(); ++i) {
    w.ambiguous_test.add(w.heldout[(i * w.heldout.size()) / std::max<std::size_t>(extra, 1)]);
  }
  return w;
}

void write_synthetic_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  save_catalog(world.catalog, dir / "entities.jsonl");
  std::string corpus;
  for (const auto& d : world.corpus) {
    nlohmann::ordered_json j;
    j["doc_id"] = d.doc_id;
    j["text"] = d.text;
    corpus += j.dump() + "\n";
  }
  io::write_file(dir / "corpus.jsonl", corpus);
  std::string domain;
  for (const auto& id : world.domain) domain += id + "\n";
  io::write_file(dir / "domain_entities.txt", domain);
  save_mentions(world.heldout, dir / "heldout.jsonl");
  save_mentions(world.shared_alias_test, dir / "shared_alias_test.jsonl");
  save_mentions(world.ambiguous_test, dir / "ambiguous_test.jsonl");
  save_mentions(world.hard_test, dir / "hard_test.jsonl");
  save_mentions(world.hard_gold, dir / "hard_gold.jsonl");
}

}  // namespace kriss
