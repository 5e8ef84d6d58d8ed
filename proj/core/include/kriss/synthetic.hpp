#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/rng.hpp"

namespace kriss {

// A small, fully controlled ontology and corpus. Every entity owns a private
// set of topic words; documents place one entity surface among a few of its
// topic words and shared filler. Pairs of entities additionally share one
// alias, so that surface is ambiguous and only context can resolve it.

struct SyntheticConfig {
  std::size_t entities = 50;
  std::size_t documents = 5000;
  std::size_t shared_alias_pairs = 5;
  std::size_t topic_words = 6;        // per entity, disjoint across entities
  std::size_t filler_words = 40;      // shared by all entities
  std::size_t heldout_per_entity = 4;
  std::size_t shared_test_per_entity = 6;
  std::size_t hard_test_per_entity = 4;
  std::size_t window = 64;
  std::uint64_t seed = kDefaultSeed;
};

struct SyntheticWorld {
  EntityCatalog catalog;
  std::vector<Document> corpus;   // unlabeled
  MentionStore heldout;           // unambiguous surfaces, unseen documents
  MentionStore shared_alias_test; // every mention uses a shared alias
  MentionStore ambiguous_test;    // shared-alias mentions mixed with heldout ones
  MentionStore hard_test;         // generic surface, entity signalled by filler signature
  MentionStore hard_gold;         // one gold mention per entity in the hard style
  std::set<std::string> domain;   // all entity ids
};

/// The surface used by every hard-split mention; it names no entity.
inline constexpr const char* kHardSurface = "this finding";

SyntheticWorld make_synthetic_world(const SyntheticConfig& config);

/// Writes entities.jsonl, corpus.jsonl, domain_entities.txt and one
/// <split>.jsonl per gold split into `dir`.
void write_synthetic_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace kriss
