#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kriss/matcher.hpp"

namespace kriss {

class EntityCatalog;

struct Document {
  std::string doc_id;
  std::string text;

  bool operator==(const Document&) const = default;
};

enum class MentionSource { self_supervised, gold };

std::string_view to_string(MentionSource s);
MentionSource parse_mention_source(std::string_view s);

/// One occurrence of an entity surface form with its whitespace-token context.
/// start_char/end_char are byte offsets into the source document.
struct MentionExample {
  std::string doc_id;
  std::string entity_id;
  std::string mention;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::vector<std::string> ctx_l;
  std::vector<std::string> ctx_r;
  MentionSource source = MentionSource::self_supervised;

  bool operator==(const MentionExample&) const = default;
};

/// Splits on ASCII whitespace and the Unicode space separators
/// (U+0085, U+00A0, U+1680, U+2000..U+200A, U+2028, U+2029, U+202F, U+205F, U+3000).
std::vector<std::string> whitespace_tokens(std::string_view text);

/// Up to window/2 tokens on each side of [start, end), truncated at the
/// document edges. Unused budget on one side is not moved to the other.
std::pair<std::vector<std::string>, std::vector<std::string>> extract_context(std::string_view text, std::size_t start,
                                                                              std::size_t end, std::size_t window);

/// Append-only mention collection with per-entity counts.
class MentionStore {
 public:
  MentionStore() = default;
  explicit MentionStore(std::vector<MentionExample> examples);

  void add(MentionExample m);
  void append(const MentionStore& other);

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const std::vector<MentionExample>& examples() const { return examples_; }
  const MentionExample& operator[](std::size_t i) const { return examples_[i]; }

  std::size_t count(const std::string& entity_id) const;
  const std::map<std::string, std::size_t>& counts() const { return counts_; }

  /// Indices of examples per entity, in storage order.
  std::map<std::string, std::vector<std::size_t>> by_entity() const;

  /// Sorts by (doc_id, start_char, end_char, entity_id).
  void canonicalize();

 private:
  std::vector<MentionExample> examples_;
  std::map<std::string, std::size_t> counts_;
};

// mentions.jsonl
std::string serialize_mentions(const MentionStore& store);
MentionStore parse_mentions(std::string_view jsonl);
MentionStore load_mentions(const std::filesystem::path& path);
void save_mentions(const MentionStore& store, const std::filesystem::path& path);

/// Corpus input: a JSONL file of {"doc_id","text"} or a directory of .txt
/// files (doc_id = file stem). Returned sorted by doc_id.
std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus_jsonl(std::string_view jsonl);

struct GenerationReport {
  std::size_t documents = 0;
  std::size_t mentions = 0;
  std::size_t entities = 0;

  bool operator==(const GenerationReport&) const = default;
};

/// Scans every document, emits a self-supervised example per resolved match,
/// and leaves the store in canonical order.
GenerationReport generate_corpus(const Matcher& matcher, const std::vector<Document>& corpus, std::size_t window,
                                 MentionStore& store);

/// Keeps at most `cap` examples per entity, choosing by a hash of
/// (doc_id, start_char) so the result is independent of input order.
MentionStore cap_per_entity(const MentionStore& store, std::size_t cap);

/// Drops examples whose entity is not in the catalog.
MentionStore restrict_to_catalog(const MentionStore& store, const EntityCatalog& catalog);

}  // namespace kriss
