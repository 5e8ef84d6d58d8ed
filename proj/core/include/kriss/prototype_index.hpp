#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/transformer.hpp"

namespace kriss {

/// Per-entity prototype mentions before encoding. Entities of the catalog
/// without mentions are present with empty lists.
struct PrototypeStore {
  std::size_t per_entity_cap = 0;
  std::map<std::string, std::vector<MentionExample>> by_entity;

  std::size_t prototype_count() const;
};

/// min(k, available) mentions per entity drawn uniformly without replacement.
PrototypeStore sample_prototypes(const MentionStore& store, const EntityCatalog& catalog, std::size_t k,
                                 std::uint64_t seed);

struct PrototypeMeta {
  std::string entity_id;
  MentionExample example;

  MentionSource source() const { return example.source; }
};

/// Exact maximum-inner-product index over prototype vectors (float32), with an
/// optional per-entity reference-vector table. Immutable between explicit
/// updates; queries may run concurrently.
class VectorIndex {
 public:
  VectorIndex() = default;
  explicit VectorIndex(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return meta_.size(); }
  bool empty() const { return meta_.empty() && references_.empty(); }

  void add(PrototypeMeta meta, std::span<const float> vec);
  void set_reference(const std::string& entity_id, std::span<const float> vec);

  std::span<const float> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }
  const PrototypeMeta& meta(std::size_t i) const { return meta_[i]; }

  bool has_references() const { return !references_.empty(); }
  /// Empty span when the entity has no reference vector.
  std::span<const float> reference(const std::string& entity_id) const;
  const std::map<std::string, std::vector<float>>& references() const { return references_; }

  /// Top-k rows by inner product, descending, ties by row. Empty for an empty index.
  std::vector<std::pair<std::size_t, double>> search(std::span<const float> query, std::size_t k) const;

  /// Writes vectors.bin / vectors.jsonl, and references.bin / references.jsonl
  /// when a reference table is present, into `dir`.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

  std::string serialize_vectors() const;
  std::string serialize_vector_sidecar() const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> rows_;
  std::vector<PrototypeMeta> meta_;
  std::map<std::string, std::vector<float>> references_;
};

// vectors.bin: "KRSV", u32 version, u32 dim, u64 count, count * dim float32 (LE).
std::string encode_vector_file(std::size_t dim, std::span<const float> rows);
std::vector<float> decode_vector_file(std::string_view bytes, std::size_t& dim);

std::vector<float> to_float(const Vector& v);
double dot(std::span<const float> a, std::span<const float> b);

struct Candidate {
  std::string entity_id;
  double score = 0.0;
  std::optional<std::size_t> prototype;  // best prototype row; empty for the reference-only fallback

  bool operator==(const Candidate&) const = default;
};

struct LinkResult {
  std::vector<Candidate> candidates;  // descending score, ties by ascending entity_id
  std::size_t pool_size = 0;          // entities that were scored

  bool operator==(const LinkResult&) const = default;
};

struct LinkOptions {
  std::size_t top_k = 100;
  bool fusion = false;
  bool cosine = false;
  const std::set<std::string>* domain = nullptr;  // restrict candidates when set
  const MentionExample* exclude = nullptr;        // skip prototypes at this exact span
};

/// Entity score = max over its prototypes of q.c_p; with fusion q.c_p + q.r_e,
/// and q.r_e for entities that only have a reference vector.
/// Throws DataError on an empty index, top_k == 0, a dimension mismatch, or
/// fusion without a reference table.
LinkResult link(const VectorIndex& index, std::span<const float> query, const LinkOptions& options);
LinkResult link_with_references(const VectorIndex& index, std::span<const float> query, LinkOptions options);

/// Encodes every prototype with the mention encoder and, when requested, every
/// catalog entity's reference text with the reference encoder.
VectorIndex build_index(const PrototypeStore& protos, const BiEncoder& model, const EntityCatalog& catalog,
                        bool with_references);

/// New index with the gold mentions appended as prototypes. Throws DataError
/// for a gold mention whose entity is not in the catalog.
VectorIndex add_gold_prototypes(const VectorIndex& index, const MentionStore& gold, const BiEncoder& model,
                                const EntityCatalog& catalog);

/// A query with its linking output, as written to results.jsonl.
struct LinkRecord {
  MentionExample query;
  LinkResult result;
};

std::string serialize_link_records(const std::vector<LinkRecord>& records);
std::vector<LinkRecord> parse_link_records(std::string_view jsonl);
std::vector<LinkRecord> load_link_records(const std::filesystem::path& path);

}  // namespace kriss
