#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kriss {

class MentionStore;
class EntityCatalog;
struct MentionExample;
struct Entity;

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

namespace token {
inline constexpr TokenId cls = 0;
inline constexpr TokenId sep = 1;
inline constexpr TokenId mention_start = 2;
inline constexpr TokenId mention_end = 3;
inline constexpr TokenId mask = 4;
inline constexpr TokenId unk = 5;
inline constexpr TokenId pad = 6;
inline constexpr TokenId reserved_count = 7;
}  // namespace token

/// Token <-> id bijection. Ids 0..6 are the reserved markers
/// [CLS] [SEP] [M_s] [M_e] [MASK] [UNK] [PAD].
class Vocabulary {
 public:
  Vocabulary();

  /// Word tokens of the store's mentions and contexts with frequency >=
  /// min_freq, plus every token of the catalog's reference texts when a
  /// catalog is given. Ids are assigned in lexicographic token order.
  static Vocabulary build(const MentionStore& store, std::size_t min_freq, const EntityCatalog* catalog = nullptr);

  /// Adds a token if absent; returns its id.
  TokenId add(std::string_view tok);
  /// Id for a token, [UNK] when absent.
  TokenId id(std::string_view tok) const;
  bool contains(std::string_view tok) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  std::string serialize() const;
  static Vocabulary parse(std::string_view jsonl);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Mention and contexts converted to ids, before assembly.
struct MarkedTokens {
  TokenSequence left;
  TokenSequence mention;
  TokenSequence right;
};

MarkedTokens mark_tokens(const MentionExample& example, const Vocabulary& vocab);

/// "[CLS] ctx_l [M_s] mention [M_e] ctx_r [SEP]". When too long, context is
/// trimmed one token at a time from the outer end of whichever side is
/// currently longer (left first on ties). Throws DataError when the skeleton
/// "[CLS] [M_s] mention [M_e] [SEP]" alone exceeds max_len.
TokenSequence tokenize_mention(const MentionExample& example, const Vocabulary& vocab, std::size_t max_len);

/// Whitespace tokens of entity_reference_text, reserved markers mapped to
/// their ids. Truncated to max_len with a closing [SEP].
TokenSequence tokenize_reference(const Entity& entity, const Vocabulary& vocab, std::size_t max_len,
                                 bool include_description = false);

/// Shrinks the given context lists to `budget` total tokens. Each list is
/// paired with whether its outer end is the front. The currently longest list
/// loses its outermost token first; ties go to the earlier list.
void trim_contexts(std::span<TokenSequence*> lists, std::span<const bool> outer_is_front, std::size_t budget);

}  // namespace kriss
