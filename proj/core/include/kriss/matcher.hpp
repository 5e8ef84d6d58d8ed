#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kriss {

/// A pattern occurrence. Offsets are byte offsets into the UTF-8 text,
/// half-open: text.substr(start, end - start) == surface.
struct SurfaceMatch {
  std::size_t start = 0;
  std::size_t end = 0;
  std::uint32_t pattern = 0;

  bool operator==(const SurfaceMatch&) const = default;
  auto operator<=>(const SurfaceMatch&) const = default;
};

/// Resolved match handed to mention generation.
struct LinkedSpan {
  std::string surface;
  std::string entity_id;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const LinkedSpan&) const = default;
};

/// Aho-Corasick automaton over byte strings, case preserved. Immutable once
/// built and safe to share across threads.
class Matcher {
 public:
  /// Throws DataError on an empty surface or an empty map.
  explicit Matcher(const std::map<std::string, std::string>& surfaces);

  std::size_t pattern_count() const { return patterns_.size(); }
  const std::string& pattern(std::uint32_t i) const { return patterns_[i]; }
  const std::string& entity_of(std::uint32_t i) const { return entities_[i]; }

  /// Every occurrence of every pattern, sorted by (start, end, pattern).
  /// No boundary filtering, overlaps kept.
  std::vector<SurfaceMatch> find_all(std::string_view text) const;

  /// Non-overlapping, word-bounded matches chosen leftmost-longest.
  std::vector<LinkedSpan> scan(std::string_view text) const;

 private:
  struct Node {
    std::vector<std::pair<unsigned char, std::int32_t>> next;  // sorted by byte
    std::int32_t fail = 0;
    std::int32_t dict = -1;      // nearest proper suffix node that ends a pattern
    std::int32_t pattern = -1;   // pattern ending exactly here
    std::uint32_t depth = 0;
  };

  std::int32_t child(std::int32_t node, unsigned char c) const;
  std::int32_t step(std::int32_t node, unsigned char c) const;

  std::vector<Node> nodes_;
  std::vector<std::string> patterns_;
  std::vector<std::string> entities_;
};

/// True when the byte is part of a word: ASCII alphanumerics and any byte of
/// a multi-byte UTF-8 sequence.
bool is_word_byte(unsigned char c);

/// Adjacent bytes outside [start, end) are absent or non-word.
bool on_word_boundary(std::string_view text, std::size_t start, std::size_t end);

/// Keeps boundary-respecting matches, then selects leftmost-longest without overlap.
std::vector<SurfaceMatch> resolve_leftmost_longest(std::string_view text, std::vector<SurfaceMatch> matches);

}  // namespace kriss
