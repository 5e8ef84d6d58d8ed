#include "kriss/matcher.hpp"

#include <algorithm>
#include <deque>

#include "kriss/error.hpp"

namespace kriss {

Matcher::Matcher(const std::map<std::string, std::string>& surfaces) {
  if (surfaces.empty()) throw DataError("matcher needs at least one surface");
  nodes_.emplace_back();
  for (const auto& [surface, entity] : surfaces) {
    if (surface.empty()) throw DataError("empty surface for entity " + entity);
    std::int32_t cur = 0;
    for (unsigned char c : surface) {
      std::int32_t nxt = child(cur, c);
      if (nxt < 0) {
        nxt = static_cast<std::int32_t>(nodes_.size());
        Node n;
        n.depth = nodes_[cur].depth + 1;
        nodes_.push_back(std::move(n));
        auto& edges = nodes_[cur].next;
        auto pos = std::lower_bound(edges.begin(), edges.end(), c,
                                    [](const auto& e, unsigned char b) { return e.first < b; });
        edges.insert(pos, {c, nxt});
      }
      cur = nxt;
    }
    nodes_[cur].pattern = static_cast<std::int32_t>(patterns_.size());
    patterns_.push_back(surface);
    entities_.push_back(entity);
  }

  // Breadth-first failure links.
  std::deque<std::int32_t> queue;
  for (const auto& [c, n] : nodes_[0].next) {
    nodes_[n].fail = 0;
    queue.push_back(n);
  }
  while (!queue.empty()) {
    const std::int32_t u = queue.front();
    queue.pop_front();
    for (const auto& [c, v] : nodes_[u].next) {
      std::int32_t f = nodes_[u].fail;
      while (f != 0 && child(f, c) < 0) f = nodes_[f].fail;
      std::int32_t target = child(f, c);
      nodes_[v].fail = (target >= 0 && target != v) ? target : 0;
      const Node& fn = nodes_[nodes_[v].fail];
      nodes_[v].dict = fn.pattern >= 0 ? nodes_[v].fail : fn.dict;
      queue.push_back(v);
    }
  }
}

std::int32_t Matcher::child(std::int32_t node, unsigned char c) const {
  const auto& edges = nodes_[node].next;
  auto pos = std::lower_bound(edges.begin(), edges.end(), c,
                              [](const auto& e, unsigned char b) { return e.first < b; });
  return (pos != edges.end() && pos->first == c) ? pos->second : -1;
}

std::int32_t Matcher::step(std::int32_t node, unsigned char c) const {
  while (true) {
    std::int32_t nxt = child(node, c);
    if (nxt >= 0) return nxt;
    if (node == 0) return 0;
    node = nodes_[node].fail;
  }
}

std::vector<SurfaceMatch> Matcher::find_all(std::string_view text) const {
  std::vector<SurfaceMatch> out;
  std::int32_t state = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    state = step(state, static_cast<unsigned char>(text[i]));
    for (std::int32_t n = nodes_[state].pattern >= 0 ? state : nodes_[state].dict; n >= 0; n = nodes_[n].dict) {
      const auto len = nodes_[n].depth;
      out.push_back({i + 1 - len, i + 1, static_cast<std::uint32_t>(nodes_[n].pattern)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LinkedSpan> Matcher::scan(std::string_view text) const {
  std::vector<LinkedSpan> out;
  for (const auto& m : resolve_leftmost_longest(text, find_all(text))) {
    out.push_back({patterns_[m.pattern], entities_[m.pattern], m.start, m.end});
  }
  return out;
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80;
}

bool on_word_boundary(std::string_view text, std::size_t start, std::size_t end) {
  if (start > 0 && is_word_byte(static_cast<unsigned char>(text[start - 1]))) return false;
  if (end < text.size() && is_word_byte(static_cast<unsigned char>(text[end]))) return false;
  return true;
}

std::vector<SurfaceMatch> resolve_leftmost_longest(std::string_view text, std::vector<SurfaceMatch> matches) {
  std::erase_if(matches, [&](const SurfaceMatch& m) { return !on_word_boundary(text, m.start, m.end); });
  std::sort(matches.begin(), matches.end(), [](const SurfaceMatch& a, const SurfaceMatch& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return a.pattern < b.pattern;
  });
  std::vector<SurfaceMatch> out;
  std::size_t covered = 0;
  for (const auto& m : matches) {
    if (!out.empty() && m.start < covered) continue;
    out.push_back(m);
    covered = m.end;
  }
  return out;
}

}  // namespace kriss
