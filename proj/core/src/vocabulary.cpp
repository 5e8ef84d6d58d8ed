#include "kriss/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include <json.hpp>

#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"

namespace kriss {

namespace {
constexpr std::array<std::string_view, token::reserved_count> kReserved = {"[CLS]",  "[SEP]", "[M_s]", "[M_e]",
                                                                           "[MASK]", "[UNK]", "[PAD]"};
}

Vocabulary::Vocabulary() {
  for (auto r : kReserved) add(r);
}

TokenId Vocabulary::add(std::string_view tok) {
  auto it = ids_.find(std::string(tok));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(tok);
  ids_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::id(std::string_view tok) const {
  auto it = ids_.find(std::string(tok));
  return it == ids_.end() ? token::unk : it->second;
}

bool Vocabulary::contains(std::string_view tok) const { return ids_.count(std::string(tok)) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const MentionStore& store, std::size_t min_freq, const EntityCatalog* catalog) {
  std::map<std::string, std::size_t> freq;
  for (const auto& m : store.examples()) {
    for (const auto& t : m.ctx_l) ++freq[t];
    for (const auto& t : m.ctx_r) ++freq[t];
    for (const auto& t : whitespace_tokens(m.mention)) ++freq[t];
  }
  std::set<std::string> keep;
  for (const auto& [tok, n] : freq) {
    if (n >= min_freq) keep.insert(tok);
  }
  if (catalog != nullptr) {
    for (const auto& e : *catalog) {
      for (auto& t : whitespace_tokens(entity_reference_text(e, true))) keep.insert(std::move(t));
    }
  }
  Vocabulary v;
  for (const auto& tok : keep) v.add(tok);
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    nlohmann::ordered_json obj;
    obj["id"] = i;
    obj["token"] = tokens_[i];
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view jsonl) {
  Vocabulary v;
  io::for_each_line(jsonl, [&](std::string_view line, std::size_t line_no) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": " + err.what());
    }
    const auto id = obj.at("id").get<std::size_t>();
    const auto tok = obj.at("token").get<std::string>();
    if (id < token::reserved_count) {
      if (tok != kReserved[id]) throw DataError("vocabulary reassigns reserved id " + std::to_string(id));
      return;
    }
    if (id != v.size()) throw DataError("vocabulary ids must be dense and ordered (line " + std::to_string(line_no) + ")");
    if (v.contains(tok)) throw DataError("vocabulary repeats token '" + tok + "'");
    v.add(tok);
  });
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

MarkedTokens mark_tokens(const MentionExample& example, const Vocabulary& vocab) {
  MarkedTokens out;
  for (const auto& t : example.ctx_l) out.left.push_back(vocab.id(t));
  for (const auto& t : whitespace_tokens(example.mention)) out.mention.push_back(vocab.id(t));
  for (const auto& t : example.ctx_r) out.right.push_back(vocab.id(t));
  return out;
}

void trim_contexts(std::span<TokenSequence*> lists, std::span<const bool> outer_is_front, std::size_t budget) {
  std::size_t total = 0;
  for (auto* l : lists) total += l->size();
  while (total > budget) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < lists.size(); ++i) {
      if (lists[i]->size() > lists[pick]->size()) pick = i;
    }
    auto& l = *lists[pick];
    if (outer_is_front[pick]) {
      l.erase(l.begin());
    } else {
      l.pop_back();
    }
    --total;
  }
}

TokenSequence tokenize_mention(const MentionExample& example, const Vocabulary& vocab, std::size_t max_len) {
  MarkedTokens t = mark_tokens(example, vocab);
  const std::size_t skeleton = t.mention.size() + 4;
  if (skeleton > max_len) {
    throw DataError("mention '" + example.mention + "' needs " + std::to_string(skeleton) +
                    " tokens, more than max_len " + std::to_string(max_len));
  }
  std::array<TokenSequence*, 2> lists = {&t.left, &t.right};
  const std::array<bool, 2> outer = {true, false};
  trim_contexts(lists, outer, max_len - skeleton);

  TokenSequence seq;
  seq.reserve(skeleton + t.left.size() + t.right.size());
  seq.push_back(token::cls);
  seq.insert(seq.end(), t.left.begin(), t.left.end());
  seq.push_back(token::mention_start);
  seq.insert(seq.end(), t.mention.begin(), t.mention.end());
  seq.push_back(token::mention_end);
  seq.insert(seq.end(), t.right.begin(), t.right.end());
  seq.push_back(token::sep);
  return seq;
}

TokenSequence tokenize_reference(const Entity& entity, const Vocabulary& vocab, std::size_t max_len,
                                 bool include_description) {
  TokenSequence seq;
  for (const auto& t : whitespace_tokens(entity_reference_text(entity, include_description))) {
    seq.push_back(vocab.id(t));
  }
  if (seq.size() > max_len) {
    seq.resize(max_len);
    seq.back() = token::sep;
  }
  return seq;
}

}  // namespace kriss
