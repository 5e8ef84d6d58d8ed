#include "kriss/mentions.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "json_codec.hpp"

#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/ontology.hpp"

namespace kriss {

std::string_view to_string(MentionSource s) {
  return s == MentionSource::gold ? "gold" : "self_supervised";
}

MentionSource parse_mention_source(std::string_view s) {
  if (s == "gold") return MentionSource::gold;
  if (s == "self_supervised") return MentionSource::self_supervised;
  throw DataError("unknown mention source '" + std::string(s) + "'");
}

namespace {

// Length in bytes of a whitespace code point starting at text[i], or 0.
std::size_t space_len(std::string_view text, std::size_t i) {
  const auto c = static_cast<unsigned char>(text[i]);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  auto byte = [&](std::size_t k) -> unsigned {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0u;
  };
  if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
  if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;
  if (c == 0xE2 && byte(1) == 0x80) {
    const unsigned b = byte(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
  }
  if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;
  if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;
  return 0;
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t tok_start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t w = space_len(text, i);
    if (w > 0) {
      if (tok_start != std::string_view::npos) {
        out.emplace_back(text.substr(tok_start, i - tok_start));
        tok_start = std::string_view::npos;
      }
      i += w;
    } else {
      if (tok_start == std::string_view::npos) tok_start = i;
      ++i;
    }
  }
  if (tok_start != std::string_view::npos) out.emplace_back(text.substr(tok_start));
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> extract_context(std::string_view text, std::size_t start,
                                                                              std::size_t end, std::size_t window) {
  if (start >= end || end > text.size()) {
    throw DataError("invalid span [" + std::to_string(start) + ", " + std::to_string(end) + ") for text of " +
                    std::to_string(text.size()) + " bytes");
  }
  const std::size_t half = window / 2;
  auto left = whitespace_tokens(text.substr(0, start));
  auto right = whitespace_tokens(text.substr(end));
  if (left.size() > half) left.erase(left.begin(), left.end() - static_cast<std::ptrdiff_t>(half));
  if (right.size() > half) right.resize(half);
  return {std::move(left), std::move(right)};
}

MentionStore::MentionStore(std::vector<MentionExample> examples) {
  examples_.reserve(examples.size());
  for (auto& m : examples) add(std::move(m));
}

void MentionStore::add(MentionExample m) {
  ++counts_[m.entity_id];
  examples_.push_back(std::move(m));
}

void MentionStore::append(const MentionStore& other) {
  for (const auto& m : other.examples()) add(m);
}

std::size_t MentionStore::count(const std::string& entity_id) const {
  auto it = counts_.find(entity_id);
  return it == counts_.end() ? 0 : it->second;
}

std::map<std::string, std::vector<std::size_t>> MentionStore::by_entity() const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < examples_.size(); ++i) out[examples_[i].entity_id].push_back(i);
  return out;
}

void MentionStore::canonicalize() {
  std::stable_sort(examples_.begin(), examples_.end(), [](const MentionExample& a, const MentionExample& b) {
    return std::tie(a.doc_id, a.start_char, a.end_char, a.entity_id) <
           std::tie(b.doc_id, b.start_char, b.end_char, b.entity_id);
  });
}

namespace detail {

ojson mention_to_json(const MentionExample& m) {
  ojson obj;
  obj["doc_id"] = m.doc_id;
  obj["entity_id"] = m.entity_id;
  obj["mention"] = m.mention;
  obj["start_char"] = m.start_char;
  obj["end_char"] = m.end_char;
  obj["ctx_l"] = m.ctx_l;
  obj["ctx_r"] = m.ctx_r;
  obj["source"] = to_string(m.source);
  return obj;
}

namespace {

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(where + ": bad type for field '" + key + "'");
  }
}

}  // namespace

MentionExample mention_from_json(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
  MentionExample m;
  m.doc_id = required<std::string>(obj, "doc_id", where);
  m.entity_id = required<std::string>(obj, "entity_id", where);
  m.mention = required<std::string>(obj, "mention", where);
  m.start_char = required<std::size_t>(obj, "start_char", where);
  m.end_char = required<std::size_t>(obj, "end_char", where);
  m.ctx_l = required<std::vector<std::string>>(obj, "ctx_l", where);
  m.ctx_r = required<std::vector<std::string>>(obj, "ctx_r", where);
  m.source = obj.contains("source") ? parse_mention_source(required<std::string>(obj, "source", where))
                                    : MentionSource::self_supervised;
  if (m.mention.empty()) throw DataError(where + ": empty mention");
  if (m.end_char < m.start_char) throw DataError(where + ": end_char < start_char");
  return m;
}

nlohmann::json parse_json_line(std::string_view line, std::size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw DataError("line " + std::to_string(line_no) + ": parse error: " + err.what());
  }
}

}  // namespace detail

using detail::mention_from_json;
using detail::mention_to_json;
using detail::parse_json_line;

std::string serialize_mentions(const MentionStore& store) {
  std::string out;
  for (const auto& m : store.examples()) {
    out += mention_to_json(m).dump();
    out += '\n';
  }
  return out;
}

MentionStore parse_mentions(std::string_view jsonl) {
  MentionStore store;
  io::for_each_line(jsonl, [&](std::string_view line, std::size_t line_no) {
    store.add(mention_from_json(parse_json_line(line, line_no), "line " + std::to_string(line_no)));
  });
  return store;
}

MentionStore load_mentions(const std::filesystem::path& path) {
  try {
    return parse_mentions(io::read_file(path));
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

void save_mentions(const MentionStore& store, const std::filesystem::path& path) {
  io::write_file(path, serialize_mentions(store));
}

std::vector<Document> parse_corpus_jsonl(std::string_view jsonl) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  io::for_each_line(jsonl, [&](std::string_view line, std::size_t line_no) {
    const auto obj = parse_json_line(line, line_no);
    const std::string where = "line " + std::to_string(line_no);
    if (!obj.is_object() || !obj.contains("doc_id") || !obj.contains("text") || !obj["doc_id"].is_string() ||
        !obj["text"].is_string()) {
      throw DataError(where + ": expected {\"doc_id\": string, \"text\": string}");
    }
    auto id = obj["doc_id"].get<std::string>();
    if (!seen.insert(id).second) throw DataError(where + ": duplicate doc_id " + id);
    docs.push_back({std::move(id), obj["text"].get<std::string>()});
  });
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<Document> docs;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        docs.push_back({entry.path().stem().string(), io::read_file(entry.path())});
      }
    }
  } else {
    try {
      docs = parse_corpus_jsonl(io::read_file(path));
    } catch (const DataError& err) {
      throw DataError(path.string() + ": " + err.what());
    }
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].doc_id == docs[i - 1].doc_id) throw DataError("duplicate doc_id " + docs[i].doc_id);
  }
  return docs;
}

GenerationReport generate_corpus(const Matcher& matcher, const std::vector<Document>& corpus, std::size_t window,
                                 MentionStore& store) {
  GenerationReport report;
  std::set<std::string> entities;
  for (const auto& doc : corpus) {
    ++report.documents;
    for (auto& span : matcher.scan(doc.text)) {
      MentionExample m;
      m.doc_id = doc.doc_id;
      m.entity_id = span.entity_id;
      m.mention = std::move(span.surface);
      m.start_char = span.start;
      m.end_char = span.end;
      try {
        std::tie(m.ctx_l, m.ctx_r) = extract_context(doc.text, span.start, span.end, window);
      } catch (const DataError& err) {
        throw DataError("document " + doc.doc_id + ": " + err.what());
      }
      entities.insert(m.entity_id);
      store.add(std::move(m));
      ++report.mentions;
    }
  }
  report.entities = entities.size();
  store.canonicalize();
  return report;
}

MentionStore cap_per_entity(const MentionStore& store, std::size_t cap) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& m = store[i];
    std::uint64_t h = io::fnv1a(m.doc_id);
    h = io::fnv1a(std::to_string(m.start_char), h ^ 0xff);
    keyed.emplace_back(h, i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::map<std::string, std::size_t> taken;
  std::vector<char> keep(store.size(), 0);
  for (const auto& [h, i] : keyed) {
    auto& n = taken[store[i].entity_id];
    if (n < cap) {
      ++n;
      keep[i] = 1;
    }
  }
  MentionStore out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (keep[i]) out.add(store[i]);
  }
  return out;
}

MentionStore restrict_to_catalog(const MentionStore& store, const EntityCatalog& catalog) {
  MentionStore out;
  for (const auto& m : store.examples()) {
    if (catalog.contains(m.entity_id)) out.add(m);
  }
  return out;
}

}  // namespace kriss
