#include "kriss/prototype_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "json_codec.hpp"
#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/rng.hpp"
#include "kriss/vocabulary.hpp"

namespace kriss {

using detail::ojson;

std::size_t PrototypeStore::prototype_count() const {
  std::size_t n = 0;
  for (const auto& [id, v] : by_entity) n += v.size();
  return n;
}

PrototypeStore sample_prototypes(const MentionStore& store, const EntityCatalog& catalog, std::size_t k,
                                 std::uint64_t seed) {
  PrototypeStore out;
  out.per_entity_cap = k;
  for (const auto& e : catalog) out.by_entity[e.id];
  Rng rng(seed);
  for (const auto& [id, members] : store.by_entity()) {
    if (!catalog.contains(id)) continue;
    auto& list = out.by_entity[id];
    for (std::size_t pick : sample_without_replacement(rng, members.size(), k)) list.push_back(store[members[pick]]);
  }
  return out;
}

void VectorIndex::add(PrototypeMeta meta, std::span<const float> vec) {
  if (vec.size() != dim_) {
    throw DataError("prototype vector has dim " + std::to_string(vec.size()) + ", index expects " +
                    std::to_string(dim_));
  }
  rows_.insert(rows_.end(), vec.begin(), vec.end());
  meta_.push_back(std::move(meta));
}

void VectorIndex::set_reference(const std::string& entity_id, std::span<const float> vec) {
  if (vec.size() != dim_) {
    throw DataError("reference vector has dim " + std::to_string(vec.size()) + ", index expects " +
                    std::to_string(dim_));
  }
  references_[entity_id].assign(vec.begin(), vec.end());
}

std::span<const float> VectorIndex::reference(const std::string& entity_id) const {
  auto it = references_.find(entity_id);
  if (it == references_.end()) return {};
  return it->second;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

std::vector<float> to_float(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

std::vector<std::pair<std::size_t, double>> VectorIndex::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) throw DataError("query dim does not match index");
  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) scored.emplace_back(i, dot(query, row(i)));
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  scored.resize(k);
  return scored;
}

namespace {

double norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

double scaled_dot(std::span<const float> q, std::span<const float> v, bool cosine, double q_norm) {
  const double s = dot(q, v);
  if (!cosine) return s;
  const double denom = q_norm * norm(v);
  return denom > 0.0 ? s / denom : 0.0;
}

bool same_span(const MentionExample& a, const MentionExample& b) {
  return a.doc_id == b.doc_id && a.start_char == b.start_char && a.end_char == b.end_char;
}

}  // namespace

LinkResult link(const VectorIndex& index, std::span<const float> query, const LinkOptions& options) {
  if (index.empty()) throw DataError("cannot link against an empty index");
  if (options.top_k == 0) throw DataError("top_k must be >= 1");
  if (query.size() != index.dim()) {
    throw DataError("query dim " + std::to_string(query.size()) + " does not match index dim " +
                    std::to_string(index.dim()));
  }
  if (options.fusion && !index.has_references()) throw DataError("fusion requested but the index has no reference vectors");

  const double q_norm = options.cosine ? norm(query) : 1.0;
  auto allowed = [&](const std::string& id) { return options.domain == nullptr || options.domain->count(id) != 0; };

  struct Best {
    double score;
    std::optional<std::size_t> row;
  };
  std::unordered_map<std::string, Best> best;
  std::unordered_map<std::string, double> ref_score;
  auto reference_term = [&](const std::string& id) -> std::optional<double> {
    if (!options.fusion) return 0.0;
    auto it = ref_score.find(id);
    if (it != ref_score.end()) return it->second;
    auto r = index.reference(id);
    if (r.empty()) return std::nullopt;
    const double s = scaled_dot(query, r, options.cosine, q_norm);
    ref_score.emplace(id, s);
    return s;
  };

  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& meta = index.meta(i);
    if (!allowed(meta.entity_id)) continue;
    if (options.exclude != nullptr && same_span(meta.example, *options.exclude)) continue;
    const auto r = reference_term(meta.entity_id);
    if (!r) throw DataError("fusion: entity " + meta.entity_id + " has no reference vector");
    const double s = scaled_dot(query, index.row(i), options.cosine, q_norm) + *r;
    auto [it, inserted] = best.try_emplace(meta.entity_id, Best{s, i});
    if (!inserted && s > it->second.score) it->second = Best{s, i};
  }
  if (options.fusion) {
    for (const auto& [id, vec] : index.references()) {
      if (!allowed(id) || best.count(id) != 0) continue;
      best.emplace(id, Best{*reference_term(id), std::nullopt});
    }
  }

  LinkResult result;
  result.pool_size = best.size();
  result.candidates.reserve(best.size());
  for (auto& [id, b] : best) result.candidates.push_back({id, b.score, b.row});
  auto order = [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.entity_id < b.entity_id;
  };
  const std::size_t k = std::min(options.top_k, result.candidates.size());
  std::partial_sort(result.candidates.begin(), result.candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    result.candidates.end(), order);
  result.candidates.resize(k);
  return result;
}

LinkResult link_with_references(const VectorIndex& index, std::span<const float> query, LinkOptions options) {
  options.fusion = true;
  return link(index, query, options);
}

VectorIndex build_index(const PrototypeStore& protos, const BiEncoder& model, const EntityCatalog& catalog,
                        bool with_references) {
  VectorIndex index(model.config().dim);
  for (const auto& [id, list] : protos.by_entity) {
    if (!catalog.contains(id)) throw DataError("prototype for unknown entity " + id);
    for (const auto& m : list) index.add({id, m}, to_float(encode_mention(m, model)));
  }
  if (with_references) {
    std::vector<const Entity*> entities;
    for (const auto& e : catalog) entities.push_back(&e);
    std::sort(entities.begin(), entities.end(), [](const Entity* a, const Entity* b) { return a->id < b->id; });
    for (const Entity* e : entities) index.set_reference(e->id, to_float(encode_reference(*e, model)));
  }
  return index;
}

VectorIndex add_gold_prototypes(const VectorIndex& index, const MentionStore& gold, const BiEncoder& model,
                                const EntityCatalog& catalog) {
  if (index.dim() != model.config().dim) throw DataError("index and checkpoint dims differ");
  VectorIndex out = index;
  for (const auto& m : gold.examples()) {
    if (!catalog.contains(m.entity_id)) {
      throw DataError("gold mention in " + m.doc_id + " at " + std::to_string(m.start_char) +
                      " has unknown entity " + m.entity_id);
    }
    MentionExample g = m;
    g.source = MentionSource::gold;
    out.add({g.entity_id, g}, to_float(encode_mention(g, model)));
  }
  return out;
}

std::string encode_vector_file(std::size_t dim, std::span<const float> rows) {
  std::string out = "KRSV";
  io::put_u32(out, 1);
  io::put_u32(out, static_cast<std::uint32_t>(dim));
  io::put_u64(out, dim == 0 ? 0 : rows.size() / dim);
  io::put_f32s(out, rows);
  return out;
}

std::vector<float> decode_vector_file(std::string_view bytes, std::size_t& dim) {
  io::Reader r(bytes, "vector file");
  if (r.take(4) != "KRSV") throw DataError("not a vector file (bad magic)");
  const auto version = r.u32();
  if (version != 1) throw DataError("unsupported vector file version " + std::to_string(version));
  dim = r.u32();
  const auto count = r.u64();
  std::vector<float> rows(static_cast<std::size_t>(count) * dim);
  r.f32s(rows);
  if (!r.done()) throw DataError("trailing bytes after vector rows");
  return rows;
}

std::string VectorIndex::serialize_vectors() const { return encode_vector_file(dim_, rows_); }

std::string VectorIndex::serialize_vector_sidecar() const {
  std::string out;
  for (std::size_t i = 0; i < meta_.size(); ++i) {
    ojson obj;
    obj["row"] = i;
    obj["entity_id"] = meta_[i].entity_id;
    obj["source"] = to_string(meta_[i].source());
    obj["prototype"] = detail::mention_to_json(meta_[i].example);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_file(dir / "vectors.bin", serialize_vectors());
  io::write_file(dir / "vectors.jsonl", serialize_vector_sidecar());
  std::filesystem::remove(dir / "references.bin");
  std::filesystem::remove(dir / "references.jsonl");
  if (has_references()) {
    std::vector<float> flat;
    std::string sidecar;
    std::size_t row = 0;
    for (const auto& [id, v] : references_) {
      flat.insert(flat.end(), v.begin(), v.end());
      ojson obj;
      obj["row"] = row++;
      obj["entity_id"] = id;
      sidecar += obj.dump();
      sidecar += '\n';
    }
    io::write_file(dir / "references.bin", encode_vector_file(dim_, flat));
    io::write_file(dir / "references.jsonl", sidecar);
  }
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  std::size_t dim = 0;
  const auto rows = decode_vector_file(io::read_file(dir / "vectors.bin"), dim);
  VectorIndex index(dim);
  std::vector<PrototypeMeta> metas;
  io::for_each_line(io::read_file(dir / "vectors.jsonl"), [&](std::string_view line, std::size_t line_no) {
    const auto obj = detail::parse_json_line(line, line_no);
    const std::string where = "vectors.jsonl line " + std::to_string(line_no);
    if (!obj.contains("row") || obj["row"].get<std::size_t>() != metas.size()) {
      throw DataError(where + ": rows must be dense and in order");
    }
    MentionExample ex = detail::mention_from_json(obj.at("prototype"), where);
    metas.push_back({obj.at("entity_id").get<std::string>(), std::move(ex)});
  });
  if (dim == 0 ? !metas.empty() : metas.size() * dim != rows.size()) {
    throw DataError("vectors.jsonl row count does not match vectors.bin");
  }
  for (std::size_t i = 0; i < metas.size(); ++i) {
    index.add(std::move(metas[i]), std::span<const float>(rows.data() + i * dim, dim));
  }
  if (std::filesystem::exists(dir / "references.bin")) {
    std::size_t rdim = 0;
    const auto refs = decode_vector_file(io::read_file(dir / "references.bin"), rdim);
    if (rdim != dim && !refs.empty()) throw DataError("references.bin dim differs from vectors.bin");
    std::vector<std::string> ids;
    io::for_each_line(io::read_file(dir / "references.jsonl"), [&](std::string_view line, std::size_t line_no) {
      ids.push_back(detail::parse_json_line(line, line_no).at("entity_id").get<std::string>());
    });
    if (ids.size() * dim != refs.size()) throw DataError("references.jsonl row count does not match references.bin");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      index.set_reference(ids[i], std::span<const float>(refs.data() + i * dim, dim));
    }
  }
  return index;
}

std::string serialize_link_records(const std::vector<LinkRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ojson obj;
    obj["query"] = detail::mention_to_json(r.query);
    obj["pool_size"] = r.result.pool_size;
    ojson cands = ojson::array();
    for (const auto& c : r.result.candidates) {
      ojson cj;
      cj["entity_id"] = c.entity_id;
      cj["score"] = c.score;
      cj["prototype"] = c.prototype ? ojson(*c.prototype) : ojson(nullptr);
      cands.push_back(std::move(cj));
    }
    obj["candidates"] = std::move(cands);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<LinkRecord> parse_link_records(std::string_view jsonl) {
  std::vector<LinkRecord> out;
  io::for_each_line(jsonl, [&](std::string_view line, std::size_t line_no) {
    const auto obj = detail::parse_json_line(line, line_no);
    const std::string where = "results line " + std::to_string(line_no);
    LinkRecord r;
    try {
      r.query = detail::mention_from_json(obj.at("query"), where);
      r.result.pool_size = obj.at("pool_size").get<std::size_t>();
      for (const auto& cj : obj.at("candidates")) {
        Candidate c;
        c.entity_id = cj.at("entity_id").get<std::string>();
        c.score = cj.at("score").get<double>();
        if (!cj.at("prototype").is_null()) c.prototype = cj.at("prototype").get<std::size_t>();
        r.result.candidates.push_back(std::move(c));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<LinkRecord> load_link_records(const std::filesystem::path& path) {
  return parse_link_records(io::read_file(path));
}

}  // namespace kriss
