#include "kriss/ontology.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "kriss/error.hpp"
#include "kriss/io.hpp"

namespace kriss {

using json = nlohmann::ordered_json;

void validate_entity(const Entity& e) {
  if (e.id.empty()) throw DataError("entity with empty id");
  if (e.name.empty()) throw DataError("entity " + e.id + " has an empty name");
  std::set<std::string_view> seen;
  for (const auto& a : e.aliases) {
    if (a.empty()) throw DataError("entity " + e.id + " has an empty alias");
    if (a == e.name) throw DataError("entity " + e.id + " lists its name as an alias");
    if (a.find(kAliasDelimiter) != std::string::npos) {
      throw DataError("entity " + e.id + " alias '" + a + "' contains the alias delimiter");
    }
    if (!seen.insert(a).second) throw DataError("entity " + e.id + " has duplicate alias '" + a + "'");
  }
}

EntityCatalog::EntityCatalog(std::vector<Entity> entities) {
  entities_.reserve(entities.size());
  for (auto& e : entities) add(std::move(e));
}

void EntityCatalog::add(Entity e) {
  validate_entity(e);
  if (by_id_.count(e.id) != 0) throw DataError("duplicate entity id " + e.id);
  by_id_.emplace(e.id, entities_.size());
  entities_.push_back(std::move(e));
}

bool EntityCatalog::contains(std::string_view id) const { return by_id_.count(std::string(id)) != 0; }

const Entity* EntityCatalog::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &entities_[it->second];
}

const Entity& EntityCatalog::at(std::string_view id) const {
  const Entity* e = find(id);
  if (e == nullptr) throw DataError("unknown entity id " + std::string(id));
  return *e;
}

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw DataError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

Entity entity_from_json(const json& obj, std::size_t line) {
  const std::string where = "line " + std::to_string(line) + ": ";
  if (!obj.is_object()) throw DataError(where + "expected a JSON object");
  static const std::set<std::string> known = {"id", "name", "aliases", "stn", "semtype", "description"};
  for (const auto& [k, v] : obj.items()) {
    if (known.count(k) == 0) throw DataError(where + "unknown field '" + k + "'");
  }
  Entity e;
  auto id = optional_string(obj, "id", line);
  auto name = optional_string(obj, "name", line);
  if (!id) throw DataError(where + "missing required field 'id'");
  if (!name) throw DataError(where + "missing required field 'name'");
  e.id = *id;
  e.name = *name;
  if (auto it = obj.find("aliases"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError(where + "field 'aliases' must be an array");
    for (const auto& a : *it) {
      if (!a.is_string()) throw DataError(where + "aliases must be strings");
      e.aliases.push_back(a.get<std::string>());
    }
  }
  e.stn = optional_string(obj, "stn", line);
  e.semtype = optional_string(obj, "semtype", line);
  e.description = optional_string(obj, "description", line);
  try {
    validate_entity(e);
  } catch (const DataError& err) {
    throw DataError(where + err.what());
  }
  return e;
}

}  // namespace

EntityCatalog parse_catalog(std::string_view jsonl) {
  EntityCatalog catalog;
  io::for_each_line(jsonl, [&](std::string_view line, std::size_t line_no) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& err) {
      throw DataError("line " + std::to_string(line_no) + ": parse error: " + err.what());
    }
    Entity e = entity_from_json(obj, line_no);
    if (catalog.contains(e.id)) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate entity id " + e.id);
    }
    catalog.add(std::move(e));
  });
  return catalog;
}

EntityCatalog load_catalog(const std::filesystem::path& path) {
  try {
    return parse_catalog(io::read_file(path));
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

std::string serialize_catalog(const EntityCatalog& catalog) {
  std::string out;
  for (const auto& e : catalog) {
    json obj;
    obj["id"] = e.id;
    obj["name"] = e.name;
    obj["aliases"] = e.aliases;
    if (e.stn) obj["stn"] = *e.stn;
    if (e.semtype) obj["semtype"] = *e.semtype;
    if (e.description) obj["description"] = *e.description;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_catalog(const EntityCatalog& catalog, const std::filesystem::path& path) {
  io::write_file(path, serialize_catalog(catalog));
}

std::string fold_surface(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

SurfaceIndex::SurfaceIndex(const EntityCatalog& catalog, bool include_aliases, SurfaceKey key) : key_(key) {
  auto add = [&](std::string_view surface, const std::string& id) {
    std::string k = key_of(surface);
    if (k.empty()) return;
    auto& ids = map_[std::move(k)];
    auto pos = std::lower_bound(ids.begin(), ids.end(), id);
    if (pos == ids.end() || *pos != id) ids.insert(pos, id);
  };
  for (const auto& e : catalog) {
    add(e.name, e.id);
    if (include_aliases) {
      for (const auto& a : e.aliases) add(a, e.id);
    }
  }
}

std::string SurfaceIndex::key_of(std::string_view surface) const {
  return key_ == SurfaceKey::exact ? std::string(surface) : fold_surface(surface);
}

const std::vector<std::string>& SurfaceIndex::lookup(std::string_view surface) const {
  static const std::vector<std::string> none;
  auto it = map_.find(key_of(surface));
  return it == map_.end() ? none : it->second;
}

std::map<std::string, std::string> unambiguous_surfaces(const SurfaceIndex& index) {
  std::map<std::string, std::string> out;
  for (const auto& [surface, ids] : index.entries()) {
    if (ids.size() == 1) out.emplace(surface, ids.front());
  }
  return out;
}

std::string entity_reference_text(const Entity& entity, bool include_description) {
  std::string out = "[CLS]";
  auto segment = [&out](std::string_view text) {
    if (!text.empty()) {
      out += ' ';
      out += text;
    }
    out += " [SEP]";
  };
  segment(entity.stn.value_or(""));
  segment(entity.semtype.value_or(""));
  std::string aliases;
  for (std::size_t i = 0; i < entity.aliases.size(); ++i) {
    if (i) aliases += kAliasDelimiter;
    aliases += entity.aliases[i];
  }
  segment(aliases);
  if (include_description && entity.description && !entity.description->empty()) {
    segment(*entity.description);
  }
  return out;
}

}  // namespace kriss
