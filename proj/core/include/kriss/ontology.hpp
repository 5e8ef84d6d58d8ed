#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kriss {

/// One ontology record.
struct Entity {
  std::string id;
  std::string name;
  std::vector<std::string> aliases;
  std::optional<std::string> stn;
  std::optional<std::string> semtype;
  std::optional<std::string> description;

  bool operator==(const Entity&) const = default;
};

/// Throws DataError when an entity breaks its invariants (empty id/name,
/// duplicate aliases, alias equal to the name, alias containing the delimiter).
void validate_entity(const Entity& e);

/// The linking target space: validated entities keyed by id, in file order.
class EntityCatalog {
 public:
  EntityCatalog() = default;
  explicit EntityCatalog(std::vector<Entity> entities);

  void add(Entity e);

  std::size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }
  bool contains(std::string_view id) const;

  /// Throws DataError for an unknown id.
  const Entity& at(std::string_view id) const;
  const Entity* find(std::string_view id) const;

  const std::vector<Entity>& entities() const { return entities_; }
  auto begin() const { return entities_.begin(); }
  auto end() const { return entities_.end(); }

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// entities.jsonl: one object per line with keys id, name, aliases, stn,
// semtype, description. Optional keys may be absent.
EntityCatalog parse_catalog(std::string_view jsonl);
EntityCatalog load_catalog(const std::filesystem::path& path);
std::string serialize_catalog(const EntityCatalog& catalog);
void save_catalog(const EntityCatalog& catalog, const std::filesystem::path& path);

/// How surfaces are keyed in a SurfaceIndex.
enum class SurfaceKey {
  exact,   // case preserved, byte-exact
  folded,  // lower-cased ASCII with runs of whitespace collapsed and trimmed
};

std::string fold_surface(std::string_view s);

/// Surface form -> sorted, de-duplicated set of entity ids. Names and aliases
/// share one pool; ambiguity is decided over the merged pool.
class SurfaceIndex {
 public:
  SurfaceIndex() = default;
  SurfaceIndex(const EntityCatalog& catalog, bool include_aliases, SurfaceKey key = SurfaceKey::exact);

  SurfaceKey key_mode() const { return key_; }
  std::string key_of(std::string_view surface) const;

  /// Entity ids for a surface (normalized per key mode); empty when unknown.
  const std::vector<std::string>& lookup(std::string_view surface) const;
  bool ambiguous(std::string_view surface) const { return lookup(surface).size() >= 2; }

  std::size_t size() const { return map_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return map_; }

 private:
  SurfaceKey key_ = SurfaceKey::exact;
  std::map<std::string, std::vector<std::string>> map_;
};

inline SurfaceIndex build_surface_index(const EntityCatalog& catalog, bool include_aliases) {
  return SurfaceIndex(catalog, include_aliases);
}

/// Surfaces that resolve to exactly one entity.
std::map<std::string, std::string> unambiguous_surfaces(const SurfaceIndex& index);

inline constexpr std::string_view kAliasDelimiter = " ; ";

/// "[CLS] stn [SEP] semtype [SEP] alias ; alias [SEP]", with "description [SEP]"
/// appended when requested and present. Missing fields leave empty segments.
std::string entity_reference_text(const Entity& entity, bool include_description);

}  // namespace kriss
