#include "kriss/evaluation.hpp"

#include <algorithm>

#include <json.hpp>

#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/rng.hpp"

namespace kriss {

namespace {

void check_aligned(std::size_t predictions, const MentionStore& gold) {
  if (predictions != gold.size()) {
    throw DataError("alignment error: " + std::to_string(predictions) + " predictions for " +
                    std::to_string(gold.size()) + " gold mentions");
  }
}

double fraction(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

}  // namespace

std::set<std::string> parse_domain(std::string_view text) {
  std::set<std::string> ids;
  io::for_each_line(text, [&](std::string_view line, std::size_t) {
    std::string id = trim(line);
    if (!id.empty()) ids.insert(std::move(id));
  });
  return ids;
}

GoldDataset load_gold(const std::filesystem::path& mentions, const std::filesystem::path& domain) {
  GoldDataset g;
  g.mentions = load_mentions(mentions);
  if (!domain.empty()) g.domain = parse_domain(io::read_file(domain));
  if (!g.domain.empty()) {
    for (const auto& m : g.mentions.examples()) {
      if (!g.domain.contains(m.entity_id)) {
        throw DataError("gold entity " + m.entity_id + " is not in the domain set " + domain.string());
      }
    }
  }
  return g;
}

std::vector<std::string> top1_ids(std::span<const LinkResult> predictions) {
  std::vector<std::string> ids;
  ids.reserve(predictions.size());
  for (const auto& p : predictions) ids.push_back(p.candidates.empty() ? std::string() : p.candidates.front().entity_id);
  return ids;
}

double strict_accuracy(std::span<const std::string> predicted_ids, const MentionStore& gold) {
  check_aligned(predicted_ids.size(), gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted_ids[i] == gold[i].entity_id;
  return fraction(hits, gold.size());
}

double strict_accuracy(std::span<const LinkResult> predictions, const MentionStore& gold) {
  const auto ids = top1_ids(predictions);
  return strict_accuracy(ids, gold);
}

double lenient_surface_accuracy(std::span<const std::string> predicted_surfaces, const MentionStore& gold,
                                const EntityCatalog& catalog) {
  check_aligned(predicted_surfaces.size(), gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Entity* e = catalog.find(gold[i].entity_id);
    if (e == nullptr || predicted_surfaces[i].empty()) continue;
    const std::string p = fold_surface(predicted_surfaces[i]);
    bool ok = p == fold_surface(e->name);
    for (const auto& a : e->aliases) ok = ok || p == fold_surface(a);
    hits += ok;
  }
  return fraction(hits, gold.size());
}

std::vector<std::string> predicted_surfaces(std::span<const std::string> predicted_ids, const EntityCatalog& catalog) {
  std::vector<std::string> out;
  out.reserve(predicted_ids.size());
  for (const auto& id : predicted_ids) {
    const Entity* e = id.empty() ? nullptr : catalog.find(id);
    out.push_back(e ? e->name : std::string());
  }
  return out;
}

AsIsResult as_is_baseline(const MentionStore& gold, const EntityCatalog& catalog, std::uint64_t seed) {
  const SurfaceIndex index(catalog, true, SurfaceKey::folded);
  Rng rng(seed);
  AsIsResult r;
  for (const auto& m : gold.examples()) {
    r.surfaces.push_back(m.mention);
    const auto& ids = index.lookup(m.mention);
    // One draw per mention keeps later choices independent of earlier match counts.
    const std::uint64_t draw = rng();
    r.resolved.push_back(ids.empty() ? std::string() : ids[draw % ids.size()]);
  }
  r.strict = strict_accuracy(r.resolved, gold);
  r.lenient = lenient_surface_accuracy(r.surfaces, gold, catalog);
  return r;
}

AmbiguityPartition ambiguity_partition(const MentionStore& gold, const EntityCatalog& catalog) {
  const SurfaceIndex index(catalog, true, SurfaceKey::folded);
  AmbiguityPartition p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    (index.lookup(gold[i].mention).size() == 1 ? p.unambiguous : p.ambiguous).push_back(i);
  }
  return p;
}

std::map<std::size_t, double> topk_oracle_accuracy(std::span<const LinkResult> predictions, const MentionStore& gold,
                                                   std::span<const std::size_t> ks) {
  check_aligned(predictions.size(), gold);
  std::map<std::size_t, double> out;
  if (ks.empty()) return out;
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  std::vector<std::size_t> rank(gold.size(), SIZE_MAX);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& c = predictions[i].candidates;
    if (c.size() < std::min(kmax, predictions[i].pool_size)) {
      throw DataError("insufficient candidates: prediction " + std::to_string(i) + " has " +
                      std::to_string(c.size()) + ", top-" + std::to_string(kmax) + " requested");
    }
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (c[r].entity_id == gold[i].entity_id) {
        rank[i] = r;
        break;
      }
    }
  }
  for (std::size_t k : ks) {
    if (k == 0) throw UsageError("top-K values must be >= 1");
    std::size_t hits = 0;
    for (std::size_t r : rank) hits += r < k;
    out[k] = fraction(hits, gold.size());
  }
  return out;
}

std::set<Metric> parse_metrics(std::string_view list) {
  static const std::map<std::string, Metric, std::less<>> names = {{"strict", Metric::strict},
                                                                   {"lenient", Metric::lenient},
                                                                   {"asis", Metric::asis},
                                                                   {"ambiguity", Metric::ambiguity},
                                                                   {"topk", Metric::topk}};
  std::set<Metric> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    const std::string name = trim(list.substr(pos, comma - pos));
    if (!name.empty()) {
      auto it = names.find(name);
      if (it == names.end()) throw UsageError("unknown metric '" + name + "'");
      out.insert(it->second);
    }
    pos = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_ks(std::string_view list) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    const std::string item = trim(list.substr(pos, comma - pos));
    if (!item.empty()) {
      std::size_t used = 0;
      unsigned long long k = 0;
      try {
        k = std::stoull(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size() || k == 0 || item.front() == '-') throw UsageError("bad top-K value '" + item + "'");
      out.push_back(static_cast<std::size_t>(k));
    }
    pos = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MetricReport evaluate(std::span<const LinkResult> predictions, const GoldDataset& gold, const EntityCatalog& catalog,
                      const EvalOptions& options) {
  check_aligned(predictions.size(), gold.mentions);
  MetricReport r;
  const auto ids = top1_ids(predictions);
  const auto& m = options.metrics;
  if (m.contains(Metric::strict)) r.strict_accuracy = strict_accuracy(ids, gold.mentions);
  if (m.contains(Metric::lenient)) {
    r.lenient_accuracy = lenient_surface_accuracy(predicted_surfaces(ids, catalog), gold.mentions, catalog);
  }
  if (m.contains(Metric::asis)) {
    const auto b = as_is_baseline(gold.mentions, catalog, options.seed);
    r.as_is_accuracy = b.strict;
    r.as_is_lenient_accuracy = b.lenient;
  }
  if (m.contains(Metric::ambiguity)) {
    const auto p = ambiguity_partition(gold.mentions, catalog);
    r.ambiguous_fraction = fraction(p.ambiguous.size(), gold.mentions.size());
    auto part = [&](const std::vector<std::size_t>& idx) -> std::optional<double> {
      if (idx.empty()) return std::nullopt;
      std::size_t hits = 0;
      for (std::size_t i : idx) hits += ids[i] == gold.mentions[i].entity_id;
      return fraction(hits, idx.size());
    };
    r.strict_on_ambiguous = part(p.ambiguous);
    r.strict_on_unambiguous = part(p.unambiguous);
  }
  if (m.contains(Metric::topk)) r.topk_oracle = topk_oracle_accuracy(predictions, gold.mentions, options.ks);
  return r;
}

namespace {

std::vector<std::pair<std::string, double>> flatten(const MetricReport& r) {
  std::vector<std::pair<std::string, double>> rows;
  auto add = [&](const char* name, const std::optional<double>& v) {
    if (v) rows.emplace_back(name, *v);
  };
  add("strict_accuracy", r.strict_accuracy);
  add("lenient_accuracy", r.lenient_accuracy);
  add("as_is_accuracy", r.as_is_accuracy);
  add("as_is_lenient_accuracy", r.as_is_lenient_accuracy);
  add("ambiguous_fraction", r.ambiguous_fraction);
  add("strict_on_ambiguous", r.strict_on_ambiguous);
  add("strict_on_unambiguous", r.strict_on_unambiguous);
  for (const auto& [k, v] : r.topk_oracle) rows.emplace_back("topk_oracle@" + std::to_string(k), v);
  return rows;
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, v] : flatten(r)) {
    if (name.starts_with("topk_oracle@")) continue;
    j[name] = v;
  }
  if (!r.topk_oracle.empty()) {
    auto& t = j["topk_oracle"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.topk_oracle) t[std::to_string(k)] = v;
  }
  return j.dump(2) + "\n";
}

std::string report_tsv(const MetricReport& r) {
  std::string out = "metric\tvalue\n";
  for (const auto& [name, v] : flatten(r)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += name + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace kriss
