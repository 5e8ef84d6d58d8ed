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
#include "kriss/prototype_index.hpp"

namespace kriss {

struct GoldDataset {
  MentionStore mentions;
  std::set<std::string> domain;  // empty means unrestricted
};

/// Reads gold mentions plus an optional domain list (one id per line). Throws
/// DataError when a gold entity lies outside a non-empty domain.
GoldDataset load_gold(const std::filesystem::path& mentions, const std::filesystem::path& domain = {});
std::set<std::string> parse_domain(std::string_view text);

/// Rank-1 entity of each prediction ("" when empty).
std::vector<std::string> top1_ids(std::span<const LinkResult> predictions);

double strict_accuracy(std::span<const std::string> predicted_ids, const MentionStore& gold);
double strict_accuracy(std::span<const LinkResult> predictions, const MentionStore& gold);

/// A predicted surface counts when it equals, after case and whitespace
/// folding, the gold entity's name or one of its aliases.
double lenient_surface_accuracy(std::span<const std::string> predicted_surfaces, const MentionStore& gold,
                                const EntityCatalog& catalog);

/// Canonical name of each predicted entity ("" for an empty prediction).
std::vector<std::string> predicted_surfaces(std::span<const std::string> predicted_ids, const EntityCatalog& catalog);

struct AsIsResult {
  std::vector<std::string> surfaces;  // the mention text itself
  std::vector<std::string> resolved;  // seeded choice among matching ids, "" when none
  double strict = 0.0;
  double lenient = 0.0;
};

AsIsResult as_is_baseline(const MentionStore& gold, const EntityCatalog& catalog, std::uint64_t seed);

struct AmbiguityPartition {
  std::vector<std::size_t> ambiguous;  // indices into the gold store
  std::vector<std::size_t> unambiguous;
};

/// Ambiguous iff the folded mention surface does not resolve to exactly one
/// entity over names and aliases.
AmbiguityPartition ambiguity_partition(const MentionStore& gold, const EntityCatalog& catalog);

/// Throws DataError when a prediction holds fewer than min(K, pool_size)
/// candidates for the largest K.
std::map<std::size_t, double> topk_oracle_accuracy(std::span<const LinkResult> predictions, const MentionStore& gold,
                                                   std::span<const std::size_t> ks);

struct MetricReport {
  std::optional<double> strict_accuracy;
  std::optional<double> lenient_accuracy;
  std::optional<double> as_is_accuracy;
  std::optional<double> as_is_lenient_accuracy;
  std::optional<double> ambiguous_fraction;
  std::optional<double> strict_on_ambiguous;
  std::optional<double> strict_on_unambiguous;
  std::map<std::size_t, double> topk_oracle;
};

enum class Metric { strict, lenient, asis, ambiguity, topk };
std::set<Metric> parse_metrics(std::string_view list);  // comma separated
std::vector<std::size_t> parse_ks(std::string_view list);

struct EvalOptions {
  std::set<Metric> metrics = {Metric::strict, Metric::lenient, Metric::asis, Metric::ambiguity, Metric::topk};
  std::vector<std::size_t> ks = {1, 5, 10, 50, 100};
  std::uint64_t seed = 0;
};

MetricReport evaluate(std::span<const LinkResult> predictions, const GoldDataset& gold, const EntityCatalog& catalog,
                      const EvalOptions& options);

std::string report_json(const MetricReport& report);
std::string report_tsv(const MetricReport& report);

}  // namespace kriss
