#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kriss/evaluation.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/prototype_index.hpp"
#include "kriss/reranker.hpp"
#include "kriss/trainer.hpp"

namespace kriss {

enum class Stage { generate, train, index, link, rerank, eval };

std::string_view to_string(Stage s);
/// Comma-separated stage names, or "all".
std::set<Stage> parse_stages(std::string_view list);

struct PipelinePaths {
  std::filesystem::path entities = "entities.jsonl";
  std::filesystem::path corpus = "corpus.jsonl";
  std::filesystem::path mentions = "out/mentions.jsonl";
  std::filesystem::path checkpoint = "out/model.krsm";
  std::filesystem::path index = "out/index";
  std::filesystem::path queries = "queries.jsonl";  // gold mentions to link
  std::filesystem::path domain;                      // optional domain_entities.txt
  std::filesystem::path results = "out/results.jsonl";
  std::filesystem::path reranker = "out/reranker.krsm";
  std::filesystem::path reranked = "out/reranked.jsonl";
  std::filesystem::path report = "out/report.json";
  std::filesystem::path manifest = "out/manifest.tsv";
};

struct GenerateSettings {
  std::size_t window = 64;
  bool aliases = true;
};

struct LinkSettings {
  std::size_t top_k = 100;
  bool fusion = false;
  std::size_t k_proto = 16;
  std::uint64_t seed = kDefaultSeed;
};

struct PipelineConfig {
  std::filesystem::path base = ".";  // relative paths resolve against this
  PipelinePaths paths;
  GenerateSettings generate;
  TrainConfig train;
  LinkSettings link;
  RerankConfig rerank;
  std::size_t rerank_train_cap = 80;  // self-supervised mentions per entity used for re-ranker training
  EvalOptions eval;
  bool eval_reranked = false;  // score reranked.jsonl instead of results.jsonl

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  /// Sets every stage seed.
  void set_seed(std::uint64_t seed);
};

/// Flat "key = value" lines with dotted keys (paths.*, generate.*, train.*,
/// link.*, rerank.*, eval.*) plus "seed". Throws UsageError on unknown keys.
PipelineConfig parse_pipeline_config(std::string_view text, const std::filesystem::path& base);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void set_pipeline_key(PipelineConfig& config, std::string_view key, std::string_view value);
std::string serialize_pipeline_config(const PipelineConfig& config);

// Stage bodies, shared with the individual CLI subcommands.

GenerationReport generate_mentions(const EntityCatalog& catalog, const std::vector<Document>& corpus,
                                   const GenerateSettings& settings, MentionStore& out);

std::vector<LinkRecord> link_queries(const VectorIndex& index, const BiEncoder& model, const MentionStore& queries,
                                     const LinkOptions& options);

std::vector<LinkRecord> rerank_records(const std::vector<LinkRecord>& records, const PairScorer& scorer,
                                       std::size_t depth);

std::vector<LinkResult> results_of(const std::vector<LinkRecord>& records);

struct StageRecord {
  Stage stage = Stage::generate;
  std::vector<std::pair<std::string, std::string>> inputs;  // artifact name, hash
  std::string output;
  std::string output_hash;
  double seconds = 0.0;
};

std::string serialize_manifest(const std::vector<StageRecord>& records);

struct PipelineRun {
  std::vector<StageRecord> stages;
  std::optional<MetricReport> metrics;
};

/// Runs the requested stages in canonical order (generate, train, index, link,
/// rerank, eval), writing each artifact and rewriting the manifest after every
/// stage. Throws DataError naming the first missing input artifact.
PipelineRun run_pipeline(const PipelineConfig& config, const std::set<Stage>& stages, std::ostream* log = nullptr);

}  // namespace kriss
