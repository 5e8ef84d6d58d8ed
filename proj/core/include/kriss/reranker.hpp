#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/prototype_index.hpp"
#include "kriss/transformer.hpp"

namespace kriss {

/// Which text stands in for a candidate entity in the cross input.
enum class CandidateText { prototype, reference };

struct RerankConfig {
  std::size_t k = 8;              // candidates per training query
  std::size_t steps = 2000;       // optimizer updates
  std::size_t batch_queries = 4;  // queries per update
  double lr = 1e-3;
  std::uint64_t seed = 20220214;
  bool fusion = false;            // candidate retrieval mode
  CandidateText text = CandidateText::prototype;
};

/// Cross-attention encoder with a linear scoring head over the [CLS] state.
struct RerankModel {
  Vocabulary vocab;
  EncoderParams encoder;
  Vector head_weight;
  double head_bias = 0.0;

  /// Encoder copied from `init` (typically the trained mention encoder),
  /// scoring head zeroed.
  static RerankModel from_encoder(Vocabulary vocab, const EncoderParams& init);
};

/// Query sequence followed by the candidate sequence without its [CLS]:
/// "[CLS] ql [M_s] q [M_e] qr [SEP] cl [M_s] c [M_e] cr [SEP]". When too long,
/// the four context lists are trimmed from their outer ends, longest first.
/// Throws DataError if both skeletons alone exceed max_len.
TokenSequence build_cross_input(const MentionExample& query, const MentionExample& candidate,
                                const Vocabulary& vocab, std::size_t max_len);

/// Variant whose candidate half is the entity's reference text.
TokenSequence build_cross_input(const MentionExample& query, const Entity& candidate, const Vocabulary& vocab,
                                std::size_t max_len);

double rerank_score(const TokenSequence& sequence, const RerankModel& model);

/// -log softmax(scores)[gold], computed stably.
double rerank_cross_entropy(std::span<const double> scores, std::size_t gold);

using PairScorer = std::function<double(const MentionExample& query, const Candidate& candidate)>;

/// Reorders the first `depth` candidates by descending scorer value (ties by
/// entity_id) and replaces their scores with re-ranking scores. Candidates
/// past `depth` keep their retrieval order and scores. The candidate set is
/// unchanged.
LinkResult rerank(const LinkResult& result, const MentionExample& query, const PairScorer& scorer,
                  std::size_t depth = std::numeric_limits<std::size_t>::max());

/// Scorer backed by a trained model. Candidates with a prototype row use that
/// prototype's text (or the reference text when `text` says so); candidates
/// without one fall back to the entity's reference text.
PairScorer model_scorer(const RerankModel& model, const VectorIndex& index, const EntityCatalog& catalog,
                        CandidateText text = CandidateText::prototype);

struct RerankTrainResult {
  RerankModel model;
  std::vector<double> loss_log;  // mean batch loss per update
  std::size_t usable_queries = 0;
  std::size_t skipped_queries = 0;
};

/// Pairs each mention with its top-K link candidates (its own prototype
/// excluded), drops mentions whose entity is not retrieved, and minimizes the
/// softmax cross-entropy of the gold candidate. Throws DataError when no
/// mention is usable.
RerankTrainResult train_reranker(const MentionStore& mentions, const VectorIndex& index, const BiEncoder& bi,
                                 const EntityCatalog& catalog, const RerankConfig& config);

void save_reranker(const RerankModel& model, const std::filesystem::path& path);
RerankModel load_reranker(const std::filesystem::path& path);

}  // namespace kriss
