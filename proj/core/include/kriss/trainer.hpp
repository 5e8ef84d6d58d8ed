#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kriss/losses.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"
#include "kriss/rng.hpp"
#include "kriss/transformer.hpp"

namespace kriss {

struct TrainConfig {
  std::size_t batch_entities = 16;  // N
  double tau = 1.0;
  double pi = 1.0;
  double alpha = 0.5;
  double beta = 0.5;
  double p_mask = 0.2;
  double p_replace = 0.2;
  double lr = 1e-3;
  std::size_t steps = 2000;
  std::uint64_t seed = kDefaultSeed;
  std::size_t log_every = 50;
  std::size_t train_cap = 3;  // mentions kept per entity for training
  std::size_t min_freq = 2;   // vocabulary frequency cutoff
  std::size_t window = 64;    // informational; generation owns the window
  bool use_description = false;
  EncoderConfig encoder;

  LossWeights weights() const { return {tau, pi, alpha, beta}; }
  /// Throws UsageError on out-of-range values.
  void validate() const;
};

/// Flat "key = value" text; '#' starts a comment. Keys: N, tau, pi, alpha,
/// beta, p_mask, p_replace, lr, steps, seed, init_seed, log_every, train_cap,
/// min_freq, window, use_description, dim, layers, heads, max_len. "seed" also
/// sets the initialization seed; "init_seed" sets only that. Unknown keys are
/// rejected.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string serialize_train_config(const TrainConfig& config);

/// Applies one key to the config; returns false for an unknown key.
bool set_train_config_key(TrainConfig& config, std::string_view key, std::string_view value);

/// Token sequences for one step, before encoding. mentions[2k], mentions[2k+1]
/// and references[k] belong to entity_ids[k].
struct RawMinibatch {
  std::vector<std::string> entity_ids;
  std::vector<TokenSequence> mentions;
  std::vector<TokenSequence> references;
};

/// Entities with at least two stored mentions that exist in the catalog, sorted.
std::vector<std::string> eligible_entities(const MentionStore& store, const EntityCatalog& catalog);

/// Draws N distinct eligible entities uniformly and two of each one's mentions
/// without replacement, then applies replacement and masking augmentation.
/// Throws DataError when fewer than N entities are eligible.
RawMinibatch sample_minibatch(const MentionStore& store, const EntityCatalog& catalog, const Vocabulary& vocab,
                              const TrainConfig& config, Rng& rng);

/// Restricts to catalog entities and applies the per-entity training cap.
MentionStore prepare_training_store(const MentionStore& store, const EntityCatalog& catalog,
                                    const TrainConfig& config);

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(const EncoderParams& shape);
  void step(EncoderParams& params, const EncoderParams& grads, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;
  EncoderParams m_, v_;
  std::size_t t_ = 0;
};

/// Owns a bi-encoder and its optimizer state. Single writer.
class Trainer {
 public:
  Trainer(BiEncoder model, TrainConfig config);

  /// Forward, backward and one Adam update. The returned losses come from the
  /// pre-update forward pass. Throws NumericError (naming the tensor) on a
  /// non-finite gradient, leaving the parameters untouched.
  LossBreakdown train_step(const RawMinibatch& batch);

  /// Losses under the current parameters, no update.
  LossBreakdown evaluate(const RawMinibatch& batch) const;

  /// Joint-loss gradients for both encoders under the current parameters.
  LossBreakdown gradients(const RawMinibatch& batch, EncoderParams& mention_grads,
                          EncoderParams& reference_grads) const;

  Minibatch encode(const RawMinibatch& batch) const;

  const BiEncoder& model() const { return model_; }
  BiEncoder& model() { return model_; }
  const TrainConfig& config() const { return config_; }

 private:
  BiEncoder model_;
  TrainConfig config_;
  AdamOptimizer adam_mention_, adam_reference_;
};

struct LossLogEntry {
  std::size_t step = 0;
  LossBreakdown loss;
};

std::string serialize_loss_log(const std::vector<LossLogEntry>& log);

struct TrainResult {
  BiEncoder model;
  std::vector<LossLogEntry> log;
};

/// Builds the vocabulary from every catalog-linked mention in `store` (plus
/// catalog reference tokens), trains on the capped store, initializes from
/// config.encoder.seed and runs config.steps updates. Logs step 0 and every log_every steps, and the last step.
TrainResult train_loop(const MentionStore& store, const EntityCatalog& catalog, const TrainConfig& config);

}  // namespace kriss
