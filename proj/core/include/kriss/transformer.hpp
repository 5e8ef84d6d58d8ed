#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kriss/rng.hpp"
#include "kriss/vocabulary.hpp"

namespace kriss {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

struct EncoderConfig {
  std::uint32_t dim = 64;
  std::uint32_t layers = 2;
  std::uint32_t heads = 4;
  std::uint32_t max_len = 128;
  std::uint64_t seed = kDefaultSeed;

  /// Feed-forward width inside each block.
  std::uint32_t ffn_dim() const { return 2 * dim; }

  /// Throws UsageError unless dim % heads == 0 and max_len >= 8.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// One post-norm transformer block: self-attention, residual, LayerNorm,
/// GELU feed-forward, residual, LayerNorm.
struct BlockParams {
  Matrix wq, wk, wv, wo;  // dim x dim
  RowVector bq, bk, bv, bo;
  RowVector ln1_gain, ln1_bias;
  Matrix w1;  // dim x ffn
  RowVector b1;
  Matrix w2;  // ffn x dim
  RowVector b2;
  RowVector ln2_gain, ln2_bias;
};

/// Parameters of one encoder. Also used as a gradient accumulator of the same
/// shape.
struct EncoderParams {
  EncoderConfig config;
  std::size_t vocab_size = 0;
  Matrix token_embedding;     // vocab x dim
  Matrix position_embedding;  // max_len x dim
  std::vector<BlockParams> blocks;

  /// Weights and embeddings ~ uniform(-0.02, 0.02) drawn from `seed`; biases
  /// zero; LayerNorm gains one.
  static EncoderParams initialize(const EncoderConfig& config, std::size_t vocab_size, std::uint64_t seed);
  /// Same shapes, all zeros.
  static EncoderParams zeros(const EncoderConfig& config, std::size_t vocab_size);

  /// Visits every tensor in the fixed serialization order:
  /// token_embedding, position_embedding, then per block
  /// wq bq wk bk wv bv wo bo ln1_gain ln1_bias w1 b1 w2 b2 ln2_gain ln2_bias.
  void visit(const std::function<void(const std::string&, std::span<double>)>& fn);
  void visit(const std::function<void(const std::string&, std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  void set_zero();
};

struct BlockCache {
  Matrix x;                   // block input
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, T x T
  Matrix attn;                // concatenated head outputs
  Matrix xhat1;
  Vector rstd1;
  Matrix n1;                  // LN1 output
  Matrix h_pre, h_act;
  Matrix xhat2;
  Vector rstd2;
  Matrix out;
};

struct ForwardCache {
  TokenSequence tokens;
  std::vector<BlockCache> blocks;
};

/// Transformer encoder returning the final hidden state at position 0.
/// Pure given (params, tokens); safe to call concurrently on shared params.
class TransformerEncoder {
 public:
  /// Throws DataError on an empty or over-long sequence or an out-of-range id.
  static Vector encode(const EncoderParams& params, const TokenSequence& tokens);
  static Vector forward(const EncoderParams& params, const TokenSequence& tokens, ForwardCache& cache);

  /// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
  static void backward(const EncoderParams& params, const ForwardCache& cache, const Vector& d_output,
                       EncoderParams& grads);
};

/// The contextual mention encoder plus the separately parameterized
/// entity-reference encoder, with their shared vocabulary.
struct BiEncoder {
  Vocabulary vocab;
  EncoderParams mention;
  EncoderParams reference;

  static BiEncoder initialize(Vocabulary vocab, const EncoderConfig& config);
  const EncoderConfig& config() const { return mention.config; }
};

Vector encode_mention(const TokenSequence& sequence, const EncoderParams& params);
Vector encode_mention(const MentionExample& example, const BiEncoder& model);
Vector encode_reference(const Entity& entity, const BiEncoder& model, bool include_description = false);

}  // namespace kriss
