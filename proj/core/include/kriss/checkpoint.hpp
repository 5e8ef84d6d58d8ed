#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kriss/transformer.hpp"

namespace kriss {

// Checkpoint layout (all integers and floats little-endian):
//
//   char[4]  magic "KRSM"
//   u32      format version (1)
//   u32      model kind (1 = mention/reference bi-encoder, 2 = re-ranker)
//   u32      dim, layers, heads, max_len, ffn_dim
//   u64      seed
//   u32      vocabulary size
//   u32      encoder count
//   u32      extra float count
//   f32[]    each encoder's tensors in EncoderParams::visit order
//   f32[]    extra values (re-ranker: scoring weights then bias)
//
// The vocabulary lives next to the checkpoint in "<path>.vocab.jsonl".
// Parameters are held in double precision and rounded to float32 on save.

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint32_t { bi_encoder = 1, reranker = 2 };

struct CheckpointContents {
  ModelKind kind = ModelKind::bi_encoder;
  EncoderConfig config;
  std::size_t vocab_size = 0;
  std::vector<EncoderParams> encoders;
  std::vector<double> extra;
};

std::string encode_checkpoint(ModelKind kind, const std::vector<const EncoderParams*>& encoders,
                              const std::vector<double>& extra);
CheckpointContents decode_checkpoint(std::string_view bytes);

std::filesystem::path vocabulary_path(const std::filesystem::path& checkpoint);

void save_bi_encoder(const BiEncoder& model, const std::filesystem::path& path);
BiEncoder load_bi_encoder(const std::filesystem::path& path);

/// Rounds every parameter to float32, matching what a save/load cycle yields.
void round_to_float(EncoderParams& params);

}  // namespace kriss
