#include "kriss/checkpoint.hpp"

#include "kriss/error.hpp"
#include "kriss/io.hpp"

namespace kriss {

std::string encode_checkpoint(ModelKind kind, const std::vector<const EncoderParams*>& encoders,
                              const std::vector<double>& extra) {
  if (encoders.empty()) throw UsageError("checkpoint needs at least one encoder");
  const EncoderConfig& cfg = encoders.front()->config;
  const std::size_t vocab = encoders.front()->vocab_size;
  for (const auto* e : encoders) {
    if (!(e->config == cfg) || e->vocab_size != vocab) throw UsageError("encoders in one checkpoint must share shape");
  }
  std::string out = "KRSM";
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, static_cast<std::uint32_t>(kind));
  io::put_u32(out, cfg.dim);
  io::put_u32(out, cfg.layers);
  io::put_u32(out, cfg.heads);
  io::put_u32(out, cfg.max_len);
  io::put_u32(out, cfg.ffn_dim());
  io::put_u64(out, cfg.seed);
  io::put_u32(out, static_cast<std::uint32_t>(vocab));
  io::put_u32(out, static_cast<std::uint32_t>(encoders.size()));
  io::put_u32(out, static_cast<std::uint32_t>(extra.size()));
  for (const auto* e : encoders) {
    e->visit([&](const std::string&, std::span<const double> t) {
      for (double x : t) io::put_f32(out, static_cast<float>(x));
    });
  }
  for (double x : extra) io::put_f32(out, static_cast<float>(x));
  return out;
}

CheckpointContents decode_checkpoint(std::string_view bytes) {
  io::Reader r(bytes, "checkpoint");
  if (r.take(4) != "KRSM") throw DataError("not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  CheckpointContents c;
  const auto kind = r.u32();
  if (kind != 1 && kind != 2) throw DataError("unknown model kind " + std::to_string(kind));
  c.kind = static_cast<ModelKind>(kind);
  c.config.dim = r.u32();
  c.config.layers = r.u32();
  c.config.heads = r.u32();
  c.config.max_len = r.u32();
  const auto ffn = r.u32();
  c.config.seed = r.u64();
  try {
    c.config.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (ffn != c.config.ffn_dim()) throw DataError("checkpoint ffn width does not match this build");
  c.vocab_size = r.u32();
  const auto n_enc = r.u32();
  const auto n_extra = r.u32();
  for (std::uint32_t i = 0; i < n_enc; ++i) {
    EncoderParams p = EncoderParams::zeros(c.config, c.vocab_size);
    p.visit([&](const std::string&, std::span<double> t) {
      for (auto& x : t) x = static_cast<double>(r.f32());
    });
    c.encoders.push_back(std::move(p));
  }
  for (std::uint32_t i = 0; i < n_extra; ++i) c.extra.push_back(static_cast<double>(r.f32()));
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return c;
}

std::filesystem::path vocabulary_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".vocab.jsonl";
}

void save_bi_encoder(const BiEncoder& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ModelKind::bi_encoder, {&model.mention, &model.reference}, {}));
  model.vocab.save(vocabulary_path(path));
}

BiEncoder load_bi_encoder(const std::filesystem::path& path) {
  auto c = decode_checkpoint(io::read_file(path));
  if (c.kind != ModelKind::bi_encoder || c.encoders.size() != 2) {
    throw DataError(path.string() + " is not a mention/reference encoder checkpoint");
  }
  BiEncoder m;
  m.vocab = Vocabulary::load(vocabulary_path(path));
  if (m.vocab.size() != c.vocab_size) throw DataError("vocabulary size does not match checkpoint " + path.string());
  m.mention = std::move(c.encoders[0]);
  m.reference = std::move(c.encoders[1]);
  return m;
}

void round_to_float(EncoderParams& params) {
  params.visit([](const std::string&, std::span<double> t) {
    for (auto& x : t) x = static_cast<double>(static_cast<float>(x));
  });
}

}  // namespace kriss
