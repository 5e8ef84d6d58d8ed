#pragma once

#include <filesystem>
#include <string>

#include "kriss/pipeline.hpp"
#include "kriss/synthetic.hpp"

namespace kriss::fixture {

/// A scaled-down synthetic world with its generated mention store.
struct SmallWorld {
  SyntheticWorld world;
  MentionStore mentions;
};

inline SmallWorld small_world(std::size_t entities = 12, std::size_t documents = 600, std::uint64_t seed = 3) {
  SyntheticConfig c;
  c.entities = entities;
  c.documents = documents;
  c.shared_alias_pairs = 2;
  c.seed = seed;
  SmallWorld w{make_synthetic_world(c), {}};
  generate_mentions(w.world.catalog, w.world.corpus, {c.window, true}, w.mentions);
  return w;
}

inline EncoderConfig tiny_encoder(std::uint64_t seed = 1) {
  EncoderConfig e;
  e.dim = 16;
  e.layers = 1;
  e.heads = 2;
  e.max_len = 48;
  e.seed = seed;
  return e;
}

/// Replaces every parameter with a draw around its initial role (gains near 1,
/// everything else near 0) so attention and feed-forward paths carry gradient
/// well above finite-difference noise.
inline void randomize(EncoderParams& p, Rng& rng, double spread = 0.3) {
  p.visit([&](const std::string& name, std::span<double> w) {
    const double centre = name.find("gain") != std::string::npos ? 1.0 : 0.0;
    for (double& x : w) x = centre + spread * (2.0 * uniform_unit(rng) - 1.0);
  });
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("kriss_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace kriss::fixture
