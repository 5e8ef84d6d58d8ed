#include "kriss/trainer.hpp"

#include <cmath>
#include <sstream>

#include "kriss/augment.hpp"
#include "kriss/error.hpp"
#include "kriss/io.hpp"

namespace kriss {

void TrainConfig::validate() const {
  if (batch_entities < 1) throw UsageError("N must be >= 1");
  if (!(tau > 0.0) || !(pi > 0.0)) throw UsageError("temperatures tau and pi must be > 0");
  if (alpha < 0.0 || beta < 0.0) throw UsageError("loss weights must be >= 0");
  if (p_mask < 0.0 || p_mask > 1.0 || p_replace < 0.0 || p_replace > 1.0) {
    throw UsageError("augmentation probabilities must lie in [0, 1]");
  }
  if (lr < 0.0) throw UsageError("lr must be >= 0");
  if (train_cap < 2) throw UsageError("train_cap must be >= 2 to form positive pairs");
  encoder.validate();
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  std::istringstream in{std::string(value)};
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) throw UsageError("bad value '" + std::string(value) + "' for key " + std::string(key));
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw UsageError("bad boolean '" + std::string(value) + "' for key " + std::string(key));
}

}  // namespace

bool set_train_config_key(TrainConfig& c, std::string_view key, std::string_view value) {
  if (key == "N") c.batch_entities = parse_number<std::size_t>(key, value);
  else if (key == "tau") c.tau = parse_number<double>(key, value);
  else if (key == "pi") c.pi = parse_number<double>(key, value);
  else if (key == "alpha") c.alpha = parse_number<double>(key, value);
  else if (key == "beta") c.beta = parse_number<double>(key, value);
  else if (key == "p_mask") c.p_mask = parse_number<double>(key, value);
  else if (key == "p_replace") c.p_replace = parse_number<double>(key, value);
  else if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "steps") c.steps = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.seed = c.encoder.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "init_seed") c.encoder.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "log_every") c.log_every = parse_number<std::size_t>(key, value);
  else if (key == "train_cap") c.train_cap = parse_number<std::size_t>(key, value);
  else if (key == "min_freq") c.min_freq = parse_number<std::size_t>(key, value);
  else if (key == "window") c.window = parse_number<std::size_t>(key, value);
  else if (key == "use_description") c.use_description = parse_bool(key, value);
  else if (key == "dim") c.encoder.dim = parse_number<std::uint32_t>(key, value);
  else if (key == "layers") c.encoder.layers = parse_number<std::uint32_t>(key, value);
  else if (key == "heads") c.encoder.heads = parse_number<std::uint32_t>(key, value);
  else if (key == "max_len") c.encoder.max_len = parse_number<std::uint32_t>(key, value);
  else return false;
  return true;
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  io::for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!set_train_config_key(c, key, value)) {
      throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  });
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) { return parse_train_config(io::read_file(path)); }

std::string serialize_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "N = " << c.batch_entities << "\n"
      << "tau = " << c.tau << "\n"
      << "pi = " << c.pi << "\n"
      << "alpha = " << c.alpha << "\n"
      << "beta = " << c.beta << "\n"
      << "p_mask = " << c.p_mask << "\n"
      << "p_replace = " << c.p_replace << "\n"
      << "lr = " << c.lr << "\n"
      << "steps = " << c.steps << "\n"
      << "seed = " << c.seed << "\n"
      << "init_seed = " << c.encoder.seed << "\n"
      << "log_every = " << c.log_every << "\n"
      << "train_cap = " << c.train_cap << "\n"
      << "min_freq = " << c.min_freq << "\n"
      << "window = " << c.window << "\n"
      << "use_description = " << (c.use_description ? "on" : "off") << "\n"
      << "dim = " << c.encoder.dim << "\n"
      << "layers = " << c.encoder.layers << "\n"
      << "heads = " << c.encoder.heads << "\n"
      << "max_len = " << c.encoder.max_len << "\n";
  return out.str();
}

std::vector<std::string> eligible_entities(const MentionStore& store, const EntityCatalog& catalog) {
  std::vector<std::string> out;
  for (const auto& [id, n] : store.counts()) {
    if (n >= 2 && catalog.contains(id)) out.push_back(id);
  }
  return out;
}

RawMinibatch sample_minibatch(const MentionStore& store, const EntityCatalog& catalog, const Vocabulary& vocab,
                              const TrainConfig& config, Rng& rng) {
  const auto eligible = eligible_entities(store, catalog);
  const std::size_t n = config.batch_entities;
  if (eligible.size() < n) {
    throw DataError("need " + std::to_string(n) + " entities with >= 2 mentions, found " +
                    std::to_string(eligible.size()));
  }
  const auto groups = store.by_entity();
  const auto max_len = config.encoder.max_len;

  RawMinibatch batch;
  for (std::size_t slot : sample_without_replacement(rng, eligible.size(), n)) {
    const std::string& id = eligible[slot];
    const auto& members = groups.at(id);
    batch.entity_ids.push_back(id);
    for (std::size_t pick : sample_without_replacement(rng, members.size(), 2)) {
      MentionExample m = apply_replacement_augmentation(store[members[pick]], catalog, config.p_replace, rng);
      batch.mentions.push_back(apply_mask_augmentation(tokenize_mention(m, vocab, max_len), config.p_mask, rng));
    }
    batch.references.push_back(tokenize_reference(catalog.at(id), vocab, max_len, config.use_description));
  }
  return batch;
}

MentionStore prepare_training_store(const MentionStore& store, const EntityCatalog& catalog,
                                    const TrainConfig& config) {
  return cap_per_entity(restrict_to_catalog(store, catalog), config.train_cap);
}

AdamOptimizer::AdamOptimizer(const EncoderParams& shape)
    : m_(EncoderParams::zeros(shape.config, shape.vocab_size)), v_(EncoderParams::zeros(shape.config, shape.vocab_size)) {}

void AdamOptimizer::step(EncoderParams& params, const EncoderParams& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  std::vector<std::span<double>> p, m, v;
  std::vector<std::span<const double>> g;
  params.visit([&](const std::string&, std::span<double> t) { p.push_back(t); });
  m_.visit([&](const std::string&, std::span<double> t) { m.push_back(t); });
  v_.visit([&](const std::string&, std::span<double> t) { v.push_back(t); });
  grads.visit([&](const std::string&, std::span<const double> t) { g.push_back(t); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      const double gi = g[k][i];
      m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * gi;
      v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * gi * gi;
      p[k][i] -= lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + eps);
    }
  }
}

Trainer::Trainer(BiEncoder model, TrainConfig config)
    : model_(std::move(model)),
      config_(std::move(config)),
      adam_mention_(model_.mention),
      adam_reference_(model_.reference) {
  config_.validate();
}

Minibatch Trainer::encode(const RawMinibatch& raw) const {
  Minibatch b;
  const auto d = static_cast<Eigen::Index>(model_.config().dim);
  b.entity_ids = raw.entity_ids;
  b.mentions.resize(static_cast<Eigen::Index>(raw.mentions.size()), d);
  b.references.resize(static_cast<Eigen::Index>(raw.references.size()), d);
  for (std::size_t i = 0; i < raw.mentions.size(); ++i) {
    b.mentions.row(static_cast<Eigen::Index>(i)) = encode_mention(raw.mentions[i], model_.mention).transpose();
  }
  for (std::size_t i = 0; i < raw.references.size(); ++i) {
    b.references.row(static_cast<Eigen::Index>(i)) =
        TransformerEncoder::encode(model_.reference, raw.references[i]).transpose();
  }
  return b;
}

LossBreakdown Trainer::evaluate(const RawMinibatch& raw) const { return joint_loss(encode(raw), config_.weights()); }

LossBreakdown Trainer::gradients(const RawMinibatch& raw, EncoderParams& gm, EncoderParams& gr) const {
  const auto d = static_cast<Eigen::Index>(model_.config().dim);
  std::vector<ForwardCache> mention_caches(raw.mentions.size());
  std::vector<ForwardCache> reference_caches(raw.references.size());
  Minibatch b;
  b.entity_ids = raw.entity_ids;
  b.mentions.resize(static_cast<Eigen::Index>(raw.mentions.size()), d);
  b.references.resize(static_cast<Eigen::Index>(raw.references.size()), d);
  for (std::size_t i = 0; i < raw.mentions.size(); ++i) {
    b.mentions.row(static_cast<Eigen::Index>(i)) =
        TransformerEncoder::forward(model_.mention, raw.mentions[i], mention_caches[i]).transpose();
  }
  for (std::size_t i = 0; i < raw.references.size(); ++i) {
    b.references.row(static_cast<Eigen::Index>(i)) =
        TransformerEncoder::forward(model_.reference, raw.references[i], reference_caches[i]).transpose();
  }
  const LossGradients lg = joint_loss_with_gradients(b, config_.weights());
  gm = EncoderParams::zeros(model_.mention.config, model_.mention.vocab_size);
  gr = EncoderParams::zeros(model_.reference.config, model_.reference.vocab_size);
  for (std::size_t i = 0; i < mention_caches.size(); ++i) {
    TransformerEncoder::backward(model_.mention, mention_caches[i],
                                 lg.d_mentions.row(static_cast<Eigen::Index>(i)).transpose(), gm);
  }
  if (config_.beta != 0.0) {
    for (std::size_t i = 0; i < reference_caches.size(); ++i) {
      TransformerEncoder::backward(model_.reference, reference_caches[i],
                                   lg.d_references.row(static_cast<Eigen::Index>(i)).transpose(), gr);
    }
  }
  return lg.loss;
}

namespace {

void require_finite(const EncoderParams& grads, std::string_view which) {
  grads.visit([&](const std::string& name, std::span<const double> t) {
    for (double x : t) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + std::string(which) + "." + name);
    }
  });
}

}  // namespace

LossBreakdown Trainer::train_step(const RawMinibatch& raw) {
  EncoderParams gm, gr;
  const LossBreakdown loss = gradients(raw, gm, gr);
  require_finite(gm, "mention");
  require_finite(gr, "reference");
  if (!std::isfinite(loss.joint)) throw NumericError("non-finite joint loss");
  adam_mention_.step(model_.mention, gm, config_.lr);
  adam_reference_.step(model_.reference, gr, config_.lr);
  return loss;
}

std::string serialize_loss_log(const std::vector<LossLogEntry>& log) {
  std::ostringstream out;
  out.precision(9);
  out << "step\tL\tLprime\tjoint\n";
  for (const auto& e : log) {
    out << e.step << '\t' << e.loss.mention_pair_loss << '\t' << e.loss.reference_loss << '\t' << e.loss.joint
        << '\n';
  }
  return out.str();
}

TrainResult train_loop(const MentionStore& store, const EntityCatalog& catalog, const TrainConfig& config) {
  config.validate();
  const MentionStore train = prepare_training_store(store, catalog, config);
  Vocabulary vocab = Vocabulary::build(restrict_to_catalog(store, catalog), config.min_freq, &catalog);
  Trainer trainer(BiEncoder::initialize(std::move(vocab), config.encoder), config);
  Rng rng(derive_seed(config.seed, 7));

  TrainResult result;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const RawMinibatch batch = sample_minibatch(train, catalog, trainer.model().vocab, config, rng);
    const LossBreakdown loss = trainer.train_step(batch);
    const bool log_now = step == 0 || step + 1 == config.steps || (config.log_every > 0 && step % config.log_every == 0);
    if (log_now) result.log.push_back({step, loss});
  }
  result.model = std::move(trainer.model());
  return result;
}

}  // namespace kriss
