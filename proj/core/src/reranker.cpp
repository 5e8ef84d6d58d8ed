#include "kriss/reranker.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "kriss/checkpoint.hpp"
#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/rng.hpp"
#include "kriss/trainer.hpp"

namespace kriss {

RerankModel RerankModel::from_encoder(Vocabulary vocab, const EncoderParams& init) {
  RerankModel m;
  m.vocab = std::move(vocab);
  m.encoder = init;
  m.head_weight = Vector::Zero(init.config.dim);
  m.head_bias = 0.0;
  return m;
}

TokenSequence build_cross_input(const MentionExample& query, const MentionExample& candidate,
                                const Vocabulary& vocab, std::size_t max_len) {
  MarkedTokens q = mark_tokens(query, vocab);
  MarkedTokens c = mark_tokens(candidate, vocab);
  const std::size_t skeleton = 7 + q.mention.size() + c.mention.size();
  if (skeleton > max_len) {
    throw DataError("cross input skeleton of " + std::to_string(skeleton) + " tokens exceeds max_len " +
                    std::to_string(max_len));
  }
  std::array<TokenSequence*, 4> lists = {&q.left, &q.right, &c.left, &c.right};
  const std::array<bool, 4> outer = {true, false, true, false};
  trim_contexts(lists, outer, max_len - skeleton);

  TokenSequence seq;
  seq.push_back(token::cls);
  for (const MarkedTokens* half : {&q, &c}) {
    seq.insert(seq.end(), half->left.begin(), half->left.end());
    seq.push_back(token::mention_start);
    seq.insert(seq.end(), half->mention.begin(), half->mention.end());
    seq.push_back(token::mention_end);
    seq.insert(seq.end(), half->right.begin(), half->right.end());
    seq.push_back(token::sep);
  }
  return seq;
}

TokenSequence build_cross_input(const MentionExample& query, const Entity& candidate, const Vocabulary& vocab,
                                std::size_t max_len) {
  MarkedTokens q = mark_tokens(query, vocab);
  TokenSequence ref = tokenize_reference(candidate, vocab, max_len);
  ref.erase(ref.begin());  // drop the reference's own [CLS]
  const std::size_t q_skeleton = 4 + q.mention.size();
  if (q_skeleton + 1 > max_len) throw DataError("cross input query skeleton exceeds max_len");
  // Reference tokens keep priority over query context only up to half the budget.
  const std::size_t ref_budget = std::max<std::size_t>(1, std::min(ref.size(), (max_len - q_skeleton) / 2));
  if (ref.size() > ref_budget) {
    ref.resize(ref_budget);
    ref.back() = token::sep;
  }
  std::array<TokenSequence*, 2> lists = {&q.left, &q.right};
  const std::array<bool, 2> outer = {true, false};
  trim_contexts(lists, outer, max_len - q_skeleton - ref.size());

  TokenSequence seq;
  seq.push_back(token::cls);
  seq.insert(seq.end(), q.left.begin(), q.left.end());
  seq.push_back(token::mention_start);
  seq.insert(seq.end(), q.mention.begin(), q.mention.end());
  seq.push_back(token::mention_end);
  seq.insert(seq.end(), q.right.begin(), q.right.end());
  seq.push_back(token::sep);
  seq.insert(seq.end(), ref.begin(), ref.end());
  return seq;
}

double rerank_score(const TokenSequence& sequence, const RerankModel& model) {
  return model.head_weight.dot(TransformerEncoder::encode(model.encoder, sequence)) + model.head_bias;
}

double rerank_cross_entropy(std::span<const double> scores, std::size_t gold) {
  if (gold >= scores.size()) throw DataError("gold position outside candidate list");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return mx + std::log(sum) - scores[gold];
}

LinkResult rerank(const LinkResult& result, const MentionExample& query, const PairScorer& scorer, std::size_t depth) {
  LinkResult out = result;
  const auto head_end = out.candidates.begin() + static_cast<std::ptrdiff_t>(std::min(depth, out.candidates.size()));
  for (auto it = out.candidates.begin(); it != head_end; ++it) it->score = scorer(query, *it);
  std::stable_sort(out.candidates.begin(), head_end, [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.entity_id < b.entity_id;
  });
  return out;
}

namespace {

TokenSequence candidate_input(const MentionExample& query, const Candidate& cand, const RerankModel& model,
                              const VectorIndex& index, const EntityCatalog& catalog, CandidateText text) {
  const std::size_t max_len = model.encoder.config.max_len;
  if (text == CandidateText::prototype && cand.prototype) {
    return build_cross_input(query, index.meta(*cand.prototype).example, model.vocab, max_len);
  }
  return build_cross_input(query, catalog.at(cand.entity_id), model.vocab, max_len);
}

}  // namespace

PairScorer model_scorer(const RerankModel& model, const VectorIndex& index, const EntityCatalog& catalog,
                        CandidateText text) {
  return [&model, &index, &catalog, text](const MentionExample& query, const Candidate& cand) {
    return rerank_score(candidate_input(query, cand, model, index, catalog, text), model);
  };
}

RerankTrainResult train_reranker(const MentionStore& mentions, const VectorIndex& index, const BiEncoder& bi,
                                 const EntityCatalog& catalog, const RerankConfig& config) {
  if (config.k == 0) throw UsageError("re-ranking K must be >= 1");
  RerankTrainResult result;
  result.model = RerankModel::from_encoder(bi.vocab, bi.mention);

  struct Example {
    std::size_t query;
    LinkResult candidates;
    std::size_t gold;
  };
  std::vector<Example> examples;
  LinkOptions opts;
  opts.top_k = config.k;
  opts.fusion = config.fusion;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const MentionExample& q = mentions[i];
    opts.exclude = &q;
    LinkResult r = link(index, to_float(encode_mention(q, bi)), opts);
    auto it = std::find_if(r.candidates.begin(), r.candidates.end(),
                           [&](const Candidate& c) { return c.entity_id == q.entity_id; });
    if (it == r.candidates.end()) {
      ++result.skipped_queries;
      continue;
    }
    const auto gold = static_cast<std::size_t>(it - r.candidates.begin());
    examples.push_back({i, std::move(r), gold});
  }
  result.usable_queries = examples.size();
  if (examples.empty()) throw DataError("no re-ranking examples: gold entity never retrieved in the top K");

  RerankModel& model = result.model;
  AdamOptimizer adam(model.encoder);
  Vector head_m = Vector::Zero(model.head_weight.size()), head_v = head_m;
  double bias_m = 0.0, bias_v = 0.0;
  Rng rng(config.seed);

  for (std::size_t step = 0; step < config.steps; ++step) {
    EncoderParams grads = EncoderParams::zeros(model.encoder.config, model.encoder.vocab_size);
    Vector head_grad = Vector::Zero(model.head_weight.size());
    double bias_grad = 0.0;
    double batch_loss = 0.0;
    const std::size_t b = std::min(config.batch_queries, examples.size());
    for (std::size_t pick : sample_without_replacement(rng, examples.size(), b)) {
      const Example& ex = examples[pick];
      const MentionExample& q = mentions[ex.query];
      const std::size_t k = ex.candidates.candidates.size();
      std::vector<ForwardCache> caches(k);
      std::vector<Vector> states(k);
      std::vector<double> scores(k);
      for (std::size_t j = 0; j < k; ++j) {
        auto seq = candidate_input(q, ex.candidates.candidates[j], model, index, catalog, config.text);
        states[j] = TransformerEncoder::forward(model.encoder, seq, caches[j]);
        scores[j] = model.head_weight.dot(states[j]) + model.head_bias;
      }
      batch_loss += rerank_cross_entropy(scores, ex.gold);
      const double mx = *std::max_element(scores.begin(), scores.end());
      double sum = 0.0;
      for (double s : scores) sum += std::exp(s - mx);
      for (std::size_t j = 0; j < k; ++j) {
        const double d = (std::exp(scores[j] - mx) / sum - (j == ex.gold ? 1.0 : 0.0)) / static_cast<double>(b);
        head_grad += d * states[j];
        bias_grad += d;
        TransformerEncoder::backward(model.encoder, caches[j], d * model.head_weight, grads);
      }
    }
    result.loss_log.push_back(batch_loss / static_cast<double>(b));

    adam.step(model.encoder, grads, config.lr);
    // Adam for the head, same constants as AdamOptimizer.
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
    head_m = 0.9 * head_m + 0.1 * head_grad;
    head_v = 0.999 * head_v + 0.001 * head_grad.cwiseProduct(head_grad);
    model.head_weight.array() -= config.lr * (head_m.array() / c1) / ((head_v.array() / c2).sqrt() + 1e-8);
    bias_m = 0.9 * bias_m + 0.1 * bias_grad;
    bias_v = 0.999 * bias_v + 0.001 * bias_grad * bias_grad;
    model.head_bias -= config.lr * (bias_m / c1) / (std::sqrt(bias_v / c2) + 1e-8);
  }
  return result;
}

void save_reranker(const RerankModel& model, const std::filesystem::path& path) {
  std::vector<double> extra(model.head_weight.data(), model.head_weight.data() + model.head_weight.size());
  extra.push_back(model.head_bias);
  io::write_file(path, encode_checkpoint(ModelKind::reranker, {&model.encoder}, extra));
  model.vocab.save(vocabulary_path(path));
}

RerankModel load_reranker(const std::filesystem::path& path) {
  auto c = decode_checkpoint(io::read_file(path));
  if (c.kind != ModelKind::reranker || c.encoders.size() != 1 || c.extra.size() != c.config.dim + 1) {
    throw DataError(path.string() + " is not a re-ranker checkpoint");
  }
  RerankModel m;
  m.vocab = Vocabulary::load(vocabulary_path(path));
  if (m.vocab.size() != c.vocab_size) throw DataError("vocabulary size does not match checkpoint " + path.string());
  m.encoder = std::move(c.encoders[0]);
  m.head_weight = Eigen::Map<const Vector>(c.extra.data(), c.config.dim);
  m.head_bias = c.extra.back();
  return m;
}

}  // namespace kriss
