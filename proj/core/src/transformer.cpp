#include "kriss/transformer.hpp"

#include <cmath>

#include "kriss/error.hpp"
#include "kriss/mentions.hpp"
#include "kriss/ontology.hpp"

namespace kriss {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void layer_norm(const Matrix& x, const RowVector& gain, const RowVector& bias, Matrix& xhat, Vector& rstd,
                Matrix& y) {
  const auto n = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mean).square().sum() / n;
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
  y = (xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& rstd, const RowVector& gain) {
  const auto n = static_cast<double>(dy.cols());
  Matrix dxhat = dy.array().rowwise() * gain.array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() / n;
    const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
  }
  return dx;
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

template <typename Fn>
void visit_impl(auto& p, Fn&& fn) {
  fn(std::string("token_embedding"), p.token_embedding);
  fn(std::string("position_embedding"), p.position_embedding);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "block" + std::to_string(i) + ".";
    fn(pre + "wq", b.wq);
    fn(pre + "bq", b.bq);
    fn(pre + "wk", b.wk);
    fn(pre + "bk", b.bk);
    fn(pre + "wv", b.wv);
    fn(pre + "bv", b.bv);
    fn(pre + "wo", b.wo);
    fn(pre + "bo", b.bo);
    fn(pre + "ln1_gain", b.ln1_gain);
    fn(pre + "ln1_bias", b.ln1_bias);
    fn(pre + "w1", b.w1);
    fn(pre + "b1", b.b1);
    fn(pre + "w2", b.w2);
    fn(pre + "b2", b.b2);
    fn(pre + "ln2_gain", b.ln2_gain);
    fn(pre + "ln2_bias", b.ln2_bias);
  }
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw UsageError("encoder dim " + std::to_string(dim) + " must be a positive multiple of heads " +
                     std::to_string(heads));
  }
  if (layers == 0) throw UsageError("encoder needs at least one layer");
  if (max_len < 8) throw UsageError("encoder max_len must be >= 8");
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config, std::size_t vocab_size) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto f = static_cast<Eigen::Index>(config.ffn_dim());
  EncoderParams p;
  p.config = config;
  p.vocab_size = vocab_size;
  p.token_embedding = Matrix::Zero(static_cast<Eigen::Index>(vocab_size), d);
  p.position_embedding = Matrix::Zero(config.max_len, d);
  p.blocks.resize(config.layers);
  for (auto& b : p.blocks) {
    b.wq = b.wk = b.wv = b.wo = Matrix::Zero(d, d);
    b.bq = b.bk = b.bv = b.bo = RowVector::Zero(d);
    b.ln1_gain = b.ln1_bias = b.ln2_gain = b.ln2_bias = RowVector::Zero(d);
    b.w1 = Matrix::Zero(d, f);
    b.b1 = RowVector::Zero(f);
    b.w2 = Matrix::Zero(f, d);
    b.b2 = RowVector::Zero(d);
  }
  return p;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, std::size_t vocab_size, std::uint64_t seed) {
  EncoderParams p = zeros(config, vocab_size);
  Rng rng(seed);
  p.visit([&](const std::string& name, std::span<double> t) {
    const std::string leaf = name.substr(name.rfind('.') + 1);
    if (ends_with(leaf, "_gain")) {
      std::fill(t.begin(), t.end(), 1.0);
    } else if (ends_with(leaf, "_bias") || leaf.front() == 'b') {
      // zero
    } else {
      for (auto& x : t) x = static_cast<double>(uniform_float(rng, -0.02f, 0.02f));
    }
  });
  return p;
}

void EncoderParams::visit(const std::function<void(const std::string&, std::span<double>)>& fn) {
  visit_impl(*this, [&](const std::string& name, auto& t) { fn(name, std::span<double>(t.data(), t.size())); });
}

void EncoderParams::visit(const std::function<void(const std::string&, std::span<const double>)>& fn) const {
  visit_impl(*this,
             [&](const std::string& name, const auto& t) { fn(name, std::span<const double>(t.data(), t.size())); });
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, std::span<const double> t) { n += t.size(); });
  return n;
}

void EncoderParams::set_zero() {
  visit([](const std::string&, std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
}

Vector TransformerEncoder::encode(const EncoderParams& params, const TokenSequence& tokens) {
  ForwardCache cache;
  return forward(params, tokens, cache);
}

Vector TransformerEncoder::forward(const EncoderParams& params, const TokenSequence& tokens, ForwardCache& cache) {
  const auto& cfg = params.config;
  if (tokens.empty()) throw DataError("cannot encode an empty sequence");
  if (tokens.size() > cfg.max_len) {
    throw DataError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_len " +
                    std::to_string(cfg.max_len));
  }
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const TokenId id = tokens[static_cast<std::size_t>(t)];
    if (id < 0 || static_cast<std::size_t>(id) >= params.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(params.vocab_size));
    }
    x.row(t) = params.token_embedding.row(id) + params.position_embedding.row(t);
  }

  cache.tokens = tokens;
  cache.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const BlockParams& b = params.blocks[l];
    BlockCache& c = cache.blocks[l];
    c.x = std::move(x);
    c.q = (c.x * b.wq).rowwise() + b.bq;
    c.k = (c.x * b.wk).rowwise() + b.bk;
    c.v = (c.x * b.wv).rowwise() + b.bv;
    c.attn.resize(T, d);
    c.probs.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix& p = c.probs[static_cast<std::size_t>(h)];
      p = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(p);
      c.attn.middleCols(h * dh, dh).noalias() = p * c.v.middleCols(h * dh, dh);
    }
    Matrix s1 = c.x + ((c.attn * b.wo).rowwise() + b.bo);
    layer_norm(s1, b.ln1_gain, b.ln1_bias, c.xhat1, c.rstd1, c.n1);
    c.h_pre = (c.n1 * b.w1).rowwise() + b.b1;
    c.h_act = c.h_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix s2 = c.n1 + ((c.h_act * b.w2).rowwise() + b.b2);
    layer_norm(s2, b.ln2_gain, b.ln2_bias, c.xhat2, c.rstd2, c.out);
    x = c.out;
  }
  return x.row(0).transpose();
}

void TransformerEncoder::backward(const EncoderParams& params, const ForwardCache& cache, const Vector& d_output,
                                  EncoderParams& grads) {
  const auto& cfg = params.config;
  const auto T = static_cast<Eigen::Index>(cache.tokens.size());
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = Matrix::Zero(T, d);
  dx.row(0) = d_output.transpose();

  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const BlockParams& b = params.blocks[l];
    const BlockCache& c = cache.blocks[l];
    BlockParams& g = grads.blocks[l];

    // Second sublayer: out = LN2(n1 + ffn(n1)).
    g.ln2_gain += (dx.array() * c.xhat2.array()).matrix().colwise().sum();
    g.ln2_bias += dx.colwise().sum();
    Matrix ds2 = layer_norm_backward(dx, c.xhat2, c.rstd2, b.ln2_gain);
    g.w2.noalias() += c.h_act.transpose() * ds2;
    g.b2 += ds2.colwise().sum();
    Matrix dh_pre = ds2 * b.w2.transpose();
    for (Eigen::Index r = 0; r < dh_pre.rows(); ++r) {
      for (Eigen::Index k = 0; k < dh_pre.cols(); ++k) dh_pre(r, k) *= gelu_grad(c.h_pre(r, k));
    }
    g.w1.noalias() += c.n1.transpose() * dh_pre;
    g.b1 += dh_pre.colwise().sum();
    Matrix dn1 = ds2;
    dn1.noalias() += dh_pre * b.w1.transpose();

    // First sublayer: n1 = LN1(x + attention(x)).
    g.ln1_gain += (dn1.array() * c.xhat1.array()).matrix().colwise().sum();
    g.ln1_bias += dn1.colwise().sum();
    Matrix ds1 = layer_norm_backward(dn1, c.xhat1, c.rstd1, b.ln1_gain);
    g.wo.noalias() += c.attn.transpose() * ds1;
    g.bo += ds1.colwise().sum();
    Matrix dattn = ds1 * b.wo.transpose();

    Matrix dq(T, d), dk(T, d), dv(T, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& p = c.probs[static_cast<std::size_t>(h)];
      const auto dctx = dattn.middleCols(h * dh, dh);
      Matrix dp = dctx * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dctx;
      Matrix ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
      dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh) * scale;
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh) * scale;
    }
    g.wq.noalias() += c.x.transpose() * dq;
    g.wk.noalias() += c.x.transpose() * dk;
    g.wv.noalias() += c.x.transpose() * dv;
    g.bq += dq.colwise().sum();
    g.bk += dk.colwise().sum();
    g.bv += dv.colwise().sum();

    dx = ds1;
    dx.noalias() += dq * b.wq.transpose();
    dx.noalias() += dk * b.wk.transpose();
    dx.noalias() += dv * b.wv.transpose();
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    grads.token_embedding.row(cache.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    grads.position_embedding.row(t) += dx.row(t);
  }
}

BiEncoder BiEncoder::initialize(Vocabulary vocab, const EncoderConfig& config) {
  BiEncoder m;
  const std::size_t v = vocab.size();
  m.vocab = std::move(vocab);
  m.mention = EncoderParams::initialize(config, v, derive_seed(config.seed, 0));
  m.reference = EncoderParams::initialize(config, v, derive_seed(config.seed, 1));
  return m;
}

Vector encode_mention(const TokenSequence& sequence, const EncoderParams& params) {
  return TransformerEncoder::encode(params, sequence);
}

Vector encode_mention(const MentionExample& example, const BiEncoder& model) {
  return TransformerEncoder::encode(model.mention, tokenize_mention(example, model.vocab, model.config().max_len));
}

Vector encode_reference(const Entity& entity, const BiEncoder& model, bool include_description) {
  return TransformerEncoder::encode(
      model.reference, tokenize_reference(entity, model.vocab, model.config().max_len, include_description));
}

}  // namespace kriss
