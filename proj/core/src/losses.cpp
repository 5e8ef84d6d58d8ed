#include "kriss/losses.hpp"

#include <cmath>
#include <limits>

#include "kriss/error.hpp"

namespace kriss {

namespace {

void check_batch(const Matrix& mentions) {
  if (mentions.rows() < 2 || mentions.rows() % 2 != 0) {
    throw DataError("mention batch needs an even number (>= 2) of rows, got " + std::to_string(mentions.rows()));
  }
}

}  // namespace

double info_nce_pair_loss(std::size_t i, std::size_t j, const Matrix& vectors, double tau) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (i == j || i >= n || j >= n) throw DataError("info_nce_pair_loss needs distinct in-range indices");
  const auto ii = static_cast<Eigen::Index>(i);
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(n);
  for (std::size_t k = 0; k < n; ++k) {
    logits[k] = vectors.row(ii).dot(vectors.row(static_cast<Eigen::Index>(k))) / tau;
    if (k != i) mx = std::max(mx, logits[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k != i) sum += std::exp(logits[k] - mx);
  }
  return mx + std::log(sum) - logits[j];
}

double mention_pair_loss(const Matrix& mentions, double tau, Matrix* grad) {
  check_batch(mentions);
  const Eigen::Index m = mentions.rows();
  Matrix logits = mentions * mentions.transpose() / tau;
  Matrix weights = Matrix::Zero(m, m);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index partner = i ^ 1;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k != i) mx = std::max(mx, logits(i, k));
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k != i) sum += std::exp(logits(i, k) - mx);
    }
    total += mx + std::log(sum) - logits(i, partner);
    if (grad != nullptr) {
      for (Eigen::Index k = 0; k < m; ++k) {
        if (k != i) weights(i, k) = std::exp(logits(i, k) - mx) / sum;
      }
      weights(i, partner) -= 1.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(m);
  if (grad != nullptr) {
    weights *= inv / tau;
    *grad = weights * mentions + weights.transpose() * mentions;
  }
  return total * inv;
}

double mention_reference_loss(const Matrix& mentions, const Matrix& references, double pi, Matrix* grad_mentions,
                              Matrix* grad_references) {
  check_batch(mentions);
  const Eigen::Index m = mentions.rows();
  const Eigen::Index n = references.rows();
  if (n * 2 != m) throw DataError("reference batch must hold one row per mention pair");
  Matrix logits = mentions * references.transpose() / pi;
  Matrix weights = Matrix::Zero(m, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index own = i / 2;
    const double mx = logits.row(i).maxCoeff();
    const double sum = (logits.row(i).array() - mx).exp().sum();
    total += mx + std::log(sum) - logits(i, own);
    weights.row(i) = (logits.row(i).array() - mx).exp() / sum;
    weights(i, own) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(m);
  weights *= inv / pi;
  if (grad_mentions != nullptr) *grad_mentions = weights * references;
  if (grad_references != nullptr) *grad_references = weights.transpose() * mentions;
  return total * inv;
}

LossBreakdown joint_loss(const Minibatch& batch, const LossWeights& w) {
  LossBreakdown out;
  out.mention_pair_loss = mention_pair_loss(batch.mentions, w.tau);
  out.reference_loss = mention_reference_loss(batch.mentions, batch.references, w.pi);
  out.joint = w.alpha * out.mention_pair_loss + w.beta * out.reference_loss;
  return out;
}

LossGradients joint_loss_with_gradients(const Minibatch& batch, const LossWeights& w) {
  LossGradients g;
  Matrix d_pair, d_ref_m;
  g.loss.mention_pair_loss = mention_pair_loss(batch.mentions, w.tau, &d_pair);
  g.loss.reference_loss = mention_reference_loss(batch.mentions, batch.references, w.pi, &d_ref_m, &g.d_references);
  g.loss.joint = w.alpha * g.loss.mention_pair_loss + w.beta * g.loss.reference_loss;
  g.d_mentions = w.alpha * d_pair + w.beta * d_ref_m;
  g.d_references *= w.beta;
  return g;
}

}  // namespace kriss
