#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kriss/transformer.hpp"

namespace kriss {

/// Encoded minibatch. Rows 2k and 2k+1 of `mentions` (0-based) belong to
/// entity_ids[k], whose reference vector is row k of `references`.
struct Minibatch {
  Matrix mentions;    // 2N x dim
  Matrix references;  // N x dim
  std::vector<std::string> entity_ids;

  std::size_t entity_count() const { return static_cast<std::size_t>(references.rows()); }
};

struct LossBreakdown {
  double mention_pair_loss = 0.0;  // mention-mention InfoNCE, averaged over the 2N directed positives
  double reference_loss = 0.0;     // mention-reference InfoNCE, averaged over the 2N mentions
  double joint = 0.0;              // alpha * mention_pair_loss + beta * reference_loss

  bool operator==(const LossBreakdown&) const = default;
};

struct LossWeights {
  double tau = 1.0;
  double pi = 1.0;
  double alpha = 0.5;
  double beta = 0.5;
};

/// -log( exp(c_i.c_j / tau) / sum_{k != i} exp(c_i.c_k / tau) ) over the rows
/// of `vectors`; 0-based indices, i != j.
double info_nce_pair_loss(std::size_t i, std::size_t j, const Matrix& vectors, double tau);

/// Mean over k of the two directed pair losses for rows (2k, 2k+1). When
/// `grad` is given it receives d(loss)/d(mentions).
double mention_pair_loss(const Matrix& mentions, double tau, Matrix* grad = nullptr);

/// Mean over mentions of -log softmax_k(c_i . r_k / pi) at the mention's own
/// reference. Gradients are written when the pointers are non-null.
double mention_reference_loss(const Matrix& mentions, const Matrix& references, double pi,
                              Matrix* grad_mentions = nullptr, Matrix* grad_references = nullptr);

struct LossGradients {
  LossBreakdown loss;
  Matrix d_mentions;
  Matrix d_references;
};

LossBreakdown joint_loss(const Minibatch& batch, const LossWeights& weights);
LossGradients joint_loss_with_gradients(const Minibatch& batch, const LossWeights& weights);

}  // namespace kriss
