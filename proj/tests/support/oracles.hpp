#pragma once

// Reference implementations used only by tests. Each one is written the slow,
// obvious way and shares no code with the library routine it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "kriss/matcher.hpp"
#include "kriss/prototype_index.hpp"
#include "kriss/transformer.hpp"

namespace kriss::oracle {

using Rows = std::vector<std::vector<long double>>;

inline Rows to_rows(const Matrix& m) {
  Rows r(static_cast<std::size_t>(m.rows()), std::vector<long double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  }
  return r;
}

inline long double dot(const std::vector<long double>& a, const std::vector<long double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline long double info_nce(std::size_t i, std::size_t j, const Rows& c, long double tau) {
  long double denom = 0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (k != i) denom += std::exp(dot(c[i], c[k]) / tau);
  }
  return -std::log(std::exp(dot(c[i], c[j]) / tau) / denom);
}

/// Rows (2k, 2k+1) are the positive pairs.
inline long double mention_pair_loss(const Rows& c, long double tau) {
  long double sum = 0;
  for (std::size_t k = 0; k + 1 < c.size(); k += 2) sum += info_nce(k, k + 1, c, tau) + info_nce(k + 1, k, c, tau);
  return sum / static_cast<long double>(c.size());
}

inline long double reference_loss(const Rows& c, const Rows& r, long double pi) {
  long double sum = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    long double denom = 0;
    for (const auto& ref : r) denom += std::exp(dot(c[i], ref) / pi);
    sum += -std::log(std::exp(dot(c[i], r[i / 2]) / pi) / denom);
  }
  return sum / static_cast<long double>(c.size());
}

/// Every (start, end, pattern) with text.compare(start, len, pattern) == 0.
inline std::vector<SurfaceMatch> naive_find_all(const std::string& text, const std::vector<std::string>& patterns) {
  std::vector<SurfaceMatch> out;
  for (std::uint32_t p = 0; p < patterns.size(); ++p) {
    const std::string& pat = patterns[p];
    if (pat.size() > text.size()) continue;
    for (std::size_t s = 0; s + pat.size() <= text.size(); ++s) {
      if (text.compare(s, pat.size(), pat) == 0) out.push_back({s, s + pat.size(), p});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Ranked {
  std::string entity_id;
  double score;
};

/// Full ranking by scanning every row; fusion adds the entity's reference.
inline std::vector<Ranked> brute_force_link(const VectorIndex& index, const std::vector<float>& q, bool fusion) {
  std::map<std::string, double> best;
  auto dot_f = [&](std::span<const float> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += static_cast<double>(q[i]) * static_cast<double>(v[i]);
    return s;
  };
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto& id = index.meta(r).entity_id;
    double s = dot_f(index.row(r));
    if (fusion) {
      const auto ref = index.reference(id);
      if (!ref.empty()) s += dot_f(ref);
    }
    auto [it, fresh] = best.emplace(id, s);
    if (!fresh) it->second = std::max(it->second, s);
  }
  if (fusion) {
    for (const auto& [id, ref] : index.references()) {
      if (!best.contains(id)) best.emplace(id, dot_f(ref));
    }
  }
  std::vector<Ranked> out;
  for (const auto& [id, s] : best) out.push_back({id, s});
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.entity_id < b.entity_id;
  });
  return out;
}

struct TensorError {
  std::string name;
  double relative = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double scale = 0.0;     // max(||analytic||, ||numeric||)
};

/// Central differences of `loss` with respect to every entry of `params`,
/// compared tensor by tensor with `analytic` (same shape). Tensors whose
/// gradients are both below `floor` in norm report a relative error of 0.
template <typename LossFn>
std::vector<TensorError> finite_difference_check(EncoderParams& params, const EncoderParams& analytic, LossFn&& loss,
                                                 double h = 1e-4, double floor = 1e-10) {
  std::vector<std::span<const double>> grads;
  analytic.visit([&](const std::string&, std::span<const double> g) { grads.push_back(g); });
  std::vector<TensorError> out;
  std::size_t t = 0;
  params.visit([&](const std::string& name, std::span<double> w) {
    const auto g = grads[t++];
    long double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss();
      w[i] = saved - h;
      const double down = loss();
      w[i] = saved;
      const long double numeric = (static_cast<long double>(up) - down) / (2.0L * h);
      diff2 += (g[i] - numeric) * (g[i] - numeric);
      a2 += static_cast<long double>(g[i]) * g[i];
      n2 += numeric * numeric;
    }
    const double scale = static_cast<double>(std::sqrt(std::max(a2, n2)));
    out.push_back({name, scale < floor ? 0.0 : static_cast<double>(std::sqrt(diff2)) / scale, scale});
  });
  return out;
}

}  // namespace kriss::oracle
