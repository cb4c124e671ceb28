// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Independent straight-line reference computations used as test oracles.
// Nothing here calls into the adapter implementation.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "moral/adapter.hpp"
#include "moral/rng.hpp"

namespace moral::testing {

inline std::vector<double> naive_softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(z[i] - m);
    s += e[i];
  }
  for (double& v : e) v /= s;
  return e;
}

// Sort all (score, index) pairs, keep the first k, divide by their sum.
inline std::vector<std::pair<std::size_t, double>> naive_top_k(const std::vector<double>& scores,
                                                               std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < scores.size(); ++i) all.emplace_back(scores[i], i);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += all[i].first;
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(all[i].second, all[i].first / total);
  return out;
}

inline double naive_gelu(double x) {
  const double pi = 3.14159265358979323846;
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

// y = W2 gelu(W1 x + sum_i s_i (alpha_i / r_i) U_i D_i x), written with raw loops.
inline std::vector<double> naive_moral_forward(const MoralLayer& layer, const std::vector<double>& x) {
  const std::size_t dm = layer.d_model();
  const std::size_t dff = layer.d_ff();
  const std::size_t n = layer.n_experts();
  const Matrix& wg = layer.router().w_g;
  std::vector<double> logits(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < dm; ++i) logits[j] += wg.data()[i * n + j] * x[i];
  const auto picks = naive_top_k(naive_softmax(logits), layer.top_k());

  const Matrix& w1 = layer.base().w1();
  const Matrix& w2 = layer.base().w2();
  std::vector<double> h(dff, 0.0);
  for (std::size_t r = 0; r < dff; ++r)
    for (std::size_t c = 0; c < dm; ++c) h[r] += w1.data()[r * dm + c] * x[c];
  for (const auto& [idx, weight] : picks) {
    const LoraExpert& e = layer.experts()[idx];
    const std::size_t rank = e.down.rows();
    std::vector<double> p(rank, 0.0);
    for (std::size_t r = 0; r < rank; ++r)
      for (std::size_t c = 0; c < dm; ++c) p[r] += e.down.data()[r * dm + c] * x[c];
    for (std::size_t r = 0; r < dff; ++r) {
      double u = 0.0;
      for (std::size_t c = 0; c < rank; ++c) u += e.up.data()[r * rank + c] * p[c];
      h[r] += weight * (e.alpha / static_cast<double>(rank)) * u;
    }
  }
  std::vector<double> y(dm, 0.0);
  for (std::size_t r = 0; r < dm; ++r)
    for (std::size_t c = 0; c < dff; ++c) y[r] += w2.data()[r * dff + c] * naive_gelu(h[c]);
  return y;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.uniform(-1.0, 1.0);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return v;
}

// A layer with every factor (including up) random, so all gradient paths are live.
inline MoralLayer random_moral_layer(std::size_t dm, std::size_t dff, std::size_t n, std::size_t k,
                                     std::size_t rank, Rng& rng) {
  FrozenFfn base(random_matrix(dff, dm, rng), random_matrix(dm, dff, rng));
  std::vector<LoraExpert> experts;
  for (std::size_t i = 0; i < n; ++i) {
    experts.push_back({random_matrix(rank, dm, rng), random_matrix(dff, rank, rng),
                       rng.uniform(0.5, 4.0)});
  }
  RouterNetwork router{random_matrix(dm, n, rng, 2.0)};
  return MoralLayer(std::move(base), std::move(experts), std::move(router), k);
}

}  // namespace moral::testing
