/* Copyright 2026 The SARM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Straight-line double-precision reference for the transformer pieces,
// written with plain loops and no shared code with the library.

#include <cmath>
#include <vector>

#include "sarm/numerics.hpp"

namespace sarm::reference {

using Rows = std::vector<std::vector<double>>;


inline Rows matmul(const Rows& a, const Mat<double>& w) {
  Rows out(a.size(), std::vector<double>(static_cast<std::size_t>(w.cols()), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index k = 0; k < w.rows(); ++k) out[i][j] += a[i][k] * w(k, j);
  return out;
}

inline std::vector<double> norm_row(const std::vector<double>& x, const Mat<double>& gain) {
  double ss = 0;
  for (double v : x) ss += v * v;
  const double r = std::sqrt(ss / static_cast<double>(x.size()) + 1e-6);
  std::vector<double> y(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) y[c] = x[c] / r * gain(0, static_cast<Eigen::Index>(c));
  return y;
}

inline Rows norm_rows(const Rows& x, const Mat<double>& gain) {
  Rows y;
  for (const auto& r : x) y.push_back(norm_row(r, gain));
  return y;
}

inline void rotate(Rows& x) {
  const std::size_t d = x[0].size();
  for (std::size_t pos = 0; pos < x.size(); ++pos)
    for (std::size_t k = 0; k < d / 2; ++k) {
      const double th = static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(k) / static_cast<double>(d));
      const double a = x[pos][2 * k], b = x[pos][2 * k + 1];
      x[pos][2 * k] = a * std::cos(th) - b * std::sin(th);
      x[pos][2 * k + 1] = a * std::sin(th) + b * std::cos(th);
    }
}

inline Rows attend(const Rows& q, const Rows& k, const Rows& v, const std::vector<bool>& valid) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
  Rows out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> w(k.size(), 0.0);
    double mx = -1e300, total = 0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!valid[j]) continue;
      for (std::size_t c = 0; c < q[i].size(); ++c) w[j] += q[i][c] * k[j][c];
      w[j] *= scale;
      mx = std::max(mx, w[j]);
    }
    for (std::size_t j = 0; j < k.size(); ++j) total += valid[j] ? (w[j] = std::exp(w[j] - mx)) : (w[j] = 0);
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w[j] / total * v[j][c];
  }
  return out;
}

inline void add(Rows& x, const Rows& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < x[i].size(); ++c) x[i][c] += y[i][c];
}


/// Pre-norm block: attention with RoPE and key masking, then a GELU FFN.
template <typename BlockP>
void block(Rows& x, const BlockP& B, const std::vector<bool>& valid) {
  const Rows n1 = norm_rows(x, B.norm1);
  Rows q = matmul(n1, B.wq), k = matmul(n1, B.wk);
  const Rows v = matmul(n1, B.wv);
  rotate(q);
  rotate(k);
  add(x, matmul(attend(q, k, v, valid), B.wo));
  Rows h = matmul(norm_rows(x, B.norm2), B.w1);
  for (auto& r : h)
    for (double& z : r) z = 0.5 * z * (1 + std::erf(z / std::sqrt(2.0)));
  add(x, matmul(h, B.w2));
}

inline double max_diff(const Mat<double>& a, const Rows& b) {
  double m = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      m = std::max(m, std::abs(a(i, c) - b[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]));
  return m;
}

inline Rows to_rows(const Mat<double>& m) {
  Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

}  // namespace sarm::reference
