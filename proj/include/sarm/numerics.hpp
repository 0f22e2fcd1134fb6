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

// Dense numeric primitives shared by the encoder, the user tower and the
// ranking heads. Everything is templated on the scalar type: float for
// training and serving, double for gradient checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "sarm/errors.hpp"
#include "sarm/rng.hpp"

namespace sarm {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Per-position attendability; 1 = real token, 0 = padding.
using KeyMask = std::vector<uint8_t>;

inline constexpr double kRmsEps = 1e-6;
inline constexpr double kRopeBase = 10000.0;

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    const Scalar z = std::exp(-x);
    return Scalar(1) / (Scalar(1) + z);
  }
  const Scalar z = std::exp(x);
  return z / (Scalar(1) + z);
}

/// Exact (erf) GELU.
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / Scalar(std::sqrt(2.0 * std::numbers::pi));
  return cdf + x * pdf;
}

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw NumericError(std::string("non-finite input to ") + what);
}

// ---------------------------------------------------------------------------
// RMSNorm

template <typename Scalar>
RowVec<Scalar> rmsnorm(const RowVec<Scalar>& x, const RowVec<Scalar>& gain,
                       Scalar eps = Scalar(kRmsEps)) {
  check_finite(x, "rmsnorm");
  if (x.size() == 0 || gain.size() != x.size()) throw ShapeError("rmsnorm: size mismatch");
  const Scalar inv = Scalar(1) / std::sqrt(x.squaredNorm() / Scalar(x.size()) + eps);
  return (x * inv).cwiseProduct(gain);
}

/// Row-wise RMSNorm; keeps 1/rms per row for the backward pass.
template <typename Scalar>
Mat<Scalar> rmsnorm_rows(const Mat<Scalar>& x, const RowVec<Scalar>& gain,
                         std::vector<Scalar>& inv_rms, Scalar eps = Scalar(kRmsEps)) {
  check_finite(x, "rmsnorm");
  const auto d = x.cols();
  Mat<Scalar> y(x.rows(), d);
  inv_rms.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar inv = Scalar(1) / std::sqrt(x.row(i).squaredNorm() / Scalar(d) + eps);
    inv_rms[i] = inv;
    y.row(i) = (x.row(i) * inv).cwiseProduct(gain);
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> rmsnorm_rows_backward(const Mat<Scalar>& dy, const Mat<Scalar>& x,
                                  const RowVec<Scalar>& gain,
                                  const std::vector<Scalar>& inv_rms,
                                  RowVec<Scalar>& dgain) {
  const auto d = x.cols();
  Mat<Scalar> dx(x.rows(), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVec<Scalar> xhat = x.row(i) * inv_rms[i];
    dgain += dy.row(i).cwiseProduct(xhat);
    const RowVec<Scalar> dxhat = dy.row(i).cwiseProduct(gain);
    const Scalar proj = dxhat.dot(xhat) / Scalar(d);
    dx.row(i) = (dxhat - xhat * proj) * inv_rms[i];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Rotary position encoding

template <typename Scalar>
void rope_check(Eigen::Index d) {
  if (d % 2 != 0) throw ConfigError("rope: model width must be even, got " + std::to_string(d));
}

/// Rotates a single row in place; `sign = -1` applies the inverse rotation.
template <typename Scalar, typename Row>
void rope_apply(Row&& x, long pos, double base, int sign) {
  const auto d = x.size();
  for (Eigen::Index k = 0; k < d / 2; ++k) {
    const double theta =
        static_cast<double>(pos) * std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(d));
    const Scalar c = static_cast<Scalar>(std::cos(theta));
    const Scalar s = static_cast<Scalar>(sign * std::sin(theta));
    const Scalar a = x(2 * k), b = x(2 * k + 1);
    x(2 * k) = a * c - b * s;
    x(2 * k + 1) = a * s + b * c;
  }
}

template <typename Scalar>
RowVec<Scalar> rope_rotate(const RowVec<Scalar>& x, long pos, double base = kRopeBase) {
  rope_check<Scalar>(x.size());
  RowVec<Scalar> y = x;
  rope_apply<Scalar>(y, pos, base, +1);
  return y;
}

/// cos/sin of the rotation angles for positions [0, n) at width d, cached
/// per thread. Entry (i, k) lives at i * d/2 + k.
struct RopeTable {
  std::vector<double> cos, sin;
};

inline const RopeTable& rope_table(Eigen::Index n, Eigen::Index d, double base) {
  thread_local std::map<std::tuple<Eigen::Index, Eigen::Index, double>, RopeTable> cache;
  auto [it, fresh] = cache.try_emplace({n, d, base});
  if (fresh) {
    auto& t = it->second;
    t.cos.resize(static_cast<std::size_t>(n * (d / 2)));
    t.sin.resize(t.cos.size());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < d / 2; ++k) {
        const double theta =
            static_cast<double>(i) * std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(d));
        t.cos[static_cast<std::size_t>(i * (d / 2) + k)] = std::cos(theta);
        t.sin[static_cast<std::size_t>(i * (d / 2) + k)] = std::sin(theta);
      }
  }
  return it->second;
}

/// Row i rotated by position i (inverse rotation when `inverse`).
template <typename Scalar>
void rope_rows(Mat<Scalar>& x, double base = kRopeBase, bool inverse = false) {
  rope_check<Scalar>(x.cols());
  const auto half = x.cols() / 2;
  const auto& t = rope_table(x.rows(), x.cols(), base);
  const double sign = inverse ? -1.0 : 1.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < half; ++k) {
      const auto idx = static_cast<std::size_t>(i * half + k);
      const Scalar c = static_cast<Scalar>(t.cos[idx]);
      const Scalar s = static_cast<Scalar>(sign * t.sin[idx]);
      const Scalar a = x(i, 2 * k), b = x(i, 2 * k + 1);
      x(i, 2 * k) = a * c - b * s;
      x(i, 2 * k + 1) = a * s + b * c;
    }
  }
}

// ---------------------------------------------------------------------------
// Masked scaled dot-product attention

template <typename Scalar>
struct AttentionResult {
  Mat<Scalar> output;
  Mat<Scalar> weights;
  /// Set when some query had no attendable key (its row is all zero).
  bool empty_row = false;
};

/// Numerically stable softmax over the entries where `valid` is set; other
/// entries get weight 0. Returns false (and zeros) when nothing is valid.
template <typename Scalar, typename RowIn, typename RowOut>
bool masked_softmax(const RowIn& logits, const KeyMask& valid, RowOut&& out) {
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j)
    if (valid[j]) mx = std::max(mx, Scalar(logits(j)));
  if (!std::isfinite(static_cast<double>(mx))) {
    out.setZero();
    return false;
  }
  Scalar total = 0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    const Scalar e = valid[j] ? std::exp(Scalar(logits(j)) - mx) : Scalar(0);
    out(j) = e;
    total += e;
  }
  out /= total;
  return true;
}

template <typename Scalar>
AttentionResult<Scalar> masked_attention(const Mat<Scalar>& q, const Mat<Scalar>& k,
                                         const Mat<Scalar>& v, const KeyMask& key_valid) {
  if (q.cols() != k.cols() || k.rows() != v.rows() ||
      static_cast<Eigen::Index>(key_valid.size()) != k.rows())
    throw ShapeError("masked_attention: shape mismatch");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(q.cols()));
  AttentionResult<Scalar> r;
  const Mat<Scalar> logits = (q * k.transpose()) * scale;
  r.weights.resize(q.rows(), k.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (!masked_softmax<Scalar>(logits.row(i), key_valid, r.weights.row(i))) r.empty_row = true;
  }
  r.output = r.weights * v;
  return r;
}

template <typename Scalar>
struct AttentionGrads {
  Mat<Scalar> dq, dk, dv;
};

template <typename Scalar>
AttentionGrads<Scalar> masked_attention_backward(const Mat<Scalar>& d_out, const Mat<Scalar>& q,
                                                 const Mat<Scalar>& k, const Mat<Scalar>& v,
                                                 const Mat<Scalar>& weights) {
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(q.cols()));
  AttentionGrads<Scalar> g;
  g.dv = weights.transpose() * d_out;
  const Mat<Scalar> dw = d_out * v.transpose();
  Mat<Scalar> ds(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    const Scalar inner = weights.row(i).dot(dw.row(i));
    ds.row(i) = (weights.row(i).array() * (dw.row(i).array() - inner)).matrix();
  }
  g.dq = (ds * k) * scale;
  g.dk = (ds.transpose() * q) * scale;
  return g;
}

// ---------------------------------------------------------------------------
// Parameter initialization

enum class InitScheme { kUniformScaled, kZeros, kOnes };

inline InitScheme parse_init_scheme(const std::string& name) {
  if (name == "uniform-scaled") return InitScheme::kUniformScaled;
  if (name == "zeros") return InitScheme::kZeros;
  if (name == "ones") return InitScheme::kOnes;
  throw ConfigError("unknown init scheme: " + name);
}

/// Uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)) for kUniformScaled.
template <typename Scalar>
Mat<Scalar> init_params(Rng& rng, Eigen::Index rows, Eigen::Index cols, InitScheme scheme,
                        Eigen::Index fan_in) {
  Mat<Scalar> m(rows, cols);
  switch (scheme) {
    case InitScheme::kZeros:
      m.setZero();
      break;
    case InitScheme::kOnes:
      m.setOnes();
      break;
    case InitScheme::kUniformScaled: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle

struct GradCoordinate {
  double* value;    // parameter entry, perturbed in place and restored
  double analytic;  // analytic derivative at the unperturbed point
};

/// Central differences on every coordinate; returns the max of
/// |a - n| / max(|a|, |n|, 1e-8).
template <typename LossFn>
double grad_check(LossFn&& loss, std::span<const GradCoordinate> coords, double eps = 1e-5) {
  if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
  double worst = 0.0;
  for (const auto& c : coords) {
    const double saved = *c.value;
    *c.value = saved + eps;
    const double up = loss();
    *c.value = saved - eps;
    const double down = loss();
    *c.value = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("grad_check: non-finite loss");
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(c.analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(c.analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace sarm
