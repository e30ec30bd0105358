// Copyright 2026 The GCRS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <cmath>

#include "gcrs/random.hpp"

namespace gcrs {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Two tanh hidden layers and a linear head. Batched inputs are stored one
/// sample per column.
template <typename Scalar>
struct Mlp {
  MatrixX<Scalar> w1, w2, w3;
  VectorX<Scalar> b1, b2, b3;

  struct Cache {
    MatrixX<Scalar> x, h1, h2;
  };

  Eigen::Index inputs() const { return w1.cols(); }
  Eigen::Index outputs() const { return w3.rows(); }
  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index size() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
  }

  static Mlp zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out) {
    Mlp m;
    m.w1.setZero(hidden, in);
    m.b1.setZero(hidden);
    m.w2.setZero(hidden, hidden);
    m.b2.setZero(hidden);
    m.w3.setZero(out, hidden);
    m.b3.setZero(out);
    return m;
  }

  // Gaussian weights scaled by 1/sqrt(fan_in); `head_gain` scales the last layer.
  static Mlp random(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng,
                    Scalar head_gain = Scalar(1)) {
    Mlp m = zeros(in, hidden, out);
    auto fill = [&rng](MatrixX<Scalar>& w, Scalar gain) {
      const Scalar scale = gain / std::sqrt(static_cast<Scalar>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * static_cast<Scalar>(rng.normal());
    };
    fill(m.w1, Scalar(1));
    fill(m.w2, Scalar(1));
    fill(m.w3, head_gain);
    return m;
  }

  MatrixX<Scalar> forward(const MatrixX<Scalar>& x, Cache* cache = nullptr) const {
    MatrixX<Scalar> h1 = ((w1 * x).colwise() + b1).array().tanh().matrix();
    MatrixX<Scalar> h2 = ((w2 * h1).colwise() + b2).array().tanh().matrix();
    MatrixX<Scalar> y = (w3 * h2).colwise() + b3;
    if (cache != nullptr) {
      cache->x = x;
      cache->h1 = std::move(h1);
      cache->h2 = std::move(h2);
    }
    return y;
  }

  /// Gradient of sum(dy .* y) with respect to every parameter.
  Mlp backward(const Cache& c, const MatrixX<Scalar>& dy) const {
    Mlp g;
    g.w3.noalias() = dy * c.h2.transpose();
    g.b3 = dy.rowwise().sum();
    MatrixX<Scalar> d2 = (w3.transpose() * dy).array() * (Scalar(1) - c.h2.array().square());
    g.w2.noalias() = d2 * c.h1.transpose();
    g.b2 = d2.rowwise().sum();
    MatrixX<Scalar> d1 = (w2.transpose() * d2).array() * (Scalar(1) - c.h1.array().square());
    g.w1.noalias() = d1 * c.x.transpose();
    g.b1 = d1.rowwise().sum();
    return g;
  }

  /// Writes parameters in the order w1, b1, w2, b2, w3, b3 (column-major).
  template <typename Derived>
  void flatten_into(Eigen::MatrixBase<Derived>& out, Eigen::Index& at) const {
    auto put = [&](const auto& m) {
      out.segment(at, m.size()) = m.reshaped();
      at += m.size();
    };
    put(w1); put(b1); put(w2); put(b2); put(w3); put(b3);
  }

  template <typename Derived>
  void unflatten_from(const Eigen::MatrixBase<Derived>& in, Eigen::Index& at) {
    auto take = [&](auto& m) {
      m.reshaped() = in.segment(at, m.size());
      at += m.size();
    };
    take(w1); take(b1); take(w2); take(b2); take(w3); take(b3);
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
           w3.allFinite() && b3.allFinite();
  }

  template <typename NewScalar>
  Mlp<NewScalar> cast() const {
    Mlp<NewScalar> m;
    m.w1 = w1.template cast<NewScalar>();
    m.b1 = b1.template cast<NewScalar>();
    m.w2 = w2.template cast<NewScalar>();
    m.b2 = b2.template cast<NewScalar>();
    m.w3 = w3.template cast<NewScalar>();
    m.b3 = b3.template cast<NewScalar>();
    return m;
  }
};

}  // namespace gcrs
