/*
 * Copyright 2026 The deltatune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DELTATUNE_GP_HPP_
#define DELTATUNE_GP_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "deltatune/errors.hpp"
#include "deltatune/problem.hpp"

namespace deltatune {

// Gaussian belief N(mu, diag(sigma2)) over the delta vector of one candidate.
struct CandidateBelief {
  CandidateId id;
  Vector mu;
  Vector sigma2;
};

// One draw delta ~ N(mu, diag(sigma2)). Zero variances return mu exactly.
template <typename Rng>
Vector sample_delta(const CandidateBelief& belief, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(belief.mu.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double z = normal(rng);
    out[k] = belief.sigma2[k] > 0.0 ? belief.mu[k] + std::sqrt(belief.sigma2[k]) * z
                                    : belief.mu[k];
  }
  return out;
}

inline constexpr double kGpJitter = 1e-8;
inline constexpr double kGpMaxJitter = 1e-4;
inline constexpr double kGpSignalFloor = 1e-8;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct KernelParams {
  VectorX<Scalar> lengthscales;  // per input dimension
  Scalar signal_var = Scalar(1);
};

// Squared-exponential (ARD) covariance between the rows of a and b.
template <typename DerivedA, typename DerivedB, typename Scalar>
MatrixX<Scalar> squared_exponential(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b,
                                    const KernelParams<Scalar>& params) {
  const auto inv_ls = params.lengthscales.cwiseInverse().asDiagonal();
  const MatrixX<Scalar> sa = a * inv_ls;
  const MatrixX<Scalar> sb = b * inv_ls;
  MatrixX<Scalar> k(sa.rows(), sb.rows());
  for (Eigen::Index j = 0; j < sb.rows(); ++j) {
    for (Eigen::Index i = 0; i < sa.rows(); ++i) {
      k(i, j) = params.signal_var *
                std::exp(Scalar(-0.5) * (sa.row(i) - sb.row(j)).squaredNorm());
    }
  }
  return k;
}

// Median pairwise Euclidean distance between rows, used as the length scale
// of every input dimension. Fewer than two distinct rows fall back to 1.
template <typename Derived>
VectorX<typename Derived::Scalar> median_lengthscales(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> ls = VectorX<Scalar>::Ones(x.cols());
  const Eigen::Index n = x.rows();
  if (n < 2) return ls;
  std::vector<Scalar> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((x.row(i) - x.row(j)).norm());
  }
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  Scalar median = *mid;
  if (dist.size() % 2 == 0) {
    const Scalar lower = *std::max_element(dist.begin(), mid);
    median = Scalar(0.5) * (median + lower);
  }
  if (median > Scalar(1e-12)) ls.setConstant(median);
  return ls;
}

// Zero-mean GP regression with a per-observation noise diagonal.
template <typename Scalar>
class GaussianProcess {
 public:
  GaussianProcess() = default;

  // `noise` is added to the kernel diagonal together with the jitter
  // eps * signal_var. eps starts at 1e-8 and grows x10 up to 1e-4 while the
  // Cholesky factorization fails; past that, FitFailureError.
  GaussianProcess(MatrixX<Scalar> inputs, VectorX<Scalar> targets,
                  VectorX<Scalar> noise, KernelParams<Scalar> params)
      : inputs_(std::move(inputs)),
        targets_(std::move(targets)),
        noise_(std::move(noise)),
        params_(std::move(params)) {
    if (inputs_.rows() == 0 || inputs_.rows() != targets_.size() ||
        noise_.size() != targets_.size() ||
        params_.lengthscales.size() != inputs_.cols()) {
      throw InvalidInputError("gp: inconsistent training shapes");
    }
    if (!inputs_.allFinite() || !targets_.allFinite() || !noise_.allFinite()) {
      throw InvalidInputError("gp: non-finite training data");
    }
    const MatrixX<Scalar> k = squared_exponential(inputs_, inputs_, params_);
    for (Scalar jitter = Scalar(kGpJitter); jitter <= Scalar(kGpMaxJitter) * Scalar(1.0001);
         jitter *= Scalar(10)) {
      MatrixX<Scalar> c = k;
      c.diagonal() += noise_;
      c.diagonal().array() += jitter * params_.signal_var;
      chol_.compute(c);
      if (chol_.info() == Eigen::Success) {
        jitter_ = jitter * params_.signal_var;
        alpha_ = chol_.solve(targets_);
        return;
      }
    }
    throw FitFailureError("gp: kernel matrix not positive definite after jitter");
  }

  // Heuristic hyperparameters: median-distance length scales and the second
  // moment of the targets about the zero prior mean (floored at 1e-8).
  static KernelParams<Scalar> heuristic_params(const MatrixX<Scalar>& inputs,
                                               const VectorX<Scalar>& targets) {
    KernelParams<Scalar> p;
    p.lengthscales = median_lengthscales(inputs);
    p.signal_var = std::max(Scalar(kGpSignalFloor),
                            targets.squaredNorm() / Scalar(targets.size()));
    return p;
  }

  struct Prediction {
    Scalar mean;
    Scalar var;
  };

  template <typename Derived>
  Prediction predict(const Eigen::MatrixBase<Derived>& x) const {
    const MatrixX<Scalar> k = squared_exponential(inputs_, x.transpose(), params_);
    const Scalar mean = k.col(0).dot(alpha_);
    const VectorX<Scalar> v = chol_.matrixL().solve(k.col(0));
    const Scalar var = std::max(Scalar(0), params_.signal_var - v.squaredNorm());
    return {mean, var};
  }

  const KernelParams<Scalar>& params() const { return params_; }
  // Absolute jitter that ended up on the diagonal.
  Scalar jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }

 private:
  MatrixX<Scalar> inputs_;
  VectorX<Scalar> targets_;
  VectorX<Scalar> noise_;
  KernelParams<Scalar> params_;
  Eigen::LLT<MatrixX<Scalar>> chol_;
  VectorX<Scalar> alpha_;
  Scalar jitter_ = Scalar(kGpJitter);
};

// One independent GP per metric over box-normalized candidate vectors.
// Immutable once fitted.
template <typename Scalar>
class GpSurrogate {
 public:
  GpSurrogate() = default;

  // `beliefs[j]` holds the aggregated estimate of `bucket[j]`: mu is the
  // target, sigma2 the observation noise. All candidates must share bounds.
  static GpSurrogate fit(std::span<const HyperParam> bucket,
                         std::span<const CandidateBelief> beliefs) {
    if (bucket.empty()) throw InvalidInputError("gp fit: empty bucket");
    if (bucket.size() != beliefs.size()) {
      throw InvalidInputError("gp fit: beliefs not aligned with bucket");
    }
    GpSurrogate s;
    s.bounds_ = bucket.front().bounds();
    const auto n = static_cast<Eigen::Index>(bucket.size());
    const Eigen::Index d = s.bounds_.dim();
    const Eigen::Index m = beliefs.front().mu.size();
    MatrixX<Scalar> x(n, d);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& hp = bucket[static_cast<std::size_t>(j)];
      const auto& b = beliefs[static_cast<std::size_t>(j)];
      if (!(hp.bounds() == s.bounds_)) {
        throw InvalidInputError("gp fit: candidates with different bounds");
      }
      if (b.id != hp.id() || b.mu.size() != m || b.sigma2.size() != m) {
        throw InvalidInputError("gp fit: belief does not match candidate");
      }
      x.row(j) = s.bounds_.to_unit(hp.theta()).template cast<Scalar>().transpose();
    }
    s.models_.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
      VectorX<Scalar> y(n);
      VectorX<Scalar> noise(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto& b = beliefs[static_cast<std::size_t>(j)];
        y[j] = static_cast<Scalar>(b.mu[k]);
        noise[j] = static_cast<Scalar>(b.sigma2[k]);
      }
      if ((noise.array() < Scalar(0)).any()) {
        throw InvalidInputError("gp fit: negative belief variance");
      }
      auto params = GaussianProcess<Scalar>::heuristic_params(x, y);
      s.models_.emplace_back(x, std::move(y), std::move(noise), std::move(params));
    }
    return s;
  }

  bool fitted() const { return !models_.empty(); }
  Eigen::Index num_metrics() const { return static_cast<Eigen::Index>(models_.size()); }
  const Bounds& bounds() const { return bounds_; }
  const GaussianProcess<Scalar>& model(Eigen::Index metric) const {
    return models_.at(static_cast<std::size_t>(metric));
  }

  // Posterior belief at theta. Throws InvalidInputError when unfitted or
  // theta is outside the training bounds.
  CandidateBelief predict(const VectorRef& theta, CandidateId id = {}) const {
    if (!fitted()) throw InvalidInputError("gp predict: surrogate not fitted");
    if (!bounds_.contains(theta)) {
      throw InvalidInputError("gp predict: theta outside bounds");
    }
    const VectorX<Scalar> u = bounds_.to_unit(theta).template cast<Scalar>();
    CandidateBelief out{id, Vector(num_metrics()), Vector(num_metrics())};
    for (Eigen::Index k = 0; k < num_metrics(); ++k) {
      const auto p = models_[static_cast<std::size_t>(k)].predict(u);
      out.mu[k] = static_cast<double>(p.mean);
      out.sigma2[k] = static_cast<double>(p.var);
    }
    return out;
  }

 private:
  Bounds bounds_;
  std::vector<GaussianProcess<Scalar>> models_;
};

using Surrogate = GpSurrogate<double>;

}  // namespace deltatune

#endif  // DELTATUNE_GP_HPP_
