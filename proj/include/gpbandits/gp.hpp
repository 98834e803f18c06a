#pragma once

#include "gpbandits/kernels.hpp"
#include "gpbandits/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace gpb {

// Zero-mean GP posterior over action-time pairs, maintained incrementally.
// Each observation extends the Cholesky factor of (K + sigma^2 I) by one
// bordered row instead of refactorizing, and accumulates the sequential
// information gain 1/2 sum_t log(1 + sigma^-2 var_{t-1}(s_t)).
class GpPosterior {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  GpPosterior(ProductKernel kernel, NoiseModel noise)
      : kernel_(std::move(kernel)), noise_(noise) {
    validate(kernel_);
    check_noise(noise_);
  }

  Eigen::Index size() const { return n_; }
  const std::vector<ActionTimePair>& inputs() const { return inputs_; }
  const ProductKernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_.variance; }
  double info_gain() const { return info_gain_; }

  // Jitter folded into the factorized diagonal, 0 unless degeneracy recovery ran.
  double applied_jitter() const { return jitter_; }

  Eigen::VectorXd targets() const {
    return Eigen::Map<const Eigen::VectorXd>(targets_.data(), n_);
  }

  // Lower-triangular factor L with L L^T = K + (sigma^2 + jitter) I.
  Eigen::MatrixXd cholesky_factor() const {
    return chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>();
  }

  Prediction predict(const ActionTimePair& s) const {
    const double k_ss = eval(kernel_, s, s);
    if (n_ == 0) {
      return {0.0, k_ss};
    }
    const Eigen::VectorXd kv = cross_covariances(s);
    const double mean = kv.dot(alpha_);
    const Eigen::VectorXd w =
        chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solve(kv);
    return {mean, clamp_variance(k_ss - w.squaredNorm())};
  }

  std::vector<Prediction> predict_batch(std::span<const ActionTimePair> queries) const {
    std::vector<Prediction> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
      out.push_back(predict(q));
    }
    return out;
  }

  // Same posterior moments as predict for the pairs (a, t), a in actions, but
  // with one multi-RHS triangular solve across the whole grid.
  std::vector<Prediction> predict_grid(std::span<const ActionVector> actions, TimeIndex t) const {
    const Eigen::Index m = static_cast<Eigen::Index>(actions.size());
    std::vector<Prediction> out(static_cast<std::size_t>(m));
    if (n_ == 0) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const ActionTimePair q{actions[static_cast<std::size_t>(j)], t};
        out[static_cast<std::size_t>(j)] = {0.0, eval(kernel_, q, q)};
      }
      return out;
    }
    Eigen::MatrixXd cross(n_, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const ActionTimePair q{actions[static_cast<std::size_t>(j)], t};
      for (Eigen::Index i = 0; i < n_; ++i) {
        cross(i, j) = eval(kernel_, inputs_[static_cast<std::size_t>(i)], q);
      }
    }
    const Eigen::VectorXd means = cross.transpose() * alpha_;
    chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(cross);
    for (Eigen::Index j = 0; j < m; ++j) {
      const ActionTimePair q{actions[static_cast<std::size_t>(j)], t};
      const double k_qq = eval(kernel_, q, q);
      out[static_cast<std::size_t>(j)] = {means(j),
                                          clamp_variance(k_qq - cross.col(j).squaredNorm())};
    }
    return out;
  }

  void observe(const ActionTimePair& s, double y) {
    if (!std::isfinite(y)) {
      throw std::invalid_argument("observation target must be finite");
    }
    if (s.time < 1) {
      throw std::invalid_argument("time index must be >= 1");
    }
    const double k_ss = eval(kernel_, s, s);

    double var_before = k_ss;
    Eigen::VectorXd w;
    if (n_ > 0) {
      const Eigen::VectorXd kv = cross_covariances(s);
      w = chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solve(kv);
      var_before = k_ss - w.squaredNorm();
    }
    const double clamped = clamp_variance(var_before);

    const double pivot_sq = var_before + noise_.variance + jitter_;
    if (std::isfinite(pivot_sq) && pivot_sq > 0.0) {
      grow_to(n_ + 1);
      if (n_ > 0) {
        chol_.row(n_).head(n_) = w;
      }
      chol_(n_, n_) = std::sqrt(pivot_sq);
      inputs_.push_back(s);
      targets_.push_back(y);
      ++n_;
    } else {
      inputs_.push_back(s);
      targets_.push_back(y);
      ++n_;
      refactor_with_jitter();
    }

    info_gain_ += 0.5 * std::log1p(clamped / noise_.variance);
    refresh_alpha();
  }

 private:
  Eigen::VectorXd cross_covariances(const ActionTimePair& s) const {
    Eigen::VectorXd v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      v(i) = eval(kernel_, inputs_[static_cast<std::size_t>(i)], s);
    }
    return v;
  }

  double clamp_variance(double v) const {
    if (v >= 0.0) {
      return v;
    }
    if (v >= -1e-10) {
      return 0.0;
    }
    throw DegeneracyError("posterior variance " + std::to_string(v) +
                          " below roundoff tolerance; kernel matrix is degenerate");
  }

  void grow_to(Eigen::Index need) {
    if (need <= chol_.rows()) {
      return;
    }
    Eigen::Index cap = chol_.rows() == 0 ? 8 : chol_.rows();
    while (cap < need) {
      cap *= 2;
    }
    Eigen::MatrixXd bigger(cap, cap);
    bigger.topLeftCorner(n_, n_) = chol_.topLeftCorner(n_, n_);
    chol_ = std::move(bigger);
  }

  void refactor_with_jitter() {
    Eigen::MatrixXd k = gram(kernel_, std::span<const ActionTimePair>(inputs_));
    const double scale = k.trace() / static_cast<double>(n_);
    for (double jitter = 1e-10 * scale; jitter <= 1e-4 * scale * (1.0 + 1e-12); jitter *= 10.0) {
      Eigen::MatrixXd shifted = k;
      shifted.diagonal().array() += noise_.variance + jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      if (llt.info() == Eigen::Success) {
        grow_to(n_);
        chol_.topLeftCorner(n_, n_) = llt.matrixL();
        jitter_ = jitter;
        return;
      }
    }
    throw DegeneracyError("Cholesky factorization failed after jitter escalation");
  }

  void refresh_alpha() {
    const Eigen::Map<const Eigen::VectorXd> y(targets_.data(), n_);
    const auto lower = chol_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>();
    Eigen::VectorXd z = lower.solve(y);
    alpha_ = lower.transpose().solve(z);
  }

  ProductKernel kernel_;
  NoiseModel noise_;
  std::vector<ActionTimePair> inputs_;
  std::vector<double> targets_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  Eigen::Index n_ = 0;
  double info_gain_ = 0.0;
  double jitter_ = 0.0;
};

}  // namespace gpb
