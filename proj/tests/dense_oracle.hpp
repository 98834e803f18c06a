#pragma once

// Test-only reference implementations, kept independent of the library's
// incremental paths: posterior moments by dense LU solve and information gain
// by eigenvalue log-determinant.

#include "gpbandits/kernels.hpp"
#include "gpbandits/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <span>
#include <vector>

namespace oracle {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

inline Moments dense_predict(const gpb::ProductKernel& kernel,
                             std::span<const gpb::ActionTimePair> inputs,
                             const Eigen::VectorXd& targets, double noise_variance,
                             const gpb::ActionTimePair& query) {
  const double k_qq = eval(kernel, query, query);
  if (inputs.empty()) {
    return {0.0, k_qq};
  }
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd kv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = eval(kernel, inputs[static_cast<std::size_t>(i)],
                     inputs[static_cast<std::size_t>(j)]);
    }
    a(i, i) += noise_variance;
    kv(i) = eval(kernel, inputs[static_cast<std::size_t>(i)], query);
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  return {kv.dot(lu.solve(targets)), k_qq - kv.dot(lu.solve(kv))};
}

// 1/2 log det(I + K/sigma^2) through eigenvalues of K.
inline double dense_info_gain(const Eigen::MatrixXd& gram, double noise_variance) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  double total = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    total += 0.5 * std::log1p(std::max(es.eigenvalues()(i), 0.0) / noise_variance);
  }
  return total;
}

inline double dense_info_gain(const gpb::ProductKernel& kernel,
                              std::span<const gpb::ActionTimePair> inputs,
                              double noise_variance) {
  return dense_info_gain(gram(kernel, inputs), noise_variance);
}

// Random inputs for property tests.
inline gpb::ActionVector random_action(gpb::GaussianStream& stream, int dims, double spread = 2.0) {
  gpb::ActionVector a(dims);
  for (int d = 0; d < dims; ++d) {
    a(d) = spread * (stream.uniform() - 0.5);
  }
  return a;
}

inline std::vector<gpb::ActionTimePair> random_trajectory(gpb::GaussianStream& stream, int steps,
                                                          int dims) {
  std::vector<gpb::ActionTimePair> inputs;
  inputs.reserve(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    inputs.push_back({random_action(stream, dims), static_cast<gpb::TimeIndex>(t)});
  }
  return inputs;
}

}  // namespace oracle
