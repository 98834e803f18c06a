#pragma once

#include "gpbandits/environments.hpp"
#include "gpbandits/gp.hpp"
#include "gpbandits/kernels.hpp"
#include "gpbandits/policies.hpp"
#include "gpbandits/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace gpb {

// ---------------------------------------------------------------------------
// Regret accounting
// ---------------------------------------------------------------------------

struct RegretTrace {
  std::vector<double> instantaneous;  // r_t
  std::vector<double> cumulative;     // R_t = sum_{u<=t} r_u
  std::string policy;
  int replication = 0;
  std::uint64_t seed = 0;

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

namespace detail {

template <typename BestFn, typename ChosenFn>
RegretTrace accumulate_regret(Eigen::Index steps, BestFn&& best, ChosenFn&& chosen) {
  RegretTrace trace;
  trace.instantaneous.reserve(static_cast<std::size_t>(steps));
  trace.cumulative.reserve(static_cast<std::size_t>(steps));
  double running = 0.0;
  for (Eigen::Index i = 0; i < steps; ++i) {
    const double r = best(i) - chosen(i);
    running += r;
    trace.instantaneous.push_back(r);
    trace.cumulative.push_back(running);
  }
  return trace;
}

}  // namespace detail

// r_t = max_a f(a,t) - f(a_t, t) over environment means.
inline RegretTrace regret_trace(const SyntheticPeriodicEnv& env,
                                std::span<const Eigen::Index> action_indices,
                                TimeIndex start_step = 1) {
  return detail::accumulate_regret(
      static_cast<Eigen::Index>(action_indices.size()),
      [&](Eigen::Index i) { return env.best_mean(start_step + i).second; },
      [&](Eigen::Index i) {
        return env.mean(action_indices[static_cast<std::size_t>(i)], start_step + i);
      });
}

// Replay regret uses recorded values: r_t = max_j x[t,j] - x[t, chosen].
inline RegretTrace regret_trace(const ReplayEnv& env, std::span<const Eigen::Index> arms,
                                TimeIndex start_step = 1) {
  return detail::accumulate_regret(
      static_cast<Eigen::Index>(arms.size()),
      [&](Eigen::Index i) { return env.best_mean(start_step + i).second; },
      [&](Eigen::Index i) { return env.reward(arms[static_cast<std::size_t>(i)], start_step + i); });
}

// ---------------------------------------------------------------------------
// Information gain
// ---------------------------------------------------------------------------

// 1/2 log det(I + sigma^-2 K) via Cholesky, summing the log-diagonal.
inline double info_gain_logdet(const Eigen::MatrixXd& gram_matrix, double noise_variance) {
  if (gram_matrix.rows() != gram_matrix.cols()) {
    throw std::invalid_argument("info_gain_logdet: matrix must be square");
  }
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument("info_gain_logdet: noise variance must be > 0");
  }
  const Eigen::Index n = gram_matrix.rows();
  Eigen::MatrixXd shifted = gram_matrix / noise_variance;
  shifted.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    // I + K/sigma^2 is PD for PSD K; only a genuinely indefinite input lands here.
    const double scale = shifted.trace() / static_cast<double>(n);
    bool ok = false;
    for (double jitter = 1e-10 * scale; jitter <= 1e-4 * scale * (1.0 + 1e-12); jitter *= 10.0) {
      Eigen::MatrixXd retry = shifted;
      retry.diagonal().array() += jitter;
      llt.compute(retry);
      if (llt.info() == Eigen::Success) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw DegeneracyError("info_gain_logdet: factorization failed after jitter escalation");
    }
  }
  const Eigen::MatrixXd l = llt.matrixL();
  return l.diagonal().array().log().sum();
}

struct InfoGainReport {
  double observed_gain = 0.0;             // I(y_{1:T}; f_{1:T}) on the realized inputs
  std::vector<double> phase_gains;        // I(y^(i); f^(i)) for phases i = 1..tau
  double greedy_gamma_action = 0.0;       // greedy lower estimate of gamma^A_K
  double tau_times_gamma = 0.0;           // bound tau * gamma^A_K
  double bound_slack = 0.0;               // sum(phase_gains) - observed_gain, >= 0 up to roundoff

  double phase_sum() const {
    double s = 0.0;
    for (double g : phase_gains) {
      s += g;
    }
    return s;
  }
};

// Rearrangement inequality on realized inputs with time coordinates 1..T,
// T a multiple of tau: the joint gain is at most the sum over phases of the
// gain computed from each phase's action-kernel gram (within a phase the
// periodic time factor is exactly 1).
inline InfoGainReport rearrangement_check(std::span<const ActionTimePair> inputs,
                                          const ProductKernel& kernel, double noise_variance,
                                          TimeIndex tau) {
  const TimeIndex steps = static_cast<TimeIndex>(inputs.size());
  if (tau < 1 || steps < 1 || steps % tau != 0) {
    throw std::invalid_argument("rearrangement_check: T must be a positive multiple of tau");
  }
  for (TimeIndex t = 1; t <= steps; ++t) {
    if (inputs[static_cast<std::size_t>(t - 1)].time != t) {
      throw std::invalid_argument("rearrangement_check: inputs must carry times 1..T in order");
    }
  }

  InfoGainReport report;
  report.observed_gain = info_gain_logdet(gram(kernel, inputs), noise_variance);
  report.phase_gains.reserve(static_cast<std::size_t>(tau));
  for (TimeIndex phase = 1; phase <= tau; ++phase) {
    std::vector<ActionVector> actions;
    for (TimeIndex t = phase; t <= steps; t += tau) {
      actions.push_back(inputs[static_cast<std::size_t>(t - 1)].action);
    }
    report.phase_gains.push_back(info_gain_logdet(
        gram(kernel.action, std::span<const ActionVector>(actions)), noise_variance));
  }
  report.bound_slack = report.phase_sum() - report.observed_gain;
  return report;
}

// Greedy approximation of gamma^A_K: repeatedly take the candidate with the
// largest marginal gain 1/2 log(1 + sigma^-2 var(a)), each candidate at most
// once, ties to the lowest index. With budget = |candidates| the total
// telescopes to the exact full-set log-det gain.
inline double greedy_gamma(const ActionKernel& action_kernel, const ActionGrid& candidates,
                           Eigen::Index budget, double noise_variance) {
  if (budget < 0 || budget > candidates.size()) {
    throw std::invalid_argument("greedy_gamma: budget must lie in [0, |candidates|]");
  }
  GpPosterior state(ProductKernel{action_kernel, ConstantTime{}}, NoiseModel{noise_variance});
  std::vector<bool> used(static_cast<std::size_t>(candidates.size()), false);
  double total = 0.0;
  for (Eigen::Index pick = 0; pick < budget; ++pick) {
    Eigen::Index best = -1;
    double best_var = -1.0;
    for (Eigen::Index i = 0; i < candidates.size(); ++i) {
      if (used[static_cast<std::size_t>(i)]) {
        continue;
      }
      const double var = state.predict({candidates[i], 1}).variance;
      if (var > best_var) {
        best_var = var;
        best = i;
      }
    }
    total += 0.5 * std::log1p(best_var / noise_variance);
    state.observe({candidates[best], 1}, 0.0);
    used[static_cast<std::size_t>(best)] = true;
  }
  return total;
}

// gamma^S_T <= tau * gamma^A_K. Greedy gamma is a lower estimate of gamma^A,
// so comparisons against this bound are diagnostics, not proofs of violation.
inline double periodic_gain_bound(double greedy_gamma_k, TimeIndex tau) {
  if (!(greedy_gamma_k >= 0.0) || tau < 1) {
    throw std::invalid_argument("periodic_gain_bound: gamma must be >= 0 and tau >= 1");
  }
  return static_cast<double>(tau) * greedy_gamma_k;
}

// High-probability regret envelope sqrt(c3 t beta_t gamma) + pi^2/6 with
// c3 = 8 / log(1 + sigma^-2), for t = 1..T.
inline std::vector<double> regret_bound_curve(TimeIndex horizon, const BetaSchedule& schedule,
                                              double gamma, double noise_variance) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("regret_bound_curve: gamma must be >= 0");
  }
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument("regret_bound_curve: noise variance must be > 0");
  }
  const double c3 = 8.0 / std::log1p(1.0 / noise_variance);
  constexpr double tail = std::numbers::pi * std::numbers::pi / 6.0;
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(horizon));
  for (TimeIndex t = 1; t <= horizon; ++t) {
    const double b = beta(schedule, t);
    curve.push_back(std::sqrt(c3 * static_cast<double>(t) * b * gamma) + tail);
  }
  return curve;
}

// Count of singular values above rel_tol * sigma_max.
inline Eigen::Index rank_estimate(const Eigen::MatrixXd& m, double rel_tol = 1e-8) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) {
    return 0;
  }
  const double cutoff = rel_tol * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      ++rank;
    }
  }
  return rank;
}

}  // namespace gpb
